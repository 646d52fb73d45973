#pragma once

// Counter-based Gaussian generator. Entry k of stream `seed` is a pure
// function of (seed, k), so matrices are identical across platforms and
// independent of how columns are distributed over threads.
//
//   uniform(seed, k) = ((splitmix64(seed ^ mix(k)) >> 11) + 1) * 2^-53   in (0, 1]
//   normals 2p, 2p+1 = Box-Muller(uniform(seed, 2p), uniform(seed, 2p+1))

#include <Eigen/Dense>

#include <cstdint>

namespace oed::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent child stream (e.g. per trial or per purpose).
constexpr std::uint64_t split(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

double uniform(std::uint64_t seed, std::uint64_t index);

double normal(std::uint64_t seed, std::uint64_t index);

/// Fill a column-major n-by-l matrix with i.i.d. standard normals; entry
/// (i, j) uses counter j*n + i.
Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index l, std::uint64_t seed);

Eigen::VectorXd gaussian_vector(Eigen::Index n, std::uint64_t seed);

/// Sequential convenience wrapper over the counter stream.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : seed_(seed) {}

  double uniform() { return rng::uniform(seed_, next_++); }
  double normal();
  std::uint64_t next_u64() { return mix64(seed_ ^ mix64(next_++)); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t seed_;
  std::uint64_t next_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace oed::rng
