#pragma once

#include "oed/app.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace oed::testing {

/// Small model problem built through the configuration layer. A tight CG
/// tolerance keeps operator round-off below the exactness checks.
inline app::RunConfig desk_config(int n, int lattice, double cg_tol = 1e-13) {
  nlohmann::json j = {{"model", {{"nx", n}, {"ny", n}, {"cg_tol", cg_tol}}},
                      {"prior", {{"cg_tol", cg_tol}}},
                      {"obs", {{"lattice_per_axis", lattice}}}};
  return app::parse_config(j);
}

inline Matrix random_matrix(Index r, Index c, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Matrix a(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) a(i, j) = dist(gen);
  return a;
}

inline Vector random_vector(Index n, unsigned seed) { return random_matrix(n, 1, seed).col(0); }

inline Vector random_box_point(Index n, unsigned seed, double lo = 0.05, double hi = 0.95) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector w(n);
  for (Index i = 0; i < n; ++i) w(i) = dist(gen);
  return w;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("oed_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oed::testing
