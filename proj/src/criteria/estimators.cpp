#include "oed/criteria.hpp"

#include "oed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

namespace oed {

std::string to_string(Criterion c) { return c == Criterion::aopt ? "aopt" : "mod"; }

Criterion criterion_from_string(const std::string& s) {
  if (s == "aopt") return Criterion::aopt;
  if (s == "mod") return Criterion::mod;
  throw ContractError("unknown criterion '" + s + "' (expected aopt or mod)");
}

NoiseWeights::NoiseWeights(Vector sigmas_, int n_times_) : sigmas(std::move(sigmas_)), n_times(n_times_) {
  if (sigmas.size() < 1) throw ContractError("noise weights need at least one sensor");
  if (n_times < 1) throw ContractError("noise weights need at least one observation time");
  for (Index i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas(i) > 0.0) || !std::isfinite(sigmas(i))) {
      throw ContractError("noise sigma " + std::to_string(i) + " must be positive and finite");
    }
  }
}

NoiseWeights::NoiseWeights(const ObservationSetup& obs)
    : NoiseWeights(Eigen::Map<const Vector>(obs.sigmas.data(), static_cast<Index>(obs.sigmas.size())),
                   obs.n_times()) {}

Vector NoiseWeights::observation_weights(const Vector& w) const {
  const Index ns = n_sensors();
  if (w.size() != ns) throw ContractError("design has " + std::to_string(w.size()) + " entries, expected " +
                                          std::to_string(ns));
  Vector out(n_obs());
  for (int t = 0; t < n_times; ++t) {
    out.segment(t * ns, ns) = w.array() / sigmas.array().square();
  }
  return out;
}

Vector NoiseWeights::gather(const Vector& per_observation) const {
  const Index ns = n_sensors();
  if (per_observation.size() != n_obs()) throw ContractError("gather: vector length is not n_obs");
  Vector out = Vector::Zero(ns);
  for (int t = 0; t < n_times; ++t) out += per_observation.segment(t * ns, ns);
  return out.array() / sigmas.array().square();
}

Vector ingest_design(const Vector& w, Index n_sensors) {
  if (w.size() != n_sensors) {
    throw ContractError("design has " + std::to_string(w.size()) + " entries, expected " + std::to_string(n_sensors));
  }
  if (!w.allFinite()) throw ContractError("design has non-finite entries");
  const double below = std::max(0.0, -w.minCoeff());
  const double above = std::max(0.0, w.maxCoeff() - 1.0);
  if (std::max(below, above) > 1e-12) {
    std::cerr << "warning: design outside [0,1] by " << std::max(below, above) << "; clamping\n";
  }
  return w.cwiseMax(0.0).cwiseMin(1.0);
}

LinearOperator hm_operator(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w) {
  if (!fcal.euclidean_domain()) throw ContractError("hm_operator: fcal must have a Euclidean domain");
  if (fcal.rows() != noise.n_obs()) throw ContractError("hm_operator: fcal rows do not match the observation count");
  const Vector wv = noise.observation_weights(ingest_design(w, noise.n_sensors()));
  auto map = [fcal, wv](const Matrix& x) -> Matrix {
    return fcal.apply_adjoint_block(wv.asDiagonal() * fcal.apply_block(x));
  };
  return LinearOperator(fcal.cols(), fcal.cols(), map, map, Vector(), fcal.counters());
}

Vector hm_apply(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w, const Vector& v) {
  return hm_operator(fcal, noise, w).apply(v);
}

LinearOperator sensor_block_operator(const LinearOperator& fcal, const NoiseWeights& noise, Index j) {
  if (j < 0 || j >= noise.n_sensors()) throw ContractError("sensor index out of range");
  Vector ej = Vector::Zero(noise.n_sensors());
  ej(j) = 1.0;
  return hm_operator(fcal, noise, ej);
}

PrecomputedS precompute_s(const LinearOperator& fcal, const LinearOperator* z_op, const NoiseWeights& noise,
                          Criterion mode) {
  if (fcal.rows() != noise.n_obs()) throw ContractError("precompute_s: fcal rows do not match the observation count");
  if (mode == Criterion::aopt && z_op == nullptr) throw ContractError("precompute_s: aopt mode needs a Z operator");
  const std::int64_t start = fcal.solve_count();
  const Index n_obs = noise.n_obs();
  Vector per_obs(n_obs);
  constexpr Index kChunk = 64;
  for (Index first = 0; first < n_obs; first += kChunk) {
    const Index width = std::min(kChunk, n_obs - first);
    Matrix units = Matrix::Zero(n_obs, width);
    for (Index c = 0; c < width; ++c) units(first + c, c) = 1.0;
    const Matrix u = fcal.apply_adjoint_block(units);
    const Matrix zu = mode == Criterion::aopt ? z_op->apply_block(u) : u;
    per_obs.segment(first, width) = u.cwiseProduct(zu).colwise().sum().transpose();
  }
  PrecomputedS out;
  out.mode = mode;
  out.s = -noise.gather(per_obs);
  out.pde_solves_spent = fcal.solve_count() - start;
  return out;
}

std::optional<PrecomputedS> load_s_cache(const std::filesystem::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("key").get<std::string>() != key) {
      std::cerr << "notice: s cache " << path.string() << " was built for a different problem; recomputing\n";
      return std::nullopt;
    }
    PrecomputedS s;
    s.mode = criterion_from_string(j.at("mode").get<std::string>());
    const auto values = j.at("s").get<std::vector<double>>();
    s.s = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    s.pde_solves_spent = j.at("pde_solves_spent").get<std::int64_t>();
    return s;
  } catch (const std::exception& e) {
    std::cerr << "notice: unreadable s cache " << path.string() << " (" << e.what() << "); recomputing\n";
    return std::nullopt;
  }
}

void save_s_cache(const std::filesystem::path& path, const std::string& key, const PrecomputedS& s) {
  nlohmann::json j;
  j["key"] = key;
  j["mode"] = to_string(s.mode);
  j["s"] = std::vector<double>(s.s.data(), s.s.data() + s.s.size());
  j["pde_solves_spent"] = s.pde_solves_spent;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write s cache " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json EstimatorReport::to_json() const {
  nlohmann::json j;
  j["criterion"] = to_string(criterion);
  j["method"] = method;
  j["value"] = value;
  j["gradient"] = std::vector<double>(gradient.data(), gradient.data() + gradient.size());
  j["ell"] = ell;
  j["k"] = k;
  j["p"] = p;
  j["q"] = q;
  j["seed"] = seed;
  j["lambda_T"] = std::vector<double>(lambda_T.data(), lambda_T.data() + lambda_T.size());
  j["pde_solves"] = pde_solves;
  j["degenerate"] = degenerate;
  return j;
}

void estimate_from_spectrum(const SpectralInputs& in, const NoiseWeights& noise, const Vector& s, Criterion mode,
                            double& value, Vector& gradient) {
  const Index l = in.d.size();
  if (in.a.cols() != l || in.a.rows() != noise.n_obs()) throw ContractError("spectral core: a has the wrong shape");
  if (s.size() != noise.n_sensors()) throw ContractError("spectral core: s has the wrong length");
  const Matrix ad = in.a * in.d.asDiagonal();
  Vector twice_cross;
  Vector quadratic;
  if (mode == Criterion::aopt) {
    if (in.b.rows() != in.a.rows() || in.b.cols() != l || in.vzv.rows() != l || in.vzv.cols() != l) {
      throw ContractError("spectral core: aopt needs b = fcal Z V and V^T Z V");
    }
    value = -in.d.dot(in.vzv.diagonal());
    twice_cross = 2.0 * ad.cwiseProduct(in.b).rowwise().sum();
    quadratic = (ad * in.vzv).cwiseProduct(ad).rowwise().sum();
  } else {
    value = -in.d.sum();
    twice_cross = 2.0 * ad.cwiseProduct(in.a).rowwise().sum();
    quadratic = ad.cwiseProduct(ad).rowwise().sum();
  }
  gradient = s + noise.gather(twice_cross - quadratic);
  if (!std::isfinite(value) || !gradient.allFinite()) throw NumericalError("criterion estimate is not finite");
}

namespace {

EstimatorReport sketch_report(Criterion mode, const SketchConfig& cfg, const LowRankFactors& f) {
  EstimatorReport r;
  r.criterion = mode;
  r.method = "randomized";
  r.ell = static_cast<int>(f.ell());
  r.k = cfg.k;
  r.p = cfg.p;
  r.q = cfg.q;
  r.seed = cfg.seed;
  r.lambda_T = f.lambda;
  r.degenerate = f.reduced;
  return r;
}

void check_s(const PrecomputedS& s, Criterion mode, const NoiseWeights& noise) {
  if (s.mode != mode) throw ContractError("precomputed s was built for the " + to_string(s.mode) + " criterion");
  if (s.s.size() != noise.n_sensors()) throw ContractError("precomputed s has the wrong length");
}

}  // namespace

EstimatorReport randomized_aopt(const LinearOperator& fcal, const LinearOperator& z_op, const NoiseWeights& noise,
                                const Vector& w, const SketchConfig& cfg, const PrecomputedS& s) {
  check_s(s, Criterion::aopt, noise);
  const std::int64_t start = fcal.solve_count();
  const LinearOperator h = hm_operator(fcal, noise, w);
  const LowRankFactors f = subspace_iteration(h, cfg);

  SpectralInputs in;
  in.a = fcal.apply_block(f.V);
  const Matrix zv = z_op.apply_block(f.V);
  in.b = fcal.apply_block(zv);
  in.vzv = f.V.transpose() * zv;
  in.vzv = 0.5 * (in.vzv + in.vzv.transpose()).eval();
  in.d = f.d;

  EstimatorReport r = sketch_report(Criterion::aopt, cfg, f);
  estimate_from_spectrum(in, noise, s.s, Criterion::aopt, r.value, r.gradient);
  r.pde_solves = fcal.solve_count() - start;
  return r;
}

EstimatorReport randomized_moda(const LinearOperator& fcal, const NoiseWeights& noise, const Vector& w,
                                const SketchConfig& cfg, const PrecomputedS& s) {
  check_s(s, Criterion::mod, noise);
  const std::int64_t start = fcal.solve_count();
  const LinearOperator h = hm_operator(fcal, noise, w);
  const LowRankFactors f = subspace_iteration(h, cfg);

  SpectralInputs in;
  in.a = fcal.apply_block(f.V);
  in.d = f.d;

  EstimatorReport r = sketch_report(Criterion::mod, cfg, f);
  estimate_from_spectrum(in, noise, s.s, Criterion::mod, r.value, r.gradient);
  r.pde_solves = fcal.solve_count() - start;
  return r;
}

}  // namespace oed
