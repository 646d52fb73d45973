#include "oed/app.hpp"

#include "oed/errors.hpp"
#include "oed/parallel.hpp"
#include "oed/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>

namespace oed::app {

using nlohmann::json;

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

ObservationSetup observation_setup(const RunConfig& cfg, std::vector<double> sigmas) {
  ObservationSetup obs;
  obs.sensor_nodes =
      cfg.obs.nodes.empty() ? sensor_lattice(cfg.model.grid, cfg.obs.lattice_per_axis) : cfg.obs.nodes;
  obs.obs_times = cfg.obs.obs_times;
  obs.sigmas = sigmas.empty() ? std::vector<double>(obs.sensor_nodes.size(), 1.0) : std::move(sigmas);
  return obs;
}

ModelProblem assemble_problem(const RunConfig& cfg, const Vector& truth, Vector& clean) {
  if (!cfg.obs.sigmas.empty()) {
    ModelProblem problem(cfg.model, cfg.prior, observation_setup(cfg, cfg.obs.sigmas));
    clean = problem.forward_apply(truth);
    return problem;
  }
  const ModelProblem provisional(cfg.model, cfg.prior, observation_setup(cfg, {}));
  clean = provisional.forward_apply(truth);
  const double peak = clean.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw ConfigError("obs.noise_percent", "noise-free data vanish; give obs.sigmas explicitly");
  const double sigma = 0.01 * cfg.obs.noise_percent * peak;
  const auto ns = provisional.observations().sensor_nodes.size();
  ModelProblem problem(cfg.model, cfg.prior, observation_setup(cfg, std::vector<double>(ns, sigma)));
  problem.pde_counter()->add(provisional.pde_solves());
  return problem;
}

struct Parts {
  std::optional<ModelProblem> problem;
  Vector truth;
  Vector clean;
  LinearOperator fcal;
  LinearOperator z;
  CounterPtr charged;
};

Parts assemble(const RunConfig& cfg) {
  Vector truth = gaussian_bumps(cfg.model.grid, cfg.truth);
  Vector clean;
  ModelProblem problem = assemble_problem(cfg, truth, clean);
  LinearOperator fcal = build_fcal(problem);
  LinearOperator z = problem.z_operator();
  auto charged_solves = std::make_shared<SolveCounter>();
  if (cfg.materialize) {
    Matrix f = materialize_dense_cheapest(fcal, cfg.dense_cap);
    fcal = charged(dense_operator(std::move(f)), charged_solves);
    Matrix zd = materialize_dense(z, cfg.dense_cap);
    z = dense_operator(0.5 * (zd + zd.transpose()));
  }
  return Parts{std::move(problem), std::move(truth), std::move(clean), std::move(fcal), std::move(z),
               std::move(charged_solves)};
}

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Vector initial_design(const RunConfig& cfg, Index ns) {
  if (cfg.w0.empty()) return Vector::Ones(ns);
  return Eigen::Map<const Vector>(cfg.w0.data(), static_cast<Index>(cfg.w0.size()));
}

int numerical_rank(const Vector& lambda) {
  if (lambda.size() == 0 || !(lambda(0) > 0.0)) return 0;
  return static_cast<int>((lambda.array() > 1e-12 * lambda(0)).count());
}

double relative(double exact, double approx) { return std::abs(exact - approx) / std::abs(exact); }

double relative(const Vector& exact, const Vector& approx) { return (exact - approx).norm() / exact.norm(); }

Vector binarize(const Vector& w, double threshold) {
  return (w.array() > threshold).cast<double>().matrix();
}

ExactOracle make_oracle(Workspace& ws, const RunConfig& cfg, OraclePrecision precision) {
  return ExactOracle(ws.fcal, &ws.z, ws.noise, precision, cfg.dense_cap);
}

void run_design(Workspace& ws, const RunConfig& cfg, ExperimentResult& result) {
  CriterionFn fn = make_criterion(ws, cfg, cfg.criterion);
  const Vector w0 = initial_design(cfg, ws.noise.n_sensors());
  OptRun run = mm_loop(fn, cfg.penalty, cfg.optimizer, w0, [&result](const OptRun& r) {
    result.run = r;
    result.tables = {r.weights_table(), r.iterates_table()};
  });
  result.summary["criterion"] = to_string(cfg.criterion);
  result.summary["estimator"] = to_string(cfg.estimator);
  result.summary["run"] = run.to_json();
  try {
    const ExactOracle oracle = make_oracle(ws, cfg, OraclePrecision::extended);
    const ExactValues ex = oracle.evaluate(run.final_w);
    const ExactValues bin = oracle.evaluate(binarize(run.final_w, cfg.optimizer.active_threshold));
    result.summary["exact"] = {{"phi_aopt", ex.phi_aopt},
                               {"phi_mod", ex.phi_mod},
                               {"phi_aopt_binarized", bin.phi_aopt},
                               {"phi_mod_binarized", bin.phi_mod}};
  } catch (const SizeError& e) {
    result.summary["exact"] = {{"skipped", e.what()}};
  }
  result.run = run;
  result.tables = {run.weights_table(), run.iterates_table()};
}

void run_error_study(Workspace& ws, const RunConfig& cfg, ExperimentResult& result) {
  const ExactOracle oracle = make_oracle(ws, cfg, OraclePrecision::extended);
  const Vector w = Vector::Ones(ws.noise.n_sensors());
  const ExactValues ex = oracle.evaluate(w);
  const Vector lambda = oracle.spectrum(w);
  const int rank = numerical_rank(lambda);
  std::vector<int> ells = cfg.error_study.ells;
  if (ells.empty()) {
    for (int div : {8, 4, 2, 1}) ells.push_back(std::max(3, rank / div));
  }
  const PrecomputedS& sa = ws.s(Criterion::aopt);
  const PrecomputedS& sm = ws.s(Criterion::mod);

  CsvTable curves{"error_curves", {"ell", "k", "p", "e1", "e2", "e3", "e4"}, {}};
  CsvTable trials{"error_trials", {"ell", "trial", "seed", "e1", "e2", "e3", "e4"}, {}};
  json cost = json::array();
  for (int ell : ells) {
    if (ell > ws.fcal.cols()) throw ContractError("error study: ell = " + std::to_string(ell) + " exceeds n");
    SketchConfig base = cfg.sketch;
    base.p = std::min(cfg.sketch.p, ell - 1);
    base.k = ell - base.p;
    const auto n_trials = static_cast<std::size_t>(cfg.error_study.trials);
    std::vector<std::array<double, 4>> errs(n_trials);
    std::vector<std::uint64_t> seeds(n_trials);
    std::vector<std::array<std::int64_t, 2>> solves(n_trials);
    parallel_for(n_trials, [&](std::size_t t) {
      SketchConfig sc = base;
      sc.seed = rng::split(cfg.seed, t);
      seeds[t] = sc.seed;
      const EstimatorReport ra = randomized_aopt(ws.fcal, ws.z, ws.noise, w, sc, sa);
      const EstimatorReport rm = randomized_moda(ws.fcal, ws.noise, w, sc, sm);
      errs[t] = {relative(ex.phi_aopt, ra.value), relative(ex.grad_aopt, ra.gradient),
                 relative(ex.phi_mod, rm.value), relative(ex.grad_mod, rm.gradient)};
      solves[t] = {ra.pde_solves, rm.pde_solves};
    });
    std::array<double, 4> mean{};
    for (std::size_t t = 0; t < n_trials; ++t) {
      for (int i = 0; i < 4; ++i) mean[i] += errs[t][i] / static_cast<double>(n_trials);
      trials.add_row({std::int64_t{ell}, static_cast<std::int64_t>(t), std::to_string(seeds[t]), errs[t][0],
                      errs[t][1], errs[t][2], errs[t][3]});
    }
    curves.add_row({std::int64_t{ell}, std::int64_t{base.k}, std::int64_t{base.p}, mean[0], mean[1], mean[2], mean[3]});
    cost.push_back({{"ell", ell}, {"pde_solves_aopt", solves[0][0]}, {"pde_solves_mod", solves[0][1]}});
  }
  CsvTable spectrum{"spectrum", {"index", "eigenvalue"}, {}};
  for (Index i = 0; i < lambda.size(); ++i) spectrum.add_row({static_cast<std::int64_t>(i + 1), lambda(i)});
  result.summary["rank"] = rank;
  result.summary["phi_aopt"] = ex.phi_aopt;
  result.summary["phi_mod"] = ex.phi_mod;
  result.summary["ells"] = ells;
  result.summary["cost_per_evaluation"] = cost;
  result.summary["precompute_pde_solves"] = {{"aopt", sa.pde_solves_spent}, {"mod", sm.pde_solves_spent}};
  result.tables = {curves, trials, spectrum};
}

void run_bound_study(Workspace& ws, const RunConfig& cfg, ExperimentResult& result) {
  const ExactOracle oracle = make_oracle(ws, cfg, OraclePrecision::extended);
  const Vector w = Vector::Ones(ws.noise.n_sensors());
  const ExactValues ex = oracle.evaluate(w);
  const Vector lambda = oracle.spectrum(w);
  const double z_norm = operator_norm(ws.z, 1e-12, 2000, rng::split(cfg.seed, 0x2e))
                            .value;
  const PrecomputedS& sa = ws.s(Criterion::aopt);
  const PrecomputedS& sm = ws.s(Criterion::mod);

  CsvTable table{"bounds",
                 {"k", "p", "q", "r", "gamma_k", "C", "bound_aopt", "mean_error_aopt", "bound_mod", "mean_error_mod",
                  "holds_aopt", "holds_mod"},
                 {}};
  json skipped = json::array();
  for (int k : cfg.bound_study.ks) {
    for (int p : cfg.bound_study.ps) {
      for (int q : cfg.bound_study.qs) {
        BoundReport ba;
        BoundReport bm;
        try {
          ba = theorem_bound(lambda, k, p, q, z_norm, Criterion::aopt);
          bm = theorem_bound(lambda, k, p, q, z_norm, Criterion::mod);
        } catch (const Error& e) {
          skipped.push_back({{"k", k}, {"p", p}, {"q", q}, {"reason", e.what()}});
          continue;
        }
        const auto n_trials = static_cast<std::size_t>(cfg.bound_study.trials);
        std::vector<double> ea(n_trials);
        std::vector<double> em(n_trials);
        parallel_for(n_trials, [&](std::size_t t) {
          SketchConfig sc;
          sc.k = k;
          sc.p = p;
          sc.q = q;
          sc.stabilize = cfg.sketch.stabilize;
          sc.seed = rng::split(cfg.seed, t);
          ea[t] = std::abs(ex.phi_aopt - randomized_aopt(ws.fcal, ws.z, ws.noise, w, sc, sa).value);
          em[t] = std::abs(ex.phi_mod - randomized_moda(ws.fcal, ws.noise, w, sc, sm).value);
        });
        const double mean_a = std::accumulate(ea.begin(), ea.end(), 0.0) / static_cast<double>(n_trials);
        const double mean_m = std::accumulate(em.begin(), em.end(), 0.0) / static_cast<double>(n_trials);
        table.add_row({std::int64_t{k}, std::int64_t{p}, std::int64_t{q}, std::int64_t{ba.r}, ba.gamma_k, ba.C,
                       ba.bound_value, mean_a, bm.bound_value, mean_m,
                       std::int64_t{mean_a <= ba.bound_value ? 1 : 0}, std::int64_t{mean_m <= bm.bound_value ? 1 : 0}});
      }
    }
  }
  result.summary["z_norm"] = z_norm;
  result.summary["phi_aopt"] = ex.phi_aopt;
  result.summary["phi_mod"] = ex.phi_mod;
  result.summary["skipped"] = skipped;
  result.tables = {table};
}

std::vector<Index> random_subset(Index n, Index size, rng::Stream& stream) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < size; ++i) {
    const auto j = i + static_cast<Index>(stream.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(size));
  std::sort(idx.begin(), idx.end());
  return idx;
}

void run_compare_random(Workspace& ws, const RunConfig& cfg, ExperimentResult& result) {
  const ExactOracle oracle = make_oracle(ws, cfg, OraclePrecision::extended);
  CriterionFn fn = make_criterion(ws, cfg, cfg.criterion);
  const Index ns = ws.noise.n_sensors();
  const Vector w0 = initial_design(cfg, ns);
  CsvTable table{"compare", {"gamma", "design", "index", "n_active", "phi_aopt"}, {}};
  json per_gamma = json::array();
  for (std::size_t g = 0; g < cfg.compare.gammas.size(); ++g) {
    PenaltyConfig penalty = cfg.penalty;
    penalty.gamma = cfg.compare.gammas[g];
    const OptRun run = mm_loop(fn, penalty, cfg.optimizer, w0);
    const Vector chosen = binarize(run.final_w, cfg.optimizer.active_threshold);
    const double phi_opt = oracle.evaluate(chosen).phi_aopt;
    const double phi_relaxed = oracle.evaluate(run.final_w).phi_aopt;
    table.add_row({penalty.gamma, std::string("optimal"), std::int64_t{0}, std::int64_t{run.n_active}, phi_opt});
    rng::Stream stream(rng::split(cfg.compare.seed, g));
    double best_random = std::numeric_limits<double>::infinity();
    for (int r = 0; r < cfg.compare.n_random; ++r) {
      Vector w = Vector::Zero(ns);
      for (Index i : random_subset(ns, run.n_active, stream)) w(i) = 1.0;
      const double phi = oracle.evaluate(w).phi_aopt;
      best_random = std::min(best_random, phi);
      table.add_row({penalty.gamma, std::string("random"), std::int64_t{r + 1}, std::int64_t{run.n_active}, phi});
    }
    per_gamma.push_back({{"gamma", penalty.gamma},
                         {"n_active", run.n_active},
                         {"binariness", run.binariness},
                         {"phi_aopt_optimal", phi_opt},
                         {"phi_aopt_relaxed", phi_relaxed},
                         {"phi_aopt_best_random", best_random},
                         {"optimal_beats_random", phi_opt <= best_random},
                         {"final_w", to_std(run.final_w)}});
  }
  result.summary["criterion"] = to_string(cfg.criterion);
  result.summary["estimator"] = to_string(cfg.estimator);
  result.summary["comparisons"] = per_gamma;
  result.tables = {table};
}

void run_posterior(Workspace& ws, const RunConfig& cfg, ExperimentResult& result) {
  const ModelProblem& problem = *ws.problem;
  const Index ns = ws.noise.n_sensors();
  const Vector w = cfg.posterior.weights.empty()
                       ? Vector::Ones(ns)
                       : Vector(Eigen::Map<const Vector>(cfg.posterior.weights.data(), ns));
  const Matrix f = materialize_dense_by_rows(problem.forward_operator(), cfg.dense_cap);
  const Matrix s = materialize_dense(problem.prior_sqrt_operator(), cfg.dense_cap);
  const Matrix prior_cov = s * s.transpose();

  // Observation-space form of the posterior with weighted noise precision.
  const Vector root = ws.noise.observation_weights(w).cwiseSqrt();
  const Matrix rf = root.asDiagonal() * f;
  const Matrix rfp = rf * prior_cov;
  Matrix system = rfp * rf.transpose();
  system = 0.5 * (system + system.transpose()).eval();
  system.diagonal().array() += 1.0;
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior: observation-space system is not SPD");
  const Vector map = rfp.transpose() * llt.solve(root.cwiseProduct(ws.data));
  const Matrix y = llt.matrixL().solve(rfp);
  const Vector post_var = prior_cov.diagonal() - y.colwise().squaredNorm().transpose();
  if (post_var.minCoeff() < -1e-12 * prior_cov.diagonal().maxCoeff()) {
    throw NumericalError("posterior: negative pointwise variance");
  }

  const Grid2D& grid = problem.grid();
  CsvTable fields{"fields", {"node", "x", "y", "truth", "map", "prior_std", "post_std"}, {}};
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const int node = grid.index(i, j);
      fields.add_row({std::int64_t{node}, grid.x(i), grid.y(j), ws.truth(node), map(node),
                      std::sqrt(prior_cov(node, node)), std::sqrt(std::max(0.0, post_var(node)))});
    }
  }
  CsvTable sensors{"sensors", {"sensor", "node", "x", "y", "weight"}, {}};
  const auto& nodes = problem.observations().sensor_nodes;
  for (Index i = 0; i < ns; ++i) {
    const int node = nodes[static_cast<std::size_t>(i)];
    sensors.add_row({static_cast<std::int64_t>(i), std::int64_t{node}, grid.x(node % grid.nx),
                     grid.y(node / grid.nx), w(i)});
  }
  const double h2 = grid.h() * grid.h();
  result.summary["relative_error"] = (map - ws.truth).norm() / ws.truth.norm();
  result.summary["mean_prior_variance"] = prior_cov.diagonal().mean();
  result.summary["mean_posterior_variance"] = post_var.mean();
  result.summary["mass_weighted_trace_change"] = h2 * (post_var.sum() - prior_cov.diagonal().sum());
  result.summary["noise_sigma"] = to_std(ws.noise.sigmas);
  result.tables = {fields, sensors};
}

}  // namespace

Vector gaussian_bumps(const Grid2D& grid, const TruthConfig& truth) {
  Vector m = Vector::Zero(grid.n());
  const double two_var = 2.0 * truth.width * truth.width;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      double v = 0.0;
      for (const auto& c : truth.centers) {
        const double dx = grid.x(i) - c[0];
        const double dy = grid.y(j) - c[1];
        v += std::exp(-(dx * dx + dy * dy) / two_var);
      }
      m(grid.index(i, j)) = v;
    }
  }
  return m;
}

Workspace::Workspace(const RunConfig& cfg) : fcal(identity_operator(1)), z(identity_operator(1)) {
  Parts parts = assemble(cfg);
  problem = std::move(parts.problem);
  truth = std::move(parts.truth);
  clean_data = std::move(parts.clean);
  fcal = std::move(parts.fcal);
  z = std::move(parts.z);
  charged_solves = std::move(parts.charged);
  noise = NoiseWeights(problem->observations());
  data = clean_data;
  const Vector xi = rng::gaussian_vector(clean_data.size(), cfg.truth.data_seed);
  const Index ns = noise.n_sensors();
  for (Index k = 0; k < data.size(); ++k) data(k) += noise.sigmas(k % ns) * xi(k);

  if (!cfg.cache_dir.empty()) {
    cache_dir_ = cfg.cache_dir;
    json key = to_json(cfg);
    json problem_key = {{"model", key["model"]}, {"prior", key["prior"]}, {"obs", key["obs"]},
                        {"truth", key["truth"]}, {"materialize", key["materialize"]}};
    cache_key_ = sha256_hex(problem_key.dump()).substr(0, 16);
  }
}

std::int64_t Workspace::pde_solves() const { return problem->pde_solves() + charged_solves->value(); }

const PrecomputedS& Workspace::s(Criterion mode) {
  std::optional<PrecomputedS>& slot = mode == Criterion::aopt ? s_aopt_ : s_mod_;
  if (slot) return *slot;
  std::filesystem::path file;
  if (!cache_dir_.empty()) {
    file = cache_dir_ / ("s_" + to_string(mode) + "_" + cache_key_ + ".json");
    if (auto cached = load_s_cache(file, cache_key_)) {
      slot = std::move(cached);
      return *slot;
    }
  }
  slot = precompute_s(fcal, mode == Criterion::aopt ? &z : nullptr, noise, mode);
  if (!file.empty()) {
    std::filesystem::create_directories(cache_dir_);
    save_s_cache(file, cache_key_, *slot);
  }
  return *slot;
}

CriterionFn make_criterion(Workspace& ws, const RunConfig& cfg, Criterion mode) {
  auto pick = [mode](double a, const Vector& ga, double m, const Vector& gm) {
    return mode == Criterion::aopt ? Evaluation{a, ga} : Evaluation{m, gm};
  };
  switch (cfg.estimator) {
    case EstimatorKind::randomized: {
      const PrecomputedS s = ws.s(mode);
      SketchConfig sketch = cfg.sketch;
      sketch.seed = cfg.seed;
      LinearOperator fcal = ws.fcal;
      LinearOperator z = ws.z;
      NoiseWeights noise = ws.noise;
      return [=](const Vector& w) {
        const EstimatorReport r = mode == Criterion::aopt ? randomized_aopt(fcal, z, noise, w, sketch, s)
                                                          : randomized_moda(fcal, noise, w, sketch, s);
        return Evaluation{r.value, r.gradient};
      };
    }
    case EstimatorKind::eigk: {
      const PrecomputedS s = ws.s(mode);
      LinearOperator fcal = ws.fcal;
      LinearOperator z = ws.z;
      NoiseWeights noise = ws.noise;
      const int k = cfg.sketch.k;
      return [=](const Vector& w) {
        const EstimatorReport r = eigk_estimate(fcal, &z, noise, w, k, s, mode);
        return Evaluation{r.value, r.gradient};
      };
    }
    case EstimatorKind::frozen: {
      auto frozen = std::make_shared<const FrozenSvd>(ws.fcal, &ws.z, cfg.sketch.k, ws.noise, cfg.dense_cap);
      return [frozen, mode](const Vector& w) {
        const EstimatorReport r = frozen->evaluate(w, mode);
        return Evaluation{r.value, r.gradient};
      };
    }
    case EstimatorKind::exact: {
      auto oracle =
          std::make_shared<const ExactOracle>(ws.fcal, &ws.z, ws.noise, OraclePrecision::standard, cfg.dense_cap);
      return [oracle, pick](const Vector& w) {
        const ExactValues e = oracle->evaluate(w);
        return pick(e.phi_aopt, e.grad_aopt, e.phi_mod, e.grad_mod);
      };
    }
  }
  throw ContractError("unknown estimator");
}

ExperimentResult run_experiment(const RunConfig& cfg, const std::filesystem::path* flush_dir) {
  ExperimentResult result;
  result.kind = cfg.experiment;
  result.config_hash = config_hash(cfg);
  result.seed = cfg.seed;
  result.timestamp = iso_timestamp();
  result.summary["config"] = to_json(cfg);
  std::optional<Workspace> ws;
  try {
    ws.emplace(cfg);
    switch (cfg.experiment) {
      case Experiment::design:
        run_design(*ws, cfg, result);
        break;
      case Experiment::error_study:
        run_error_study(*ws, cfg, result);
        break;
      case Experiment::bound_study:
        run_bound_study(*ws, cfg, result);
        break;
      case Experiment::compare_random:
        run_compare_random(*ws, cfg, result);
        break;
      case Experiment::posterior:
        run_posterior(*ws, cfg, result);
        break;
    }
  } catch (const std::exception& e) {
    if (ws) result.pde_solves = ws->pde_solves();
    result.summary["status"] = "failed";
    result.summary["error"] = to_string(cfg.experiment) + ": " + e.what();
    if (flush_dir) {
      try {
        write_outputs(result, *flush_dir);
      } catch (const std::exception&) {
      }
    }
    throw;
  }
  result.pde_solves = ws->pde_solves();
  result.summary["status"] = "ok";
  result.summary["pde_solves_model"] = ws->problem->pde_solves();
  result.summary["pde_solves_charged"] = ws->charged_solves->value();
  result.summary["prior_solves"] = ws->problem->prior_solves();
  return result;
}

json write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::string> files;
  const std::vector<std::string> stamp{"config_hash: " + result.config_hash};
  for (const CsvTable& t : result.tables) {
    t.write(dir / (t.name + ".csv"), stamp);
    files.push_back(t.name + ".csv");
  }
  json summary = result.summary;
  summary["provenance"] = {{"experiment", to_string(result.kind)},
                           {"config_hash", result.config_hash},
                           {"seed", result.seed},
                           {"timestamp", result.timestamp},
                           {"pde_solves", result.pde_solves}};
  {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "summary.json").string());
    out << summary.dump(2) << '\n';
    files.push_back("summary.json");
  }
  std::sort(files.begin(), files.end());
  json manifest;
  manifest["config_hash"] = result.config_hash;
  manifest["files"] = json::array();
  for (const auto& name : files) {
    manifest["files"].push_back({{"name", name},
                                 {"sha256", file_sha256(dir / name)},
                                 {"bytes", std::filesystem::file_size(dir / name)}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace oed::app
