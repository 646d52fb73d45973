#include "oed/app.hpp"

#include "oed/errors.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace oed::app {

using nlohmann::json;

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::design:
      return "design";
    case Experiment::error_study:
      return "error_study";
    case Experiment::bound_study:
      return "bound_study";
    case Experiment::compare_random:
      return "compare_random";
    case Experiment::posterior:
      return "posterior";
  }
  return "design";
}

Experiment experiment_from_string(const std::string& raw) {
  std::string s = raw;
  for (char& c : s) {
    if (c == '-') c = '_';
  }
  for (Experiment e : {Experiment::design, Experiment::error_study, Experiment::bound_study,
                       Experiment::compare_random, Experiment::posterior}) {
    if (to_string(e) == s) return e;
  }
  throw ContractError("unknown experiment '" + raw + "'");
}

std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::randomized:
      return "randomized";
    case EstimatorKind::eigk:
      return "eigk";
    case EstimatorKind::frozen:
      return "frozen";
    case EstimatorKind::exact:
      return "exact";
  }
  return "randomized";
}

EstimatorKind estimator_from_string(const std::string& s) {
  for (EstimatorKind e : {EstimatorKind::randomized, EstimatorKind::eigk, EstimatorKind::frozen, EstimatorKind::exact}) {
    if (to_string(e) == s) return e;
  }
  throw ContractError("unknown estimator '" + s + "'");
}

namespace {

// One JSON object being consumed; remembers which keys were read so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "$" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  void read(const std::string& key, T& target) {
    if (!has(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(at(key), "expected " + expected_name<T>() + ", got " + j_.at(key).dump());
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, at(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(at(item.key()), "unknown key");
    }
  }

 private:
  template <class T>
  static std::string expected_name() {
    if constexpr (std::is_same_v<T, bool>) {
      return "a boolean";
    } else if constexpr (std::is_integral_v<T>) {
      return "an integer";
    } else if constexpr (std::is_floating_point_v<T>) {
      return "a number";
    } else if constexpr (std::is_same_v<T, std::string>) {
      return "a string";
    } else {
      return "an array";
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) throw ConfigError(path, msg);
}

// Integers that must be exact whole numbers in JSON (3.0 is rejected as a float).
template <class Int>
void read_int(Section& s, const std::string& key, Int& target) {
  if (!s.has(key)) return;
  const json& v = s.raw(key);
  require(v.is_number_integer() || v.is_number_unsigned(), s.at(key), "expected an integer, got " + v.dump());
  target = v.get<Int>();
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  Section root(j, "");

  std::string experiment = to_string(cfg.experiment);
  root.read("experiment", experiment);
  try {
    cfg.experiment = experiment_from_string(experiment);
  } catch (const ContractError& e) {
    throw ConfigError("experiment", e.what());
  }
  read_int(root, "seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  root.read("materialize", cfg.materialize);
  read_int(root, "dense_cap", cfg.dense_cap);
  require(cfg.dense_cap > 0, "dense_cap", "must be positive");
  root.read("cache_dir", cfg.cache_dir);

  {
    Section m = root.child("model");
    read_int(m, "nx", cfg.model.grid.nx);
    read_int(m, "ny", cfg.model.grid.ny);
    m.read("kappa", cfg.model.kappa);
    m.read("velocity_amplitude", cfg.model.velocity_amplitude);
    m.read("dt", cfg.model.dt);
    m.read("t_final", cfg.model.t_final);
    m.read("cg_tol", cfg.model.cg_tol);
    read_int(m, "cg_max_iter", cfg.model.cg_max_iter);
    m.finish();
    require(cfg.model.grid.nx >= 4, "model.nx", "must be at least 4");
    require(cfg.model.grid.ny == cfg.model.grid.nx, "model.ny", "must equal model.nx");
    require(cfg.model.kappa > 0.0, "model.kappa", "must be positive");
    require(std::isfinite(cfg.model.velocity_amplitude) && cfg.model.velocity_amplitude >= 0.0,
            "model.velocity_amplitude", "must be finite and nonnegative");
    require(cfg.model.t_final > 0.0, "model.t_final", "must be positive");
    require(cfg.model.dt >= 0.0, "model.dt", "must be nonnegative (0 selects a stable step)");
    require(cfg.model.cg_tol > 0.0 && cfg.model.cg_tol < 1.0, "model.cg_tol", "must lie in (0, 1)");
    require(cfg.model.cg_max_iter >= 1, "model.cg_max_iter", "must be positive");
    if (cfg.model.dt > 0.0) {
      const double speed = max_grid_speed(cfg.model.grid, cfg.model.velocity_amplitude);
      require(cfg.model.dt * speed <= cfg.model.grid.h() * (1.0 + 1e-12), "model.dt",
              "violates the advective stability limit dt <= h / max|v| = " +
                  std::to_string(cfg.model.grid.h() / speed));
    }
  }
  {
    Section p = root.child("prior");
    p.read("theta", cfg.prior.theta);
    p.read("alpha", cfg.prior.alpha);
    p.read("cg_tol", cfg.prior.cg_tol);
    read_int(p, "cg_max_iter", cfg.prior.cg_max_iter);
    p.finish();
    require(cfg.prior.theta > 0.0, "prior.theta", "must be positive");
    require(cfg.prior.alpha > 0.0, "prior.alpha", "must be positive");
    require(cfg.prior.cg_tol > 0.0 && cfg.prior.cg_tol < 1.0, "prior.cg_tol", "must lie in (0, 1)");
    require(cfg.prior.cg_max_iter >= 1, "prior.cg_max_iter", "must be positive");
  }
  {
    Section o = root.child("obs");
    read_int(o, "lattice_per_axis", cfg.obs.lattice_per_axis);
    o.read("nodes", cfg.obs.nodes);
    o.read("obs_times", cfg.obs.obs_times);
    o.read("sigmas", cfg.obs.sigmas);
    o.read("noise_percent", cfg.obs.noise_percent);
    o.finish();
    const int n = cfg.model.grid.n();
    if (cfg.obs.nodes.empty()) {
      require(cfg.obs.lattice_per_axis >= 1 && cfg.obs.lattice_per_axis <= cfg.model.grid.nx - 2,
              "obs.lattice_per_axis", "must lie in [1, nx - 2]");
    }
    std::set<int> distinct;
    for (std::size_t i = 0; i < cfg.obs.nodes.size(); ++i) {
      const int v = cfg.obs.nodes[i];
      require(v >= 0 && v < n, "obs.nodes[" + std::to_string(i) + "]", "node index outside the grid");
      require(distinct.insert(v).second, "obs.nodes[" + std::to_string(i) + "]", "duplicate sensor node");
    }
    require(!cfg.obs.obs_times.empty(), "obs.obs_times", "must not be empty");
    for (std::size_t i = 0; i < cfg.obs.obs_times.size(); ++i) {
      const std::string path = "obs.obs_times[" + std::to_string(i) + "]";
      require(cfg.obs.obs_times[i] > 0.0, path, "must be positive");
      require(cfg.obs.obs_times[i] <= cfg.model.t_final, path, "exceeds model.t_final");
      if (i) require(cfg.obs.obs_times[i] > cfg.obs.obs_times[i - 1], path, "times must increase strictly");
    }
    const std::size_t ns =
        cfg.obs.nodes.empty() ? static_cast<std::size_t>(cfg.obs.lattice_per_axis * cfg.obs.lattice_per_axis)
                              : cfg.obs.nodes.size();
    if (!cfg.obs.sigmas.empty()) {
      require(cfg.obs.sigmas.size() == ns, "obs.sigmas", "needs one entry per sensor (" + std::to_string(ns) + ")");
      for (std::size_t i = 0; i < ns; ++i) {
        require(cfg.obs.sigmas[i] > 0.0, "obs.sigmas[" + std::to_string(i) + "]", "must be positive");
      }
    }
    require(cfg.obs.noise_percent > 0.0, "obs.noise_percent", "must be positive");
  }
  {
    Section t = root.child("truth");
    if (t.has("centers")) {
      const json& c = t.raw("centers");
      require(c.is_array() && !c.empty(), "truth.centers", "expected a non-empty array of [x, y] pairs");
      cfg.truth.centers.clear();
      for (std::size_t i = 0; i < c.size(); ++i) {
        const std::string path = "truth.centers[" + std::to_string(i) + "]";
        require(c[i].is_array() && c[i].size() == 2 && c[i][0].is_number() && c[i][1].is_number(), path,
                "expected [x, y]");
        cfg.truth.centers.push_back({c[i][0].get<double>(), c[i][1].get<double>()});
      }
    }
    t.read("width", cfg.truth.width);
    read_int(t, "data_seed", cfg.truth.data_seed);
    t.finish();
    require(cfg.truth.width > 0.0, "truth.width", "must be positive");
  }
  {
    Section s = root.child("sketch");
    read_int(s, "k", cfg.sketch.k);
    read_int(s, "p", cfg.sketch.p);
    read_int(s, "q", cfg.sketch.q);
    s.read("stabilize", cfg.sketch.stabilize);
    s.finish();
    require(cfg.sketch.k >= 1, "sketch.k", "must be at least 1");
    require(cfg.sketch.p >= 2, "sketch.p", "must be at least 2");
    require(cfg.sketch.q >= 1, "sketch.q", "must be at least 1");
    require(cfg.sketch.ell() <= cfg.model.grid.n(), "sketch.k", "k + p exceeds the parameter dimension");
  }
  {
    std::string criterion = to_string(cfg.criterion);
    root.read("criterion", criterion);
    try {
      cfg.criterion = criterion_from_string(criterion);
    } catch (const Error& e) {
      throw ConfigError("criterion", e.what());
    }
    std::string estimator = to_string(cfg.estimator);
    root.read("estimator", estimator);
    try {
      cfg.estimator = estimator_from_string(estimator);
    } catch (const Error& e) {
      throw ConfigError("estimator", e.what());
    }
  }
  {
    Section p = root.child("penalty");
    std::string kind = to_string(cfg.penalty.kind);
    p.read("kind", kind);
    try {
      cfg.penalty.kind = penalty_kind_from_string(kind);
    } catch (const Error& e) {
      throw ConfigError("penalty.kind", e.what());
    }
    p.read("gamma", cfg.penalty.gamma);
    p.read("epsilon", cfg.penalty.epsilon);
    p.finish();
    require(std::isfinite(cfg.penalty.gamma) && cfg.penalty.gamma >= 0.0, "penalty.gamma", "must be >= 0");
    require(cfg.penalty.epsilon > 0.0, "penalty.epsilon", "must be positive");
  }
  {
    Section o = root.child("optimizer");
    read_int(o, "m_max", cfg.optimizer.m_max);
    o.read("outer_tol", cfg.optimizer.outer_tol);
    o.read("active_threshold", cfg.optimizer.active_threshold);
    Section in = o.child("inner");
    read_int(in, "max_iter", cfg.optimizer.inner.max_iter);
    in.read("grad_tol", cfg.optimizer.inner.grad_tol);
    read_int(in, "memory", cfg.optimizer.inner.memory);
    read_int(in, "ls_max", cfg.optimizer.inner.ls_max);
    in.finish();
    o.finish();
    require(cfg.optimizer.m_max >= 1, "optimizer.m_max", "must be at least 1");
    require(cfg.optimizer.outer_tol > 0.0, "optimizer.outer_tol", "must be positive");
    require(cfg.optimizer.active_threshold > 0.0 && cfg.optimizer.active_threshold < 1.0,
            "optimizer.active_threshold", "must lie in (0, 1)");
    require(cfg.optimizer.inner.max_iter >= 1, "optimizer.inner.max_iter", "must be positive");
    require(cfg.optimizer.inner.grad_tol > 0.0, "optimizer.inner.grad_tol", "must be positive");
    require(cfg.optimizer.inner.memory >= 1, "optimizer.inner.memory", "must be positive");
    require(cfg.optimizer.inner.ls_max >= 1, "optimizer.inner.ls_max", "must be positive");
  }
  root.read("w0", cfg.w0);
  for (std::size_t i = 0; i < cfg.w0.size(); ++i) {
    require(cfg.w0[i] >= 0.0 && cfg.w0[i] <= 1.0, "w0[" + std::to_string(i) + "]", "must lie in [0, 1]");
  }
  {
    Section e = root.child("error_study");
    e.read("ells", cfg.error_study.ells);
    read_int(e, "trials", cfg.error_study.trials);
    e.finish();
    require(cfg.error_study.trials >= 1, "error_study.trials", "must be positive");
    for (std::size_t i = 0; i < cfg.error_study.ells.size(); ++i) {
      require(cfg.error_study.ells[i] >= 3, "error_study.ells[" + std::to_string(i) + "]", "must be at least 3");
    }
  }
  {
    Section b = root.child("bound_study");
    b.read("ks", cfg.bound_study.ks);
    b.read("ps", cfg.bound_study.ps);
    b.read("qs", cfg.bound_study.qs);
    read_int(b, "trials", cfg.bound_study.trials);
    b.finish();
    require(!cfg.bound_study.ks.empty(), "bound_study.ks", "must not be empty");
    require(!cfg.bound_study.ps.empty(), "bound_study.ps", "must not be empty");
    require(!cfg.bound_study.qs.empty(), "bound_study.qs", "must not be empty");
    for (int k : cfg.bound_study.ks) require(k >= 1, "bound_study.ks", "entries must be at least 1");
    for (int p : cfg.bound_study.ps) require(p >= 2, "bound_study.ps", "entries must be at least 2");
    for (int q : cfg.bound_study.qs) require(q >= 1, "bound_study.qs", "entries must be at least 1");
    require(cfg.bound_study.trials >= 1, "bound_study.trials", "must be positive");
  }
  {
    Section c = root.child("compare_random");
    c.read("gammas", cfg.compare.gammas);
    read_int(c, "n_random", cfg.compare.n_random);
    read_int(c, "seed", cfg.compare.seed);
    c.finish();
    require(!cfg.compare.gammas.empty(), "compare_random.gammas", "must not be empty");
    for (double g : cfg.compare.gammas) require(g >= 0.0, "compare_random.gammas", "entries must be >= 0");
    require(cfg.compare.n_random >= 1, "compare_random.n_random", "must be positive");
  }
  {
    Section p = root.child("posterior");
    p.read("weights", cfg.posterior.weights);
    p.finish();
    for (std::size_t i = 0; i < cfg.posterior.weights.size(); ++i) {
      const double v = cfg.posterior.weights[i];
      require(v >= 0.0 && v <= 1.0, "posterior.weights[" + std::to_string(i) + "]", "must lie in [0, 1]");
    }
  }
  root.finish();

  // The model constructor checks step alignment and sensor placement.
  try {
    ObservationSetup obs;
    obs.sensor_nodes = cfg.obs.nodes.empty() ? sensor_lattice(cfg.model.grid, cfg.obs.lattice_per_axis)
                                             : cfg.obs.nodes;
    obs.obs_times = cfg.obs.obs_times;
    obs.sigmas.assign(obs.sensor_nodes.size(), 1.0);
    const ModelProblem probe(cfg.model, cfg.prior, obs);
    const auto ns = static_cast<std::size_t>(probe.observations().n_sensors());
    if (!cfg.w0.empty()) require(cfg.w0.size() == ns, "w0", "needs one entry per sensor");
    if (!cfg.posterior.weights.empty()) {
      require(cfg.posterior.weights.size() == ns, "posterior.weights", "needs one entry per sensor");
    }
  } catch (const ContractError& e) {
    throw ConfigError("model", e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& cfg) {
  json j;
  j["experiment"] = to_string(cfg.experiment);
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["materialize"] = cfg.materialize;
  j["dense_cap"] = cfg.dense_cap;
  j["cache_dir"] = cfg.cache_dir;
  j["model"] = {{"nx", cfg.model.grid.nx},
                {"ny", cfg.model.grid.ny},
                {"kappa", cfg.model.kappa},
                {"velocity_amplitude", cfg.model.velocity_amplitude},
                {"dt", cfg.model.dt},
                {"t_final", cfg.model.t_final},
                {"cg_tol", cfg.model.cg_tol},
                {"cg_max_iter", cfg.model.cg_max_iter}};
  j["prior"] = {{"theta", cfg.prior.theta},
                {"alpha", cfg.prior.alpha},
                {"cg_tol", cfg.prior.cg_tol},
                {"cg_max_iter", cfg.prior.cg_max_iter}};
  j["obs"] = {{"lattice_per_axis", cfg.obs.lattice_per_axis},
              {"nodes", cfg.obs.nodes},
              {"obs_times", cfg.obs.obs_times},
              {"sigmas", cfg.obs.sigmas},
              {"noise_percent", cfg.obs.noise_percent}};
  json centers = json::array();
  for (const auto& c : cfg.truth.centers) centers.push_back({c[0], c[1]});
  j["truth"] = {{"centers", centers}, {"width", cfg.truth.width}, {"data_seed", cfg.truth.data_seed}};
  j["sketch"] = {{"k", cfg.sketch.k}, {"p", cfg.sketch.p}, {"q", cfg.sketch.q}, {"stabilize", cfg.sketch.stabilize}};
  j["criterion"] = to_string(cfg.criterion);
  j["estimator"] = to_string(cfg.estimator);
  j["penalty"] = {{"kind", to_string(cfg.penalty.kind)},
                  {"gamma", cfg.penalty.gamma},
                  {"epsilon", cfg.penalty.epsilon}};
  j["optimizer"] = {{"m_max", cfg.optimizer.m_max},
                    {"outer_tol", cfg.optimizer.outer_tol},
                    {"active_threshold", cfg.optimizer.active_threshold},
                    {"inner",
                     {{"max_iter", cfg.optimizer.inner.max_iter},
                      {"grad_tol", cfg.optimizer.inner.grad_tol},
                      {"memory", cfg.optimizer.inner.memory},
                      {"ls_max", cfg.optimizer.inner.ls_max}}}};
  j["w0"] = cfg.w0;
  j["error_study"] = {{"ells", cfg.error_study.ells}, {"trials", cfg.error_study.trials}};
  j["bound_study"] = {{"ks", cfg.bound_study.ks},
                      {"ps", cfg.bound_study.ps},
                      {"qs", cfg.bound_study.qs},
                      {"trials", cfg.bound_study.trials}};
  j["compare_random"] = {{"gammas", cfg.compare.gammas},
                         {"n_random", cfg.compare.n_random},
                         {"seed", cfg.compare.seed}};
  j["posterior"] = {{"weights", cfg.posterior.weights}};
  return j;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
  return out.str();
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return sha256_hex(j.dump()).substr(0, 16);
}

}  // namespace oed::app
