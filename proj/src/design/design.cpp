#include "oed/design.hpp"

#include "oed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace oed {

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::p_epsilon:
      return "p_epsilon";
    case PenaltyKind::arctan:
      return "arctan";
    case PenaltyKind::l1:
      return "l1";
  }
  return "p_epsilon";
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
  if (s == "p_epsilon") return PenaltyKind::p_epsilon;
  if (s == "arctan") return PenaltyKind::arctan;
  if (s == "l1") return PenaltyKind::l1;
  throw ContractError("unknown penalty kind '" + s + "'");
}

void PenaltyConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ContractError("penalty gamma must be a finite value >= 0");
  if (kind != PenaltyKind::l1 && !(epsilon > 0.0)) throw ContractError("penalty epsilon must be positive");
}

void OptimizerConfig::validate() const {
  if (m_max < 1) throw ContractError("optimizer m_max must be at least 1");
  if (!(outer_tol > 0.0)) throw ContractError("optimizer outer_tol must be positive");
  if (inner.max_iter < 1 || inner.memory < 1 || inner.ls_max < 1) {
    throw ContractError("inner solver limits must be positive");
  }
  if (!(inner.grad_tol > 0.0)) throw ContractError("inner grad_tol must be positive");
  if (!(active_threshold > 0.0 && active_threshold < 1.0)) {
    throw ContractError("active_threshold must lie in (0, 1)");
  }
}

PenaltyValue penalty_eval(const Vector& w, const PenaltyConfig& cfg) {
  const double eps = cfg.epsilon;
  PenaltyValue out;
  out.gradient.resize(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    const double x = w(i);
    switch (cfg.kind) {
      case PenaltyKind::p_epsilon:
        out.value += x / (x + eps);
        out.gradient(i) = eps / ((x + eps) * (x + eps));
        break;
      case PenaltyKind::arctan:
        out.value += std::atan(x / eps);
        out.gradient(i) = eps / (x * x + eps * eps);
        break;
      case PenaltyKind::l1:
        out.value += x;
        out.gradient(i) = 1.0;
        break;
    }
  }
  return out;
}

Vector reweight(const Vector& w, double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("reweight: epsilon must be positive");
  return (epsilon / (w.array() + epsilon).square()).matrix();
}

namespace {

Vector project(const Vector& x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

// Zero the components of g that point out of the box at bound variables.
Vector projected_gradient(const Vector& x, const Vector& g) {
  Vector pg = g;
  for (Index i = 0; i < x.size(); ++i) {
    if ((x(i) <= 0.0 && g(i) > 0.0) || (x(i) >= 1.0 && g(i) < 0.0)) pg(i) = 0.0;
  }
  return pg;
}

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

// Two-loop recursion restricted to the free variables.
Vector lbfgs_direction(const Vector& g, const std::vector<char>& free, const std::deque<Pair>& pairs) {
  Vector q = g;
  for (Index i = 0; i < q.size(); ++i) {
    if (!free[i]) q(i) = 0.0;
  }
  auto masked_dot = [&free](const Vector& a, const Vector& b) {
    double acc = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
      if (free[i]) acc += a(i) * b(i);
    }
    return acc;
  };
  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    const Pair& p = pairs[k];
    alpha[k] = p.rho * masked_dot(p.s, q);
    q -= alpha[k] * p.y;
    for (Index i = 0; i < q.size(); ++i) {
      if (!free[i]) q(i) = 0.0;
    }
  }
  if (!pairs.empty()) {
    const Pair& last = pairs.back();
    const double yy = masked_dot(last.y, last.y);
    const double sy = masked_dot(last.s, last.y);
    if (yy > 0.0 && sy > 0.0) q *= sy / yy;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Pair& p = pairs[k];
    const double beta = p.rho * masked_dot(p.y, q);
    q += (alpha[k] - beta) * p.s;
    for (Index i = 0; i < q.size(); ++i) {
      if (!free[i]) q(i) = 0.0;
    }
  }
  return -q;
}

}  // namespace

InnerResult inner_solve(const CriterionFn& criterion, const Vector& r, double gamma, const Vector& w0,
                        const InnerConfig& cfg) {
  if (r.size() != w0.size()) throw ContractError("inner_solve: r and w0 lengths differ");
  if (!(gamma >= 0.0)) throw ContractError("inner_solve: gamma must be nonnegative");
  InnerResult res;
  auto evaluate = [&](const Vector& x, double& phi, Vector& grad) {
    Evaluation e = criterion(x);
    ++res.evaluations;
    if (!std::isfinite(e.value) || e.gradient.size() != x.size() || !e.gradient.allFinite()) {
      throw NumericalError("inner_solve: criterion returned a non-finite value or a malformed gradient");
    }
    phi = e.value;
    grad = e.gradient + gamma * r;
    return e.value + gamma * r.dot(x);
  };

  Vector x = project(w0);
  double phi = 0.0;
  Vector g;
  double f = evaluate(x, phi, g);
  std::deque<Pair> pairs;

  for (int it = 0; it < cfg.max_iter; ++it) {
    const Vector pg = projected_gradient(x, g);
    res.pg_norm = pg.cwiseAbs().maxCoeff();
    if (res.pg_norm <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    std::vector<char> free(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) free[i] = pg(i) != 0.0 || (x(i) > 0.0 && x(i) < 1.0);

    Vector d = lbfgs_direction(g, free, pairs);
    bool quasi_newton = !pairs.empty();
    if (!quasi_newton || !(d.dot(g) < 0.0)) {
      d = -pg / res.pg_norm;
      quasi_newton = false;
    }

    bool accepted = false;
    Vector x_new;
    double f_new = f;
    double phi_new = phi;
    Vector g_new;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      for (int ls = 0; ls < cfg.ls_max; ++ls) {
        x_new = project(x + step * d);
        const Vector delta = x_new - x;
        if (delta.cwiseAbs().maxCoeff() == 0.0) break;
        f_new = evaluate(x_new, phi_new, g_new);
        if (f_new <= f + 1e-4 * g.dot(delta)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted && quasi_newton) {
        d = -pg / res.pg_norm;
        quasi_newton = false;
        pairs.clear();
      } else {
        break;
      }
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.stalled = true;
      break;
    }
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      pairs.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(pairs.size()) > cfg.memory) pairs.pop_front();
    }
    const double f_old = f;
    x = x_new;
    f = f_new;
    phi = phi_new;
    g = g_new;
    if (std::abs(f_old - f) <= 1e-15 * std::max(1.0, std::abs(f))) {
      res.pg_norm = projected_gradient(x, g).cwiseAbs().maxCoeff();
      res.converged = res.pg_norm <= cfg.grad_tol;
      if (!res.converged) res.stalled = true;
      break;
    }
  }
  if (!res.converged && !res.stalled) res.pg_norm = projected_gradient(x, g).cwiseAbs().maxCoeff();
  res.w = x;
  res.objective = f;
  res.phi = phi;
  return res;
}

double binariness_metric(const Vector& w) {
  double worst = 0.0;
  for (Index i = 0; i < w.size(); ++i) worst = std::max(worst, std::min(w(i), 1.0 - w(i)));
  return worst;
}

int count_active(const Vector& w, double threshold) {
  return static_cast<int>((w.array() > threshold).count());
}

OptRun mm_loop(const CriterionFn& criterion, const PenaltyConfig& penalty, const OptimizerConfig& opt,
               const Vector& w0, const std::function<void(const OptRun&)>& observer) {
  penalty.validate();
  opt.validate();
  if (w0.size() < 1) throw ContractError("mm_loop: empty initial design");
  if (!w0.allFinite() || w0.minCoeff() < -1e-12 || w0.maxCoeff() > 1.0 + 1e-12) {
    throw ContractError("mm_loop: initial design must lie in [0, 1]");
  }
  OptRun run;
  run.penalty = penalty;
  run.active_threshold = opt.active_threshold;

  Vector previous = project(w0);
  Vector r = Vector::Ones(w0.size());
  for (int m = 1; m <= opt.m_max; ++m) {
    if (m > 1) r = penalty_eval(previous, penalty).gradient;
    const InnerResult inner = inner_solve(criterion, r, penalty.gamma, previous, opt.inner);
    Iterate it;
    it.w = inner.w;
    it.phi = inner.phi;
    it.penalty = penalty_eval(inner.w, penalty).value;
    it.J = it.phi + penalty.gamma * it.penalty;
    it.inner_iterations = inner.iterations;
    it.evaluations = inner.evaluations;
    it.stalled = inner.stalled;
    it.step = (inner.w - previous).norm();
    if (m > 1) {
      const double before = run.iterates.back().J;
      if (it.J > before + 1e-10) {
        run.iterates.push_back(it);
        run.final_w = inner.w;
        if (observer) observer(run);
        throw NumericalError("mm_loop: objective increased from " + std::to_string(before) + " to " +
                             std::to_string(it.J) + " at outer iteration " + std::to_string(m));
      }
    }
    run.iterates.push_back(it);
    previous = inner.w;
    run.final_w = previous;
    run.n_active = count_active(run.final_w, opt.active_threshold);
    run.binariness = binariness_metric(run.final_w);
    if (observer) observer(run);
    if (penalty.gamma == 0.0 || it.step <= opt.outer_tol) {
      run.converged = true;
      break;
    }
  }
  return run;
}

nlohmann::json OptRun::to_json() const {
  nlohmann::json j;
  j["penalty"] = {{"kind", to_string(penalty.kind)}, {"gamma", penalty.gamma}, {"epsilon", penalty.epsilon}};
  j["final_w"] = std::vector<double>(final_w.data(), final_w.data() + final_w.size());
  j["n_active"] = n_active;
  j["active_threshold"] = active_threshold;
  j["binariness"] = binariness;
  j["converged"] = converged;
  j["outer_iterations"] = iterates.size();
  nlohmann::json hist = nlohmann::json::array();
  for (std::size_t m = 0; m < iterates.size(); ++m) {
    const Iterate& it = iterates[m];
    hist.push_back({{"m", m + 1},
                    {"J", it.J},
                    {"phi", it.phi},
                    {"penalty", it.penalty},
                    {"inner_iterations", it.inner_iterations},
                    {"evaluations", it.evaluations},
                    {"stalled", it.stalled},
                    {"step", it.step},
                    {"w", std::vector<double>(it.w.data(), it.w.data() + it.w.size())}});
  }
  j["iterates"] = hist;
  return j;
}

CsvTable OptRun::weights_table() const {
  std::vector<Index> order(static_cast<std::size_t>(final_w.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [this](Index a, Index b) { return final_w(a) > final_w(b); });
  CsvTable t{"weights", {"rank", "sensor", "weight"}, {}};
  for (std::size_t k = 0; k < order.size(); ++k) {
    t.add_row({static_cast<std::int64_t>(k + 1), static_cast<std::int64_t>(order[k]), final_w(order[k])});
  }
  return t;
}

CsvTable OptRun::iterates_table() const {
  CsvTable t{"iterates",
             {"m", "J", "phi", "penalty", "inner_iterations", "evaluations", "stalled", "step", "n_active",
              "binariness"},
             {}};
  for (std::size_t m = 0; m < iterates.size(); ++m) {
    const Iterate& it = iterates[m];
    t.add_row({static_cast<std::int64_t>(m + 1), it.J, it.phi, it.penalty, std::int64_t{it.inner_iterations},
               std::int64_t{it.evaluations}, std::int64_t{it.stalled ? 1 : 0}, it.step,
               std::int64_t{count_active(it.w, active_threshold)}, binariness_metric(it.w)});
  }
  return t;
}

}  // namespace oed
