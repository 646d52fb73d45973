#include "oed/model.hpp"

#include "oed/cg.hpp"
#include "oed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace oed {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_whole(double v) { return std::abs(v - std::round(v)) <= 1e-12 * std::max(1.0, std::abs(v)); }

// Graph Laplacian with homogeneous Neumann conditions, scaled by `scale`,
// plus `shift` on the diagonal: shift I + scale * L.
kernels::Stencil5 shifted_laplacian(const Grid2D& g, double shift, double scale) {
  kernels::Stencil5 st(g.nx, g.ny);
  const double off = scale / (g.h() * g.h());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.index(i, j);
      int degree = 0;
      if (i > 0) {
        st.w[k] = -off;
        ++degree;
      }
      if (i + 1 < g.nx) {
        st.e[k] = -off;
        ++degree;
      }
      if (j > 0) {
        st.s[k] = -off;
        ++degree;
      }
      if (j + 1 < g.ny) {
        st.n[k] = -off;
        ++degree;
      }
      st.c[k] = shift + degree * off;
    }
  }
  return st;
}

// I - dt * Adv with first-order upwind differences.
kernels::Stencil5 upwind_explicit(const Grid2D& g, double amplitude, double dt) {
  kernels::Stencil5 st(g.nx, g.ny);
  const double r = dt / g.h();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.index(i, j);
      const auto [vx, vy] = velocity_eval(g.x(i), g.y(j), amplitude);
      double c = 1.0;
      if (vx > 0.0 && i > 0) {
        c -= r * vx;
        st.w[k] = r * vx;
      } else if (vx < 0.0 && i + 1 < g.nx) {
        c += r * vx;
        st.e[k] = -r * vx;
      }
      if (vy > 0.0 && j > 0) {
        c -= r * vy;
        st.s[k] = r * vy;
      } else if (vy < 0.0 && j + 1 < g.ny) {
        c += r * vy;
        st.n[k] = -r * vy;
      }
      st.c[k] = c;
    }
  }
  return st;
}

}  // namespace

Grid2D::Grid2D(int nx_, int ny_) : nx(nx_), ny(ny_) {}

std::pair<double, double> velocity_eval(double x, double y, double amplitude) {
  const double sx = std::sin(kPi * x);
  const double sy = std::sin(kPi * y);
  const double vx = amplitude * kPi * sx * sx * std::sin(2.0 * kPi * y);
  const double vy = -amplitude * kPi * std::sin(2.0 * kPi * x) * sy * sy;
  return {vx, vy};
}

double max_grid_speed(const Grid2D& grid, double amplitude) {
  double vmax = 0.0;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const auto [vx, vy] = velocity_eval(grid.x(i), grid.y(j), amplitude);
      vmax = std::max(vmax, std::abs(vx) + std::abs(vy));
    }
  }
  return vmax;
}

double stable_time_step(const Grid2D& grid, double amplitude, double grain) {
  const double vmax = max_grid_speed(grid, amplitude);
  if (vmax == 0.0) return grain / 8.0;
  const double limit = grid.h() / vmax;
  return grain / std::ceil(grain / limit);
}

std::vector<int> sensor_lattice(const Grid2D& grid, int per_axis) {
  if (per_axis < 1) throw ContractError("sensor lattice needs at least one node per axis");
  std::vector<int> nodes;
  std::set<int> seen;
  for (int b = 0; b < per_axis; ++b) {
    for (int a = 0; a < per_axis; ++a) {
      const int i = static_cast<int>(std::lround((a + 1.0) * (grid.nx - 1) / (per_axis + 1.0)));
      const int j = static_cast<int>(std::lround((b + 1.0) * (grid.ny - 1) / (per_axis + 1.0)));
      const int k = grid.index(i, j);
      if (!seen.insert(k).second) {
        throw ContractError("sensor lattice of " + std::to_string(per_axis) + " per axis does not fit a " +
                            std::to_string(grid.nx) + "x" + std::to_string(grid.ny) + " grid");
      }
      nodes.push_back(k);
    }
  }
  return nodes;
}

struct ModelProblem::State {
  AdvDiffModel model;
  PriorOperator prior;
  ObservationSetup obs;
  double dt = 0.0;
  int total_steps = 0;
  std::vector<int> obs_steps;
  Vector mass;
  Vector inv_sqrt_mass;
  Vector sqrt_mass;
  kernels::Stencil5 implicit;       // I + dt kappa L
  kernels::Stencil5 explicit_step;  // I - dt Adv
  kernels::Stencil5 explicit_t;     // (I - dt Adv)^T
  kernels::Stencil5 prior_op;       // theta L + alpha I
  bool has_advection = false;
  CounterPtr pde = std::make_shared<SolveCounter>();
  CounterPtr prior_count = std::make_shared<SolveCounter>();
};

ModelProblem::ModelProblem(AdvDiffModel model, PriorOperator prior, ObservationSetup obs) {
  auto st = std::make_shared<State>();
  const Grid2D& g = model.grid;
  if (g.nx < 4 || g.ny < 4) throw ContractError("grid needs at least 4 nodes per axis");
  if (g.nx != g.ny) throw ContractError("grid must be square (the domain is the unit square)");
  if (!(model.kappa > 0.0)) throw ContractError("kappa must be positive");
  if (!(model.t_final > 0.0)) throw ContractError("t_final must be positive");
  if (!(model.cg_tol > 0.0) || model.cg_max_iter < 1) throw ContractError("model CG controls must be positive");
  if (!(prior.theta > 0.0) || !(prior.alpha > 0.0)) throw ContractError("prior theta and alpha must be positive");
  if (!(prior.cg_tol > 0.0) || prior.cg_max_iter < 1) throw ContractError("prior CG controls must be positive");

  if (model.dt == 0.0) model.dt = stable_time_step(g, model.velocity_amplitude);
  if (!(model.dt > 0.0)) throw ContractError("dt must be positive");
  const double vmax = max_grid_speed(g, model.velocity_amplitude);
  if (model.dt * vmax > g.h() * (1.0 + 1e-12)) {
    throw ContractError("time step " + std::to_string(model.dt) + " violates the stability limit h/|v|_inf = " +
                        std::to_string(g.h() / vmax));
  }
  const double steps = model.t_final / model.dt;
  if (!is_whole(steps)) throw ContractError("t_final is not a whole number of time steps");
  st->total_steps = static_cast<int>(std::lround(steps));

  if (obs.sensor_nodes.empty()) throw ContractError("at least one sensor is required");
  if (obs.obs_times.empty()) throw ContractError("at least one observation time is required");
  std::set<int> unique(obs.sensor_nodes.begin(), obs.sensor_nodes.end());
  if (unique.size() != obs.sensor_nodes.size()) throw ContractError("sensor nodes must be distinct");
  for (int node : obs.sensor_nodes) {
    if (node < 0 || node >= g.n()) throw ContractError("sensor node " + std::to_string(node) + " is off the grid");
  }
  if (obs.sigmas.size() != obs.sensor_nodes.size()) throw ContractError("need one noise sigma per sensor");
  for (double s : obs.sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ContractError("noise sigmas must be positive and finite");
  }
  double prev = 0.0;
  for (double t : obs.obs_times) {
    if (!(t > prev)) throw ContractError("observation times must be strictly increasing and positive");
    if (t > model.t_final * (1.0 + 1e-12)) throw ContractError("observation time beyond t_final");
    const double k = t / model.dt;
    if (!is_whole(k)) throw ContractError("observation time " + std::to_string(t) + " is not a multiple of dt");
    st->obs_steps.push_back(static_cast<int>(std::lround(k)));
    prev = t;
  }

  st->dt = model.dt;
  const double h = g.h();
  st->mass = Vector::Constant(g.n(), h * h);
  st->sqrt_mass = st->mass.cwiseSqrt();
  st->inv_sqrt_mass = st->sqrt_mass.cwiseInverse();
  st->implicit = shifted_laplacian(g, 1.0, model.dt * model.kappa);
  st->explicit_step = upwind_explicit(g, model.velocity_amplitude, model.dt);
  st->explicit_t = st->explicit_step.transposed();
  st->prior_op = shifted_laplacian(g, prior.alpha, prior.theta);
  st->has_advection = model.velocity_amplitude != 0.0;
  st->model = std::move(model);
  st->prior = prior;
  st->obs = std::move(obs);
  state_ = std::move(st);
}

const AdvDiffModel& ModelProblem::model() const { return state_->model; }
const PriorOperator& ModelProblem::prior() const { return state_->prior; }
const ObservationSetup& ModelProblem::observations() const { return state_->obs; }
int ModelProblem::n() const { return state_->model.grid.n(); }
int ModelProblem::n_obs() const { return state_->obs.n_obs(); }
double ModelProblem::dt() const { return state_->dt; }
int ModelProblem::total_steps() const { return state_->total_steps; }
const std::vector<int>& ModelProblem::observation_steps() const { return state_->obs_steps; }
const Vector& ModelProblem::mass_diag() const { return state_->mass; }
const CounterPtr& ModelProblem::pde_counter() const { return state_->pde; }
const CounterPtr& ModelProblem::prior_counter() const { return state_->prior_count; }
const kernels::Stencil5& ModelProblem::implicit_stencil() const { return state_->implicit; }
const kernels::Stencil5& ModelProblem::explicit_stencil() const { return state_->explicit_step; }
const kernels::Stencil5& ModelProblem::prior_stencil() const { return state_->prior_op; }

namespace {

void solve_stencil(const kernels::Stencil5& st, std::span<const double> b, std::span<double> x, double tol,
                   int max_iter, const char* what) {
  auto apply = [&st](std::span<const double> in, std::span<double> out) { kernels::stencil_apply(st, in, out); };
  const CgResult res = conjugate_gradient(apply, b, x, tol, max_iter);
  if (!res.converged) throw SolverError(what, res.relative_residual, res.iterations);
}

}  // namespace

Vector ModelProblem::forward_apply(const Vector& m0) const {
  const State& s = *state_;
  if (m0.size() != n()) throw ContractError("forward_apply: parameter has wrong length");
  if (!m0.allFinite()) throw ContractError("forward_apply: parameter is not finite");
  const int ns = s.obs.n_sensors();
  Vector out = Vector::Zero(s.obs.n_obs());
  Vector u = m0;
  Vector rhs(n());
  std::size_t next = 0;
  const int last = s.obs_steps.back();
  for (int step = 1; step <= last; ++step) {
    if (s.has_advection) {
      kernels::stencil_apply(s.explicit_step, as_span(u), as_span(rhs));
    } else {
      rhs = u;
    }
    u = rhs;  // initial guess for CG
    solve_stencil(s.implicit, as_span(rhs), as_span(u), s.model.cg_tol, s.model.cg_max_iter, "forward implicit step");
    if (next < s.obs_steps.size() && step == s.obs_steps[next]) {
      for (int i = 0; i < ns; ++i) out(s.obs.obs_index(static_cast<int>(next), i)) = u(s.obs.sensor_nodes[i]);
      ++next;
    }
  }
  s.pde->add(1);
  return out;
}

Vector ModelProblem::forward_transpose_apply(const Vector& y) const {
  const State& s = *state_;
  if (y.size() != n_obs()) throw ContractError("forward_transpose_apply: data vector has wrong length");
  if (!y.allFinite()) throw ContractError("forward_transpose_apply: data vector is not finite");
  const int ns = s.obs.n_sensors();
  Vector lam = Vector::Zero(n());
  Vector z(n());
  int next = static_cast<int>(s.obs_steps.size()) - 1;
  for (int step = s.obs_steps.back(); step >= 1; --step) {
    if (next >= 0 && step == s.obs_steps[next]) {
      for (int i = 0; i < ns; ++i) lam(s.obs.sensor_nodes[i]) += y(s.obs.obs_index(next, i));
      --next;
    }
    z = lam;
    solve_stencil(s.implicit, as_span(lam), as_span(z), s.model.cg_tol, s.model.cg_max_iter, "adjoint implicit step");
    if (s.has_advection) {
      kernels::stencil_apply(s.explicit_t, as_span(z), as_span(lam));
    } else {
      lam = z;
    }
  }
  s.pde->add(1);
  return lam;
}

Vector ModelProblem::forward_adjoint_apply(const Vector& y) const {
  return forward_transpose_apply(y).cwiseQuotient(state_->mass);
}

Vector ModelProblem::prior_sqrt_apply(const Vector& src) const {
  const State& s = *state_;
  if (src.size() != n()) throw ContractError("prior_sqrt_apply: vector has wrong length");
  if (!src.allFinite()) throw ContractError("prior_sqrt_apply: vector is not finite");
  Vector v = Vector::Zero(n());
  solve_stencil(s.prior_op, as_span(src), as_span(v), s.prior.cg_tol, s.prior.cg_max_iter, "prior elliptic solve");
  s.prior_count->add(1);
  return v;
}

Vector ModelProblem::prior_apply(const Vector& src) const { return prior_sqrt_apply(prior_sqrt_apply(src)); }

LinearOperator ModelProblem::forward_operator() const {
  ModelProblem self = *this;
  return LinearOperator(
      n_obs(), n(), columnwise(n_obs(), [self](const Vector& m) { return self.forward_apply(m); }),
      columnwise(n(), [self](const Vector& y) { return self.forward_adjoint_apply(y); }), state_->mass,
      {state_->pde});
}

LinearOperator ModelProblem::prior_sqrt_operator() const {
  ModelProblem self = *this;
  auto map = columnwise(n(), [self](const Vector& s) { return self.prior_sqrt_apply(s); });
  return LinearOperator(n(), n(), map, map, Vector(), {state_->prior_count});
}

LinearOperator ModelProblem::z_operator() const {
  ModelProblem self = *this;
  auto map = columnwise(n(), [self](const Vector& x) -> Vector {
    const State& s = *self.state_;
    return s.sqrt_mass.cwiseProduct(self.prior_apply(s.inv_sqrt_mass.cwiseProduct(x)));
  });
  return LinearOperator(n(), n(), map, map, Vector(), {state_->prior_count});
}

LinearOperator build_fcal(const ModelProblem& problem) {
  const Vector inv_sqrt_mass = problem.mass_diag().cwiseSqrt().cwiseInverse();
  auto apply = [problem, inv_sqrt_mass](const Vector& x) -> Vector {
    return problem.forward_apply(problem.prior_sqrt_apply(inv_sqrt_mass.cwiseProduct(x)));
  };
  // fcal^T = M^{-1/2} A^{-1} F^T with A symmetric.
  auto adjoint = [problem, inv_sqrt_mass](const Vector& y) -> Vector {
    return inv_sqrt_mass.cwiseProduct(problem.prior_sqrt_apply(problem.forward_transpose_apply(y)));
  };
  return LinearOperator(problem.n_obs(), problem.n(), columnwise(problem.n_obs(), apply),
                        columnwise(problem.n(), adjoint), Vector(), {problem.pde_counter()});
}

}  // namespace oed
