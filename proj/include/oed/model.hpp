#pragma once

// Contaminant-transport model problem on the unit square: advection-diffusion
// forward and adjoint solves, the elliptic prior square root, and the
// prior-preconditioned parameter-to-observable operator.
//
// Discretization:
//  * node-centred uniform grid, h = 1/(nx-1), lumped mass M = h^2 I;
//  * Neumann graph Laplacian L (sum over present neighbours of
//    (u_i - u_j)/h^2), symmetric with constants in its null space;
//  * IMEX Euler: (I + dt kappa L) u^{k+1} = (I - dt Adv) u^k, first-order
//    upwind advection treated explicitly, SPD implicit system solved by CG;
//  * prior square root A^{-1}, A = theta L + alpha I, Gamma_pr = A^{-2}.

#include "oed/kernels.hpp"
#include "oed/linops.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace oed {

struct Grid2D {
  int nx = 32;
  int ny = 32;

  Grid2D() = default;
  Grid2D(int nx_, int ny_);

  double h() const { return 1.0 / (nx - 1); }
  int n() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  double x(int i) const { return i * h(); }
  double y(int j) const { return j * h(); }
};

/// Recirculating divergence-free field from psi = V0 sin^2(pi x) sin^2(pi y):
/// vx = dpsi/dy, vy = -dpsi/dx. Vanishes on the boundary of the unit square.
std::pair<double, double> velocity_eval(double x, double y, double amplitude = 1.0);

/// max over grid nodes of |vx| + |vy|.
double max_grid_speed(const Grid2D& grid, double amplitude);

/// Largest dt = grain/k (k integer) with dt * max_grid_speed <= h. With
/// grain dividing every observation time, all observations land on steps.
double stable_time_step(const Grid2D& grid, double amplitude, double grain = 0.5);

struct AdvDiffModel {
  Grid2D grid;
  double kappa = 0.01;
  double velocity_amplitude = 1.0;
  double dt = 0.0;  // 0 selects stable_time_step
  double t_final = 5.0;
  double cg_tol = 1e-10;
  int cg_max_iter = 500;
};

struct PriorOperator {
  double theta = 0.002;
  double alpha = 0.1;
  double cg_tol = 1e-10;
  int cg_max_iter = 2000;
};

struct ObservationSetup {
  std::vector<int> sensor_nodes;
  std::vector<double> obs_times{1.0, 2.0, 3.5};
  std::vector<double> sigmas;  // one per sensor

  int n_sensors() const { return static_cast<int>(sensor_nodes.size()); }
  int n_times() const { return static_cast<int>(obs_times.size()); }
  int n_obs() const { return n_sensors() * n_times(); }
  /// Observation vector is time-major: entry t * n_s + i.
  int obs_index(int time, int sensor) const { return time * n_sensors() + sensor; }
};

/// `per_axis`^2 candidate nodes at fractions (a+1)/(per_axis+1) of each axis.
std::vector<int> sensor_lattice(const Grid2D& grid, int per_axis);

class ModelProblem {
 public:
  /// Validates all invariants (grid size, kappa, dt stability, step
  /// alignment of observation times, sensor distinctness, sigmas) and
  /// assembles the stencils. Throws ContractError.
  ModelProblem(AdvDiffModel model, PriorOperator prior, ObservationSetup obs);

  const AdvDiffModel& model() const;
  const PriorOperator& prior() const;
  const ObservationSetup& observations() const;
  const Grid2D& grid() const { return model().grid; }

  int n() const;
  int n_obs() const;
  double dt() const;
  int total_steps() const;
  const std::vector<int>& observation_steps() const;

  /// Diagonal of the lumped mass matrix (h^2 per node).
  const Vector& mass_diag() const;

  /// F m0: integrate to the last observation time and record sensor values.
  Vector forward_apply(const Vector& m0) const;
  /// Euclidean transpose F^T y (exact discrete adjoint of the IMEX steps).
  Vector forward_transpose_apply(const Vector& y) const;
  /// Adjoint in the mass-weighted domain inner product: F* = M^{-1} F^T.
  Vector forward_adjoint_apply(const Vector& y) const;

  /// One application of A^{-1} = Gamma_pr^{1/2}.
  Vector prior_sqrt_apply(const Vector& s) const;
  /// Gamma_pr = A^{-2}.
  Vector prior_apply(const Vector& s) const;

  /// F with mass-weighted domain; charges the PDE counter.
  LinearOperator forward_operator() const;
  /// A^{-1} (symmetric, Euclidean); charges the prior counter.
  LinearOperator prior_sqrt_operator() const;
  /// Z = M^{1/2} Gamma_pr M^{-1/2}; charges the prior counter twice per column.
  LinearOperator z_operator() const;

  const CounterPtr& pde_counter() const;
  const CounterPtr& prior_counter() const;
  std::int64_t pde_solves() const { return pde_counter()->value(); }
  std::int64_t prior_solves() const { return prior_counter()->value(); }

  /// Stencils, exposed for tests.
  const kernels::Stencil5& implicit_stencil() const;
  const kernels::Stencil5& explicit_stencil() const;
  const kernels::Stencil5& prior_stencil() const;

 private:
  struct State;
  std::shared_ptr<const State> state_;
};

/// Prior-preconditioned forward operator F Gamma_pr^{1/2} M^{-1/2} with
/// Euclidean domain: H = fcal^T W fcal is symmetric in the ordinary sense.
/// Charges only the PDE counter; its prior solves land on the prior counter.
LinearOperator build_fcal(const ModelProblem& problem);

}  // namespace oed
