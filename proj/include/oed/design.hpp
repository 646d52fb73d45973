#pragma once

// Sparsity-promoting design optimization: concave penalties, their MM
// linearization (reweighted l1), and a projected quasi-Newton solver for the
// box-constrained convex subproblems.

#include "oed/linops.hpp"
#include "oed/table.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace oed {

enum class PenaltyKind { p_epsilon, arctan, l1 };

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& s);

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::p_epsilon;
  double gamma = 1.0;
  double epsilon = 1.0 / 256.0;

  void validate() const;
};

struct PenaltyValue {
  double value = 0.0;
  Vector gradient;
};

/// p_epsilon: sum w/(w+eps); arctan: sum atan(w/eps); l1: sum w.
PenaltyValue penalty_eval(const Vector& w, const PenaltyConfig& cfg);

/// r_i = eps / (w_i + eps)^2.
Vector reweight(const Vector& w, double epsilon);

struct InnerConfig {
  int max_iter = 200;
  double grad_tol = 1e-6;
  int memory = 10;
  int ls_max = 30;
};

struct OptimizerConfig {
  int m_max = 30;
  double outer_tol = 1e-6;
  InnerConfig inner;
  double active_threshold = 0.5;

  void validate() const;
};

struct Evaluation {
  double value = 0.0;
  Vector gradient;
};

/// Criterion callback: value and gradient at a box point.
using CriterionFn = std::function<Evaluation(const Vector&)>;

struct InnerResult {
  Vector w;
  double objective = 0.0;  // phi + gamma r^T w
  double phi = 0.0;
  double pg_norm = 0.0;    // projected-gradient infinity norm at w
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool stalled = false;
};

/// Minimize phi(w) + gamma r^T w over [0,1]^n from w0.
InnerResult inner_solve(const CriterionFn& criterion, const Vector& r, double gamma, const Vector& w0,
                        const InnerConfig& cfg);

struct Iterate {
  Vector w;
  double J = 0.0;
  double phi = 0.0;
  double penalty = 0.0;
  int inner_iterations = 0;
  int evaluations = 0;
  bool stalled = false;
  double step = 0.0;  // ||w^(m) - w^(m-1)||_2
};

struct OptRun {
  std::vector<Iterate> iterates;
  Vector final_w;
  int n_active = 0;
  double binariness = 0.0;
  bool converged = false;
  PenaltyConfig penalty;
  double active_threshold = 0.5;

  nlohmann::json to_json() const;
  /// rank, sensor, weight; sorted by weight, descending.
  CsvTable weights_table() const;
  CsvTable iterates_table() const;
  void write_weights_csv(const std::filesystem::path& path) const { weights_table().write(path); }
  void write_iterates_csv(const std::filesystem::path& path) const { iterates_table().write(path); }
};

/// Reweighted l1 outer loop. The first subproblem uses r = 1 (plain l1);
/// each later one uses r = grad P(w^(m-1)). J = phi + gamma P must not
/// increase by more than 1e-10 between reweighted iterates (NumericalError).
/// `observer` sees the run after every recorded iterate.
OptRun mm_loop(const CriterionFn& criterion, const PenaltyConfig& penalty, const OptimizerConfig& opt,
               const Vector& w0, const std::function<void(const OptRun&)>& observer = {});

/// max_i min(w_i, 1 - w_i); zero exactly for binary designs.
double binariness_metric(const Vector& w);

/// #{i : w_i > threshold}.
int count_active(const Vector& w, double threshold);

}  // namespace oed
