#include "oed/app.hpp"
#include "oed/criteria.hpp"
#include "oed/design.hpp"
#include "oed/errors.hpp"

#include "support.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace oed;
using namespace oed::testing;

namespace {

CriterionFn quadratic(const Vector& c) {
  return [c](const Vector& w) {
    Evaluation e;
    e.value = 0.5 * (w - c).squaredNorm();
    e.gradient = w - c;
    return e;
  };
}

// Exact criterion on a small synthetic problem: H(w) = F^T diag(w) F.
struct Synthetic {
  LinearOperator fcal;
  NoiseWeights noise;
  ExactOracle oracle;

  explicit Synthetic(Index ns, Index n, unsigned seed)
      : fcal(dense_operator(random_matrix(ns, n, seed))),
        noise(Vector::Ones(ns), 1),
        oracle(fcal, nullptr, noise, OraclePrecision::standard) {}

  CriterionFn criterion() const {
    return [this](const Vector& w) {
      const ExactValues ex = oracle.evaluate(w);
      return Evaluation{ex.phi_mod, ex.grad_mod};
    };
  }
};

struct DeskDesign {
  app::Workspace ws;
  ExactOracle oracle;

  explicit DeskDesign(const app::RunConfig& cfg)
      : ws(cfg), oracle(ws.fcal, &ws.z, ws.noise, OraclePrecision::standard) {}
};

DeskDesign& desk() {
  static DeskDesign d(desk_config(8, 3));
  return d;
}

// Unit sensor noise keeps lambda_max(H) near 3e3, far from the regime where
// double rounding in the spectral factors dominates the gradient.
DeskDesign& unit_noise_desk() {
  static DeskDesign d([] {
    app::RunConfig cfg = desk_config(8, 3);
    cfg.obs.sigmas.assign(9, 1.0);
    return cfg;
  }());
  return d;
}

}  // namespace

TEST(Penalty, ZeroDesignHasZeroValue) {
  const Vector w = Vector::Zero(6);
  for (PenaltyKind kind : {PenaltyKind::p_epsilon, PenaltyKind::arctan, PenaltyKind::l1}) {
    EXPECT_EQ(penalty_eval(w, PenaltyConfig{kind, 1.0, 0.01}).value, 0.0) << to_string(kind);
  }
}

TEST(Penalty, AllOnesClosedForm) {
  const double eps = 1.0 / 256.0;
  const PenaltyValue v = penalty_eval(Vector::Ones(9), PenaltyConfig{PenaltyKind::p_epsilon, 1.0, eps});
  EXPECT_NEAR(v.value, 9.0 / (1.0 + eps), 1e-14);
  EXPECT_NEAR(penalty_eval(Vector::Ones(4), PenaltyConfig{PenaltyKind::l1, 1.0, eps}).value, 4.0, 0.0);
  EXPECT_NEAR(penalty_eval(Vector::Ones(2), PenaltyConfig{PenaltyKind::arctan, 1.0, 0.5}).value, 2.0 * std::atan(2.0),
              1e-15);
}

TEST(Penalty, GradientMatchesCentralDifferences) {
  const Vector w = 0.3 * Vector::Ones(5) + 0.1 * Vector::LinSpaced(5, -1.0, 1.0);
  for (PenaltyKind kind : {PenaltyKind::p_epsilon, PenaltyKind::arctan, PenaltyKind::l1}) {
    const PenaltyConfig cfg{kind, 1.0, 0.05};
    const Vector g = penalty_eval(w, cfg).gradient;
    for (Index i = 0; i < w.size(); ++i) {
      const double h = 1e-5;
      Vector plus = w;
      Vector minus = w;
      plus(i) += h;
      minus(i) -= h;
      const double fd = (penalty_eval(plus, cfg).value - penalty_eval(minus, cfg).value) / (2 * h);
      EXPECT_LE(std::abs(fd - g(i)) / std::abs(g(i)), 1e-7) << to_string(kind) << " i=" << i;
    }
  }
}

TEST(Penalty, ConfigValidation) {
  EXPECT_THROW((PenaltyConfig{PenaltyKind::p_epsilon, -1.0, 0.1}.validate()), ContractError);
  EXPECT_THROW((PenaltyConfig{PenaltyKind::arctan, 1.0, 0.0}.validate()), ContractError);
  EXPECT_NO_THROW((PenaltyConfig{PenaltyKind::l1, 0.0, 0.0}.validate()));
  EXPECT_EQ(penalty_kind_from_string("arctan"), PenaltyKind::arctan);
  EXPECT_THROW(penalty_kind_from_string("l0"), ContractError);
}

TEST(Reweight, ClosedForms) {
  const double eps = 1.0 / 256.0;
  const Vector r = reweight((Vector(3) << 0.0, eps, 1.0).finished(), eps);
  EXPECT_DOUBLE_EQ(r(0), 1.0 / eps);
  EXPECT_DOUBLE_EQ(r(1), 1.0 / (4.0 * eps));
  using Dec50 = boost::multiprecision::cpp_dec_float_50;
  const Dec50 e = Dec50(1) / 256;
  const double reference = static_cast<double>(e / ((1 + e) * (1 + e)));
  EXPECT_LE(std::abs(r(2) - reference) / reference, 1e-15);
}

TEST(Reweight, PositiveAndStrictlyDecreasing) {
  const Vector w = Vector::LinSpaced(50, 0.0, 1.0);
  const Vector r = reweight(w, 0.01);
  EXPECT_GT(r.minCoeff(), 0.0);
  for (Index i = 1; i < r.size(); ++i) EXPECT_LT(r(i), r(i - 1));
  EXPECT_THROW(reweight(w, 0.0), ContractError);
}

TEST(Reweight, EqualsPenaltyGradient) {
  const Vector w = random_box_point(8, 2, 0.0, 1.0);
  EXPECT_LE((reweight(w, 0.02) - penalty_eval(w, PenaltyConfig{PenaltyKind::p_epsilon, 1.0, 0.02}).gradient)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(Surrogate, MajorizationAndTangency) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (PenaltyKind kind : {PenaltyKind::p_epsilon, PenaltyKind::arctan}) {
    const PenaltyConfig cfg{kind, 1.0, 1.0 / 256.0};
    for (int pair = 0; pair < 100; ++pair) {
      Vector w(7), w0(7);
      for (Index i = 0; i < 7; ++i) {
        w(i) = unif(gen);
        w0(i) = unif(gen);
      }
      const PenaltyValue at0 = penalty_eval(w0, cfg);
      const double surrogate = at0.value + (w - w0).dot(at0.gradient);
      EXPECT_LE(penalty_eval(w, cfg).value, surrogate + 1e-12);
      EXPECT_NEAR(at0.value + (w0 - w0).dot(at0.gradient), penalty_eval(w0, cfg).value, 1e-14);
    }
  }
}

TEST(InnerSolve, LinearCostDrivesToLowerBound) {
  const CriterionFn zero = [](const Vector& w) { return Evaluation{0.0, Vector::Zero(w.size())}; };
  const InnerResult r = inner_solve(zero, Vector::Ones(5), 1.0, 0.5 * Vector::Ones(5), InnerConfig{});
  EXPECT_EQ(r.w, Vector::Zero(5));
  EXPECT_TRUE(r.converged);
}

TEST(InnerSolve, InteriorQuadraticMinimum) {
  const Vector c = 0.7 * Vector::Ones(6);
  const InnerResult r = inner_solve(quadratic(c), Vector::Ones(6), 0.0, Vector::Ones(6), InnerConfig{});
  EXPECT_LE((r.w - c).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(InnerSolve, BoxConstrainedQuadratic) {
  const Vector c = (Vector(4) << -0.5, 0.25, 1.5, 0.8).finished();
  const Vector r = (Vector(4) << 1.0, 2.0, 1.0, 0.5).finished();
  const InnerResult out = inner_solve(quadratic(c), r, 0.1, 0.5 * Vector::Ones(4), InnerConfig{});
  const Vector expected = (c - 0.1 * r).cwiseMax(0.0).cwiseMin(1.0);
  EXPECT_LE((out.w - expected).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(out.pg_norm, 1e-6);
}

TEST(InnerSolve, NeverWorseThanStart) {
  const Synthetic s(8, 5, 3);
  const Vector w0 = random_box_point(8, 4);
  const Vector r = reweight(w0, 0.05);
  const InnerResult out = inner_solve(s.criterion(), r, 0.3, w0, InnerConfig{});
  const double start = s.oracle.evaluate(w0).phi_mod + 0.3 * r.dot(w0);
  EXPECT_LE(out.objective, start + 1e-12);
  EXPECT_GE(out.w.minCoeff(), 0.0);
  EXPECT_LE(out.w.maxCoeff(), 1.0);
}

TEST(InnerSolve, FirstSubproblemIsL1Penalized) {
  const Synthetic s(6, 4, 5);
  const InnerResult out = inner_solve(s.criterion(), Vector::Ones(6), 0.2, Vector::Ones(6), InnerConfig{});
  EXPECT_NEAR(out.objective, out.phi + 0.2 * out.w.lpNorm<1>(), 1e-15 * std::abs(out.objective) + 1e-15);
  EXPECT_DOUBLE_EQ(out.phi, s.oracle.evaluate(out.w).phi_mod);
}

TEST(InnerSolve, PropagatesNaN) {
  const CriterionFn bad = [](const Vector& w) {
    return Evaluation{std::numeric_limits<double>::quiet_NaN(), Vector::Zero(w.size())};
  };
  EXPECT_THROW(inner_solve(bad, Vector::Ones(3), 1.0, Vector::Ones(3), InnerConfig{}), NumericalError);
}

TEST(InnerSolve, OracleAndFullRankRandomizedAgree) {
  DeskDesign& d = unit_noise_desk();
  const CriterionFn exact = [&d](const Vector& w) {
    const ExactValues ex = d.oracle.evaluate(w);
    return Evaluation{ex.phi_aopt, ex.grad_aopt};
  };
  const SketchConfig sketch{27, 3, 1, 5, true};
  const PrecomputedS& s = d.ws.s(Criterion::aopt);
  const CriterionFn randomized = [&d, &sketch, &s](const Vector& w) {
    const EstimatorReport r = randomized_aopt(d.ws.fcal, d.ws.z, d.ws.noise, w, sketch, s);
    return Evaluation{r.value, r.gradient};
  };
  const Vector r = Vector::Ones(d.ws.noise.n_sensors());
  const Vector w0 = Vector::Ones(d.ws.noise.n_sensors());
  const InnerResult a = inner_solve(exact, r, 8.0, w0, InnerConfig{});
  const InnerResult b = inner_solve(randomized, r, 8.0, w0, InnerConfig{});
  ASSERT_GT(binariness_metric(a.w), 0.1);
  EXPECT_LE((a.w - b.w).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MmLoop, ZeroGammaIsASingleSolve) {
  const Synthetic s(6, 4, 7);
  OptimizerConfig opt;
  const OptRun run = mm_loop(s.criterion(), PenaltyConfig{PenaltyKind::p_epsilon, 0.0, 0.01}, opt, Vector::Ones(6));
  ASSERT_EQ(run.iterates.size(), 1u);
  EXPECT_TRUE(run.converged);
  EXPECT_DOUBLE_EQ(run.iterates[0].J, run.iterates[0].phi);
  EXPECT_EQ(run.final_w, Vector::Ones(6));
}

TEST(MmLoop, HugeGammaSwitchesEverythingOff) {
  DeskDesign& d = desk();
  const Index ns = d.ws.noise.n_sensors();
  const CriterionFn exact = [&d](const Vector& w) {
    const ExactValues ex = d.oracle.evaluate(w);
    return Evaluation{ex.phi_aopt, ex.grad_aopt};
  };
  const OptRun run =
      mm_loop(exact, PenaltyConfig{PenaltyKind::p_epsilon, 1e6, 1.0 / 256}, OptimizerConfig{}, Vector::Ones(ns));
  EXPECT_EQ(run.n_active, 0);
  EXPECT_LE(run.final_w.maxCoeff(), 1e-4);

  // w = 0 satisfies the optimality conditions exactly once gamma r_j >= -dPhi/dw_j(0).
  const double steepest = d.oracle.s_aopt().cwiseAbs().maxCoeff();
  const OptRun off = mm_loop(exact, PenaltyConfig{PenaltyKind::p_epsilon, 1.01 * steepest, 1.0 / 256},
                             OptimizerConfig{}, Vector::Ones(ns));
  EXPECT_EQ(off.final_w, Vector::Zero(ns));
  EXPECT_EQ(off.n_active, 0);
}

TEST(MmLoop, DescentAlongEveryRun) {
  const Synthetic s(12, 6, 9);
  for (PenaltyKind kind : {PenaltyKind::p_epsilon, PenaltyKind::arctan}) {
    for (double gamma : {0.05, 0.2, 1.0}) {
      const OptRun run = mm_loop(s.criterion(), PenaltyConfig{kind, gamma, 0.02}, OptimizerConfig{}, Vector::Ones(12));
      ASSERT_FALSE(run.iterates.empty());
      for (std::size_t m = 1; m < run.iterates.size(); ++m) {
        EXPECT_LE(run.iterates[m].J, run.iterates[m - 1].J + 1e-10);
      }
      for (const Iterate& it : run.iterates) {
        EXPECT_GE(it.w.minCoeff(), -1e-12);
        EXPECT_LE(it.w.maxCoeff(), 1.0 + 1e-12);
      }
    }
  }
}

TEST(MmLoop, ActiveCountNonIncreasingInGamma) {
  DeskDesign& d = desk();
  const CriterionFn exact = [&d](const Vector& w) {
    const ExactValues ex = d.oracle.evaluate(w);
    return Evaluation{ex.phi_aopt, ex.grad_aopt};
  };
  int previous = d.ws.noise.n_sensors() + 1;
  for (double gamma : {0.5, 1.0, 3.0, 5.0}) {
    const OptRun run = mm_loop(exact, PenaltyConfig{PenaltyKind::p_epsilon, gamma, 1.0 / 256}, OptimizerConfig{},
                               Vector::Ones(d.ws.noise.n_sensors()));
    EXPECT_LE(run.n_active, previous) << "gamma=" << gamma;
    previous = run.n_active;
  }
}

TEST(MmLoop, ObserverSeesEveryIterate) {
  const Synthetic s(8, 5, 11);
  std::size_t calls = 0;
  const OptRun run = mm_loop(s.criterion(), PenaltyConfig{PenaltyKind::p_epsilon, 0.1, 0.05}, OptimizerConfig{},
                             Vector::Ones(8), [&calls](const OptRun& r) { calls = r.iterates.size(); });
  EXPECT_EQ(calls, run.iterates.size());
}

TEST(MmLoop, RejectsBadInputs) {
  const Synthetic s(4, 3, 13);
  OptimizerConfig opt;
  EXPECT_THROW(mm_loop(s.criterion(), PenaltyConfig{}, opt, 2.0 * Vector::Ones(4)), ContractError);
  opt.active_threshold = 1.0;
  EXPECT_THROW(mm_loop(s.criterion(), PenaltyConfig{}, opt, Vector::Ones(4)), ContractError);
}

TEST(OptRunTables, WeightsSortedDescending) {
  const Synthetic s(8, 5, 15);
  const OptRun run = mm_loop(s.criterion(), PenaltyConfig{PenaltyKind::p_epsilon, 0.1, 0.05}, OptimizerConfig{},
                             Vector::Ones(8));
  const CsvTable t = run.weights_table();
  ASSERT_EQ(t.rows.size(), 8u);
  const nlohmann::json j = run.to_json();
  EXPECT_EQ(j.at("outer_iterations"), run.iterates.size());
  EXPECT_EQ(run.iterates_table().rows.size(), run.iterates.size());
}

TEST(Binariness, Examples) {
  EXPECT_EQ(binariness_metric((Vector(4) << 0, 1, 1, 0).finished()), 0.0);
  EXPECT_EQ(binariness_metric((Vector(1) << 0.5).finished()), 0.5);
  EXPECT_NEAR(binariness_metric((Vector(3) << 0.02, 0.97, 1.0).finished()), 0.03, 1e-15);
}

TEST(CountActive, ThresholdTieIsInactive) {
  const Vector w = (Vector(5) << 0.5, 0.5000001, 0.2, 1.0, 0.0).finished();
  EXPECT_EQ(count_active(w, 0.5), 2);
}
