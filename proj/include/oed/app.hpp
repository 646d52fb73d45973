#pragma once

// Run configuration, experiment drivers and result persistence behind the
// `oed` command-line tool.

#include "oed/criteria.hpp"
#include "oed/design.hpp"
#include "oed/model.hpp"
#include "oed/sketch.hpp"
#include "oed/table.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace oed::app {

enum class Experiment { design, error_study, bound_study, compare_random, posterior };

std::string to_string(Experiment e);
/// Accepts both `error_study` and `error-study` spellings.
Experiment experiment_from_string(const std::string& s);

enum class EstimatorKind { randomized, eigk, frozen, exact };

std::string to_string(EstimatorKind e);
EstimatorKind estimator_from_string(const std::string& s);

struct ObsConfig {
  int lattice_per_axis = 7;
  std::vector<int> nodes;  // overrides the lattice when non-empty
  std::vector<double> obs_times{1.0, 2.0, 3.5};
  std::vector<double> sigmas;  // empty: noise_percent of the peak noise-free datum
  double noise_percent = 2.0;
};

/// Synthetic initial condition: unit-amplitude Gaussian bumps.
struct TruthConfig {
  std::vector<std::array<double, 2>> centers{{0.35, 0.65}, {0.65, 0.35}};
  double width = 0.1;
  std::uint64_t data_seed = 7;
};

struct ErrorStudyConfig {
  std::vector<int> ells;  // empty: rank/8, rank/4, rank/2, rank
  int trials = 20;
};

struct BoundStudyConfig {
  std::vector<int> ks{5, 10, 20};
  std::vector<int> ps{2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> qs{1, 2};
  int trials = 200;
};

struct CompareConfig {
  std::vector<double> gammas{1.0, 3.0, 5.0};
  int n_random = 15;
  std::uint64_t seed = 11;
};

struct PosteriorConfig {
  std::vector<double> weights;  // empty: all sensors at weight 1
};

struct RunConfig {
  Experiment experiment = Experiment::design;
  std::uint64_t seed = 1;
  std::string output_dir;
  AdvDiffModel model;
  PriorOperator prior;
  ObsConfig obs;
  TruthConfig truth;
  SketchConfig sketch;
  Criterion criterion = Criterion::aopt;
  EstimatorKind estimator = EstimatorKind::randomized;
  PenaltyConfig penalty;
  OptimizerConfig optimizer;
  std::vector<double> w0;  // empty: all ones
  ErrorStudyConfig error_study;
  BoundStudyConfig bound_study;
  CompareConfig compare;
  PosteriorConfig posterior;
  bool materialize = true;
  std::int64_t dense_cap = 50'000'000;
  std::string cache_dir;
};

/// Parse and validate; throws ConfigError naming the offending JSON path.
RunConfig parse_config(const nlohmann::json& j);
/// Throws IoError when the file is missing or unreadable.
RunConfig load_config(const std::filesystem::path& path);
/// Complete configuration, every default spelled out.
nlohmann::json to_json(const RunConfig& cfg);
/// SHA-256 of the canonical serialization, first 16 hex digits.
std::string config_hash(const RunConfig& cfg);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Everything an experiment needs, assembled once.
struct Workspace {
  explicit Workspace(const RunConfig& cfg);

  std::optional<ModelProblem> problem;
  NoiseWeights noise;
  Vector truth;
  Vector clean_data;
  Vector data;
  LinearOperator fcal;
  LinearOperator z;
  CounterPtr charged_solves;  // applications of a materialized fcal

  /// Model solves plus charged applications of the materialized operator.
  std::int64_t pde_solves() const;
  /// s for the mode, via the disk cache when one is configured.
  const PrecomputedS& s(Criterion mode);

 private:
  std::string cache_key_;
  std::filesystem::path cache_dir_;
  std::optional<PrecomputedS> s_aopt_;
  std::optional<PrecomputedS> s_mod_;
};

Vector gaussian_bumps(const Grid2D& grid, const TruthConfig& truth);

/// Criterion callback for the optimizer built from the configured estimator.
CriterionFn make_criterion(Workspace& ws, const RunConfig& cfg, Criterion mode);

struct ExperimentResult {
  Experiment kind = Experiment::design;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::int64_t pde_solves = 0;
  nlohmann::json summary;
  std::vector<CsvTable> tables;
  std::optional<OptRun> run;
};

/// Dispatch on cfg.experiment. On failure the partial result is written to
/// `flush_dir` (when given) before the error propagates.
ExperimentResult run_experiment(const RunConfig& cfg, const std::filesystem::path* flush_dir = nullptr);

/// summary.json, one CSV per table, and manifest.json with SHA-256 per file.
nlohmann::json write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace oed::app
