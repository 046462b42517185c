#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpoison/attack.hpp"
#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"
#include "fairpoison/fair_train.hpp"
#include "fairpoison/preprocess.hpp"
#include "fairpoison/synthetic.hpp"

namespace fairpoison {

struct ModelSpec {
  enum class Kind { Unconstrained, Reductions, Postprocess };
  std::string id;
  Kind kind = Kind::Unconstrained;
  double delta = 0.0;  // reductions target gap
};

struct AttackSpec {
  std::string id;
  AttackAlgorithm algorithm = AttackAlgorithm::Random;
  AttackMode mode = AttackMode::Sampling;
  /// The penalty follows the poisoning ratio: lambda = lambda_scale * epsilon.
  double lambda_scale = 0.0;
  std::vector<double> epsilons;  // ascending, within [0, 0.5]
};

/// How the retained pool is cut into clean/test/attack parts.
struct SplitRecipe {
  enum class Kind {
    ThreeWay,     // one shuffle, ratios (clean : test : attack)
    AttackFirst,  // attack_fraction peeled off first, remainder clean : test
  };
  Kind kind = Kind::ThreeWay;
  std::array<double, 3> ratios{4.0, 1.0, 1.0};
  double attack_fraction = 0.5;
  std::array<double, 2> clean_test{7.0, 3.0};
};

struct CsvSource {
  std::string data_path;
  std::string schema_path;
};

struct ExperimentConfig {
  // Exactly one source.
  std::optional<CsvSource> csv;
  std::optional<SyntheticSpec> synthetic;

  double keep_fraction = 0.6;
  SplitRecipe split;
  std::uint64_t master_seed = 1;
  int repetitions = 20;

  std::vector<ModelSpec> models;
  std::vector<AttackSpec> attacks;
  std::string output_dir = ".";

  FilterSpec filter;
  LossSpec train_loss{LossKind::Logistic, 1e-4};
  TrainHyper train_hyper{0.5, 400, 0, false};
  ReductionsHyper reductions;
  double attack_eta = 0.001;
  double attack_regularization = 1e-4;

  void validate() const;
};

/// Parses a config JSON file; unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);

/// Built-in configurations: "compas" (COMPAS-shaped synthetic pipeline),
/// "adult" (Adult-shaped, attack-first split), "synthetic-small" (fast smoke
/// configuration).
ExperimentConfig preset_config(const std::string& name);

/// One emitted grid cell. Accuracies and gaps are in [0,1]; delta is NaN for
/// models without a target gap; poison fractions are all zero when eps = 0.
struct MetricsRow {
  int run_id = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
  std::string model_id;
  double delta = 0.0;
  std::string attack_id;
  std::string mode;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::string status = "ok";

  double test_acc = 0.0;
  double test_acc_majority = 0.0;
  double test_acc_minority = 0.0;
  double train_acc_clean = 0.0;
  double train_acc_poison = 0.0;
  double train_gap = 0.0;
  double test_gap = 0.0;
  double reference_gap = 0.0;
  std::array<std::array<double, 2>, 2> poison_fracs{};  // [y][s]
  std::string poison_digest;
};

/// One repetition's prepared pipeline: standardize, filter hard examples,
/// split per recipe (hard pool appended to the attack set).
DataSplits prepare_repetition(const ExperimentConfig& config, int repetition);

/// Runs the repetition x attack x epsilon x model grid. Poison is generated
/// once per (repetition, attack, epsilon) cell and shared by every model;
/// eps = 0 rows reuse the benign training of the repetition. Cell failures
/// are recorded in the row status instead of aborting the grid.
std::vector<MetricsRow> run_grid(const ExperimentConfig& config);

enum class OutputFormat { Csv, Jsonl };

/// Writes rows in a stable column order plus a mean/stddev summary
/// (aggregated over repetitions) next to them. Returns the summary path.
std::string emit_results(const std::vector<MetricsRow>& rows,
                         OutputFormat format, const std::string& path);

/// Reads back rows written by emit_results in CSV format.
std::vector<MetricsRow> read_rows_csv(const std::string& path);

struct SummaryRow {
  std::string model_id;
  double delta = 0.0;
  std::string attack_id;
  std::string mode;
  double epsilon = 0.0;
  int count = 0;
  // mean/stddev per metric, in the MetricsRow metric order
  std::array<double, 8> mean{};
  std::array<double, 8> stddev{};
};

/// Aggregates ok-rows over repetitions, keyed by (model, attack, mode, eps).
std::vector<SummaryRow> aggregate_rows(const std::vector<MetricsRow>& rows);

void write_summary_csv(const std::vector<SummaryRow>& summary,
                       const std::string& path);

}  // namespace fairpoison
