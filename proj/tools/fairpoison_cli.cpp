#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairpoison/attack.hpp"
#include "fairpoison/csv_io.hpp"
#include "fairpoison/experiment.hpp"
#include "fairpoison/metrics.hpp"
#include "fairpoison/serialize.hpp"

namespace fp = fairpoison;
namespace fs = std::filesystem;

namespace {

fp::ExperimentConfig resolve_config(const std::string& config_path,
                                    const std::string& preset,
                                    std::optional<std::uint64_t> seed,
                                    const std::string& out_dir) {
  fp::ExperimentConfig config;
  if (!config_path.empty() && !preset.empty())
    throw fp::ConfigError("give either --config or --preset, not both");
  if (!config_path.empty())
    config = fp::load_config(config_path);
  else if (!preset.empty())
    config = fp::preset_config(preset);
  else
    throw fp::ConfigError("one of --config or --preset is required");
  if (seed) config.master_seed = *seed;
  if (!out_dir.empty()) config.output_dir = out_dir;
  return config;
}

int command_prepare(const fp::ExperimentConfig& config, int repetition) {
  const fp::DataSplits splits = fp::prepare_repetition(config, repetition);
  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);
  fp::save_dataset_csv(splits.clean, (dir / "clean.csv").string());
  fp::save_dataset_csv(splits.test, (dir / "test.csv").string());
  fp::save_dataset_csv(splits.attack, (dir / "attack.csv").string());
  fp::save_dataset_csv(splits.hard, (dir / "hard.csv").string());
  const std::array<double, 3> ratios =
      config.split.kind == fp::SplitRecipe::Kind::ThreeWay
          ? config.split.ratios
          : std::array<double, 3>{config.split.clean_test[0],
                                  config.split.clean_test[1],
                                  config.split.attack_fraction};
  fp::write_split_manifest(splits, config.master_seed, ratios,
                           config.keep_fraction,
                           (dir / "manifest.json").string());
  std::cout << "prepared " << config.output_dir << ": clean "
            << splits.clean.size() << ", test " << splits.test.size()
            << ", attack " << splits.attack.size() << " (hard "
            << splits.hard.size() << ")\n";
  return 0;
}

int command_attack(const std::string& data_dir, const std::string& out_dir,
                   const fp::AttackConfig& attack_config) {
  const fs::path dir(data_dir);
  const fp::Dataset clean =
      fp::load_dataset_csv((dir / "clean.csv").string(), "clean");
  const fp::Dataset attack_pool =
      fp::load_dataset_csv((dir / "attack.csv").string(), "attack");
  fp::Dataset hard;
  if (fs::exists(dir / "hard.csv"))
    hard = fp::load_dataset_csv((dir / "hard.csv").string(), "hard");

  const fp::PoisonRun run =
      fp::generate_poison(clean, attack_pool, hard, attack_config);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  fp::save_poison_csv(run.poison, run.flipped, (out / "poison.csv").string());
  fp::write_trace_json(run, attack_config, (out / "trace.json").string());
  std::cout << "poison " << run.poison.size() << " points, digest "
            << run.digest() << "\n";
  return 0;
}

int command_train(const std::string& data_dir, const std::string& poison_path,
                  const std::string& model_kind, double delta,
                  const std::string& out_path) {
  const fs::path dir(data_dir);
  const fp::Dataset clean =
      fp::load_dataset_csv((dir / "clean.csv").string(), "clean");

  fp::Dataset train_data = clean;
  if (!poison_path.empty()) {
    fp::CsvSchema schema;
    schema.label_col = "label";
    schema.group_col = "group";
    schema.feature_cols = clean.feature_names();  // skip the flipped column
    const fp::Dataset poison = fp::load_dataset(poison_path, schema);
    train_data = fp::Dataset::concat(clean, poison, "train");
  }

  fp::ExperimentConfig defaults;
  fp::ModelSpec spec;
  spec.id = model_kind;
  if (model_kind == "unconstrained") {
    spec.kind = fp::ModelSpec::Kind::Unconstrained;
  } else if (model_kind == "reductions") {
    spec.kind = fp::ModelSpec::Kind::Reductions;
    spec.delta = delta;
  } else if (model_kind == "postprocess") {
    spec.kind = fp::ModelSpec::Kind::Postprocess;
  } else {
    throw fp::ConfigError("unknown model kind '" + model_kind + "'");
  }

  fp::FairClassifier fc = [&] {
    switch (spec.kind) {
      case fp::ModelSpec::Kind::Reductions:
        return fp::reductions_equalized_odds(train_data, spec.delta,
                                             defaults.reductions);
      case fp::ModelSpec::Kind::Postprocess: {
        const fp::LinearModel base = fp::train_unconstrained(
            train_data, defaults.train_loss, defaults.train_hyper);
        return fp::postprocess_equalized_odds(base, train_data);
      }
      case fp::ModelSpec::Kind::Unconstrained:
      default:
        return fp::FairClassifier::deterministic(fp::train_unconstrained(
            train_data, defaults.train_loss, defaults.train_hyper));
    }
  }();

  nlohmann::ordered_json report;
  report["model"] = model_kind;
  report["train_accuracy"] = fp::expected_accuracy(fc, train_data);
  report["train_gap"] = fp::fairness_gap(fc, train_data);
  if (fs::exists(dir / "test.csv")) {
    const fp::Dataset test =
        fp::load_dataset_csv((dir / "test.csv").string(), "test");
    report["test_accuracy"] = fp::expected_accuracy(fc, test);
    report["test_gap"] = fp::fairness_gap(fc, test);
  }
  std::cout << report.dump(2) << '\n';

  if (!out_path.empty()) fp::save_model_json(fc, out_path);
  return 0;
}

int command_grid(const fp::ExperimentConfig& config,
                 const std::string& format) {
  fs::create_directories(config.output_dir);
  const fp::OutputFormat fmt = format == "jsonl" ? fp::OutputFormat::Jsonl
                                                 : fp::OutputFormat::Csv;
  const auto rows = fp::run_grid(config);
  const fs::path dir(config.output_dir);
  const std::string rows_path =
      (dir / (format == "jsonl" ? "rows.jsonl" : "rows.csv")).string();
  const std::string summary_path = fp::emit_results(rows, fmt, rows_path);

  std::size_t failures = 0;
  for (const auto& row : rows)
    if (row.status != "ok") ++failures;
  std::cout << "wrote " << rows.size() << " rows to " << rows_path << " ("
            << failures << " failed), summary " << summary_path << "\n";
  return failures == rows.size() ? 3 : 0;
}

int command_report(const std::string& rows_path, const std::string& out_path) {
  const auto rows = fp::read_rows_csv(rows_path);
  const auto summary = fp::aggregate_rows(rows);
  fp::write_summary_csv(summary, out_path);
  std::cout << "wrote " << summary.size() << " summary rows to " << out_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fairpoison: poisoning attacks against fairness-constrained linear "
      "classifiers, with a reproducible experiment grid"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON");
    cmd->add_option("--preset", preset,
                    "built-in config: compas|adult|synthetic-small");
    cmd->add_option("--seed", seed, "master seed override");
    cmd->add_option("--out", out_dir, "output directory");
  };

  auto* prepare = app.add_subcommand(
      "prepare", "ingest or generate data, filter hard examples, split");
  int repetition = 0;
  add_common(prepare);
  prepare->add_option("--repetition", repetition,
                      "repetition index to materialize");

  auto* attack = app.add_subcommand(
      "attack", "generate one poisoning set from a prepared directory");
  std::string data_dir;
  std::string algorithm = "surrogate";
  std::string mode = "sampling";
  double epsilon = 0.1;
  double lambda_scale = 0.0;
  double eta = 0.001;
  double schedule_d = 0.0;
  double schedule_g = 0.0;
  std::uint64_t attack_seed = 0;
  attack->add_option("--data", data_dir, "prepared data directory")
      ->required();
  attack->add_option("--algorithm", algorithm,
                     "ogd|surrogate|random|flip|hard");
  attack->add_option("--mode", mode, "sampling|labeling");
  attack->add_option("--epsilon", epsilon, "poisoning ratio in [0, 0.5]");
  attack->add_option("--lambda-scale", lambda_scale,
                     "penalty scale, lambda = scale * epsilon");
  attack->add_option("--eta", eta, "learning rate (fixed schedule)");
  attack->add_option("--schedule-d", schedule_d,
                     "enable the d/(G sqrt(t)) step schedule: diameter bound");
  attack->add_option("--schedule-g", schedule_g,
                     "gradient-norm bound for the decaying step schedule");
  attack->add_option("--seed", attack_seed, "attack seed");
  attack->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand(
      "train", "train one model on a prepared (optionally poisoned) set");
  std::string poison_path;
  std::string model_kind = "unconstrained";
  double delta = 0.01;
  std::string model_out;
  train->add_option("--data", data_dir, "prepared data directory")->required();
  train->add_option("--poison", poison_path, "poison CSV to append");
  train->add_option("--model", model_kind,
                    "unconstrained|reductions|postprocess");
  train->add_option("--delta", delta, "reductions target gap");
  train->add_option("--model-out", model_out, "write model JSON here");

  auto* grid = app.add_subcommand("grid", "run the full experiment grid");
  add_common(grid);
  grid->add_option("--format", format, "csv|jsonl");

  auto* report =
      app.add_subcommand("report", "aggregate emitted rows to summary tables");
  std::string rows_path;
  std::string report_out = "summary.csv";
  report->add_option("--in", rows_path, "rows CSV path")->required();
  report->add_option("--out", report_out, "summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      return command_prepare(resolve_config(config_path, preset, seed, out_dir),
                             repetition);
    }
    if (attack->parsed()) {
      fp::AttackConfig attack_config;
      attack_config.epsilon = epsilon;
      attack_config.lambda = lambda_scale * epsilon;
      attack_config.eta = eta;
      attack_config.mode = mode == "labeling" ? fp::AttackMode::Labeling
                                              : fp::AttackMode::Sampling;
      attack_config.seed = attack_seed;
      if (schedule_d != 0.0 || schedule_g != 0.0)
        attack_config.schedule = {fp::StepSchedule::Kind::Corollary1,
                                  schedule_d, schedule_g};
      if (algorithm == "ogd") attack_config.algorithm = fp::AttackAlgorithm::Ogd;
      else if (algorithm == "surrogate")
        attack_config.algorithm = fp::AttackAlgorithm::Surrogate;
      else if (algorithm == "random")
        attack_config.algorithm = fp::AttackAlgorithm::Random;
      else if (algorithm == "flip")
        attack_config.algorithm = fp::AttackAlgorithm::Flip;
      else if (algorithm == "hard")
        attack_config.algorithm = fp::AttackAlgorithm::Hard;
      else throw fp::ConfigError("unknown algorithm '" + algorithm + "'");
      return command_attack(data_dir, out_dir, attack_config);
    }
    if (train->parsed())
      return command_train(data_dir, poison_path, model_kind, delta, model_out);
    if (grid->parsed())
      return command_grid(resolve_config(config_path, preset, seed, out_dir),
                          format);
    if (report->parsed()) return command_report(rows_path, report_out);
  } catch (const fp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const fp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
