// Command-line front end: dataset generation, training, calibration,
// evaluation and noise sweeps, all reproducible from a single --seed.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "vbs/baselines.hpp"
#include "vbs/io.hpp"
#include "vbs/metrics.hpp"
#include "vbs/noise.hpp"
#include "vbs/rng.hpp"
#include "vbs/smoothing.hpp"
#include "vbs/synth.hpp"
#include "vbs/types.hpp"

namespace fs = std::filesystem;

namespace {

struct GenDataArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t n_train = 5000;
  std::size_t n_val = 1000;
  std::size_t n_test = 1000;
  int classes = 10;
  int patches = 8;
  int patch_dim = 16;
  double signal = 1.0;
  double patch_noise = 1.0;
  double informative_fraction = 0.75;
};

struct TrainArgs {
  std::string in_path;
  std::string out_path;
  std::string log_path;
  int epochs = 40;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

struct CalibrateArgs {
  std::string method;
  std::string in_path;
  std::string out_path;
  std::string model_path;
  std::vector<std::string> member_paths;
  double alpha = 1.0;
  std::string beta_mode = "mean-offset";
  double beta_value = 0.0;
  double beta_offset = 0.0;
  double beta_percentile = 95.0;
  int pool_kernel = 1;
  int pool_stride = 1;
  double logit_scale = 1.0;
};

struct EvaluateArgs {
  std::string method;
  std::vector<std::string> in_paths;
  std::string labels_path;
  std::string model_path;
  std::vector<std::string> member_paths;
  std::string calibration_path;
  std::string out_path;
  std::string bins_csv_path;
  int n_bins = 10;
  double logit_scale = 1.0;
};

struct SweepArgs {
  std::string in_path;
  std::string model_path;
  std::string calibration_path;
  std::string noise = "gaussian";
  std::string lambda_grid = "0:1:20";
  std::string out_path;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double beta_value = 0.0;
  int pool_kernel = 1;
  int pool_stride = 1;
};

vbs::BetaPolicy beta_policy_from_flags(const std::string& mode, double value,
                                       double offset, double percentile) {
  if (mode == "fixed") return vbs::BetaPolicy::fixed(value);
  if (mode == "mean-offset") return vbs::BetaPolicy::mean_offset(offset);
  if (mode == "neg-percentile") return vbs::BetaPolicy::neg_percentile(percentile);
  vbs::raise(vbs::ErrorCode::ConfigError,
             "unknown --beta-mode '" + mode +
                 "', expected fixed, mean-offset or neg-percentile");
}

std::vector<double> parse_lambda_grid(const std::string& text) {
  // start:stop:steps, linearly spaced and inclusive of both ends.
  const auto first = text.find(':');
  const auto second = text.find(':', first + 1);
  vbs::require(first != std::string::npos && second != std::string::npos,
               vbs::ErrorCode::ConfigError,
               "--lambda-grid expects <start:stop:steps>");
  try {
    const double start = std::stod(text.substr(0, first));
    const double stop = std::stod(text.substr(first + 1, second - first - 1));
    const long steps = std::stol(text.substr(second + 1));
    vbs::require(steps >= 1, vbs::ErrorCode::ConfigError,
                 "--lambda-grid needs at least 1 step");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(steps));
    if (steps == 1) {
      grid.push_back(start);
    } else {
      for (long i = 0; i < steps; ++i) {
        grid.push_back(start + (stop - start) * static_cast<double>(i) /
                                   static_cast<double>(steps - 1));
      }
    }
    return grid;
  } catch (const std::logic_error&) {
    vbs::raise(vbs::ErrorCode::ConfigError,
               "cannot parse --lambda-grid '" + text + "'");
  }
}

vbs::LogitMatrix scaled_logits(const vbs::PatchClassifier& model,
                               const vbs::SynthSample& sample, double scale) {
  vbs::LogitMatrix logits = vbs::predict_logits(model, sample);
  if (scale == 1.0) return logits;
  vbs::Matrix values = logits.values();
  for (double& v : values.data()) v *= scale;
  return vbs::LogitMatrix(std::move(values));
}

vbs::EnsembleLogits scaled_ensemble_logits(
    std::span<const vbs::PatchClassifier> members, const vbs::SynthSample& sample,
    double scale) {
  vbs::EnsembleLogits logits = vbs::ensemble_logits_for_sample(members, sample);
  if (scale == 1.0) return logits;
  vbs::Matrix values = logits.values();
  for (double& v : values.data()) v *= scale;
  return vbs::EnsembleLogits(std::move(values));
}

std::vector<vbs::PatchClassifier> load_members(const std::vector<std::string>& paths) {
  vbs::require(paths.size() >= 2, vbs::ErrorCode::InsufficientMembers,
               "ensemble methods need at least 2 --members");
  std::vector<vbs::PatchClassifier> members;
  members.reserve(paths.size());
  for (const std::string& p : paths) members.push_back(vbs::io::read_model(p));
  return members;
}

int cmd_gen_data(const GenDataArgs& args) {
  fs::create_directories(args.out_dir);
  const struct {
    const char* name;
    std::size_t count;
  } splits[] = {{"train", args.n_train}, {"val", args.n_val}, {"test", args.n_test}};
  for (const auto& split : splits) {
    vbs::SynthDatasetSpec spec;
    spec.n_samples = split.count;
    spec.classes = args.classes;
    spec.patches = args.patches;
    spec.patch_dim = args.patch_dim;
    spec.signal_strength = args.signal;
    spec.patch_noise = args.patch_noise;
    spec.informative_fraction = args.informative_fraction;
    spec.seed = vbs::rng::derive(args.seed, std::string("gen-data.") + split.name);
    const auto samples = vbs::generate_dataset(spec);
    vbs::io::write_dataset(samples, args.classes,
                           fs::path(args.out_dir) / (std::string(split.name) + ".vsd"));
  }
  return 0;
}

int cmd_train(const TrainArgs& args) {
  int classes = 0;
  const auto dataset = vbs::io::read_dataset(args.in_path, &classes);
  const int patch_dim = static_cast<int>(dataset.front().patches.cols());

  vbs::PatchClassifier init = vbs::random_init(
      classes, patch_dim, vbs::rng::derive(args.seed, "train.init"));
  std::vector<vbs::TrainLogEntry> log;
  const vbs::PatchClassifier model =
      vbs::train(std::move(init), dataset, args.epochs, args.learning_rate,
                 vbs::rng::derive(args.seed, "train.shuffle"), &log);

  vbs::io::write_model(model, args.out_path);
  std::string log_text = "epoch loss accuracy\n";
  char line[96];
  for (const vbs::TrainLogEntry& entry : log) {
    std::snprintf(line, sizeof(line), "%d %.9g %.9g\n", entry.epoch, entry.loss,
                  entry.accuracy);
    log_text += line;
  }
  const std::string log_path =
      args.log_path.empty() ? args.out_path + ".log" : args.log_path;
  vbs::io::write_text_atomic(log_path, log_text);
  return 0;
}

void reject_test_split(const std::string& path) {
  // Path roles: calibration must only ever see validation data.
  std::string stem = fs::path(path).stem().string();
  std::transform(stem.begin(), stem.end(), stem.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  vbs::require(stem.find("test") == std::string::npos, vbs::ErrorCode::ConfigError,
               "calibrate must not read the test split: " + path);
}

int cmd_calibrate(const CalibrateArgs& args) {
  reject_test_split(args.in_path);
  const auto dataset = vbs::io::read_dataset(args.in_path);

  vbs::io::CalibrationRecord record;
  record.method = args.method;

  if (args.method == "variance_smoothing") {
    vbs::require(!args.model_path.empty(), vbs::ErrorCode::ConfigError,
                 "--model is required for variance_smoothing");
    const auto model = vbs::io::read_model(args.model_path);
    vbs::SmoothingConfig config;
    config.alpha = args.alpha;
    config.pool_kernel = args.pool_kernel;
    config.pool_stride = args.pool_stride;
    config.beta_policy = beta_policy_from_flags(
        args.beta_mode, args.beta_value, args.beta_offset, args.beta_percentile);
    config.validate();

    std::vector<double> sigma_bars;
    sigma_bars.reserve(dataset.size());
    for (const vbs::SynthSample& sample : dataset) {
      const vbs::LogitMatrix logits = scaled_logits(model, sample, args.logit_scale);
      const vbs::PooledLogits pooled =
          vbs::pool_logits(logits, config.pool_kernel, config.pool_stride);
      const vbs::SigmaStats stats =
          vbs::aggregate_sigma(vbs::class_sigma(pooled), config.alpha, 0.0);
      sigma_bars.push_back(stats.sigma_bar());
    }
    record.beta = vbs::calibrate_beta(sigma_bars, config.beta_policy);
    record.config = config;
  } else if (args.method == "ensemble_smoothing") {
    const auto members = load_members(args.member_paths);
    vbs::SmoothingConfig config;
    config.alpha = args.alpha;
    config.beta_policy = beta_policy_from_flags(
        args.beta_mode, args.beta_value, args.beta_offset, args.beta_percentile);
    config.validate();

    std::vector<double> sigma_bars;
    sigma_bars.reserve(dataset.size());
    for (const vbs::SynthSample& sample : dataset) {
      const vbs::EnsembleLogits logits =
          scaled_ensemble_logits(members, sample, args.logit_scale);
      const vbs::SigmaStats stats =
          vbs::aggregate_sigma(vbs::ensemble_sigma(logits), config.alpha, 0.0);
      sigma_bars.push_back(stats.sigma_bar());
    }
    record.beta = vbs::calibrate_beta(sigma_bars, config.beta_policy);
    record.config = config;
  } else if (args.method == "temp_scaling") {
    vbs::require(!args.model_path.empty(), vbs::ErrorCode::ConfigError,
                 "--model is required for temp_scaling");
    const auto model = vbs::io::read_model(args.model_path);
    std::vector<std::vector<double>> mean_logits;
    std::vector<int> labels;
    mean_logits.reserve(dataset.size());
    labels.reserve(dataset.size());
    for (const vbs::SynthSample& sample : dataset) {
      const vbs::LogitMatrix logits = scaled_logits(model, sample, args.logit_scale);
      mean_logits.push_back(vbs::mean_over_rows(logits.values()));
      labels.push_back(sample.label);
    }
    record.temperature = vbs::fit_temperature(mean_logits, labels);
    record.beta.n_validation = dataset.size();
  } else {
    vbs::raise(vbs::ErrorCode::ConfigError,
               "method '" + args.method + "' does not need calibration");
  }

  vbs::io::write_text_atomic(args.out_path, vbs::io::calibration_to_json(record));
  return 0;
}

std::vector<vbs::ProbVector> dataset_predictions(const EvaluateArgs& args,
                                                 const fs::path& dataset_path,
                                                 std::vector<int>& labels) {
  const auto dataset = vbs::io::read_dataset(dataset_path);
  labels.clear();
  labels.reserve(dataset.size());
  for (const vbs::SynthSample& sample : dataset) labels.push_back(sample.label);

  std::optional<vbs::io::CalibrationRecord> record;
  if (!args.calibration_path.empty()) {
    record = vbs::io::calibration_from_json(
        vbs::io::read_text(args.calibration_path), args.calibration_path);
  }
  const auto need_record = [&](const char* method) {
    vbs::require(record.has_value(), vbs::ErrorCode::ConfigError,
                 std::string("--calibration is required for ") + method);
    vbs::require(record->method == method, vbs::ErrorCode::ConfigError,
                 "calibration record was fitted for '" + record->method +
                     "', not '" + method + "'");
  };

  std::vector<vbs::ProbVector> predictions;
  predictions.reserve(dataset.size());

  if (args.method == "ensemble_mean" || args.method == "ensemble_smoothing") {
    const auto members = load_members(args.member_paths);
    if (args.method == "ensemble_smoothing") need_record("ensemble_smoothing");
    for (const vbs::SynthSample& sample : dataset) {
      const vbs::EnsembleLogits logits =
          scaled_ensemble_logits(members, sample, args.logit_scale);
      if (args.method == "ensemble_mean") {
        predictions.push_back(vbs::ensemble_mean_predict(logits));
      } else {
        predictions.push_back(
            vbs::ensemble_smoothed_predict(logits, record->config.alpha,
                                           record->beta.beta)
                .probs);
      }
    }
    return predictions;
  }

  vbs::require(!args.model_path.empty(), vbs::ErrorCode::ConfigError,
               "--model is required for method " + args.method);
  const auto model = vbs::io::read_model(args.model_path);
  for (const vbs::SynthSample& sample : dataset) {
    const vbs::LogitMatrix logits = scaled_logits(model, sample, args.logit_scale);
    if (args.method == "conventional") {
      predictions.push_back(vbs::conventional_predict(logits));
    } else if (args.method == "naive_average") {
      predictions.push_back(vbs::naive_subpatch_average(logits));
    } else if (args.method == "temp_scaling") {
      need_record("temp_scaling");
      predictions.push_back(vbs::apply_temperature(
          vbs::mean_over_rows(logits.values()), record->temperature.t));
    } else if (args.method == "variance_smoothing") {
      need_record("variance_smoothing");
      predictions.push_back(
          vbs::variance_smoothed_forward(logits, record->config, record->beta)
              .probs);
    } else {
      vbs::raise(vbs::ErrorCode::ConfigError, "unknown method '" + args.method + "'");
    }
  }
  return predictions;
}

std::vector<vbs::ProbVector> logit_file_predictions(const EvaluateArgs& args) {
  std::optional<vbs::io::CalibrationRecord> record;
  if (!args.calibration_path.empty()) {
    record = vbs::io::calibration_from_json(
        vbs::io::read_text(args.calibration_path), args.calibration_path);
  }
  std::vector<vbs::ProbVector> predictions;
  predictions.reserve(args.in_paths.size());
  for (const std::string& path : args.in_paths) {
    const auto loaded = vbs::io::read_logits(path);
    if (const auto* single = std::get_if<vbs::LogitMatrix>(&loaded)) {
      if (args.method == "conventional") {
        predictions.push_back(vbs::conventional_predict(*single));
      } else if (args.method == "naive_average") {
        predictions.push_back(vbs::naive_subpatch_average(*single));
      } else if (args.method == "temp_scaling") {
        vbs::require(record && record->method == "temp_scaling",
                     vbs::ErrorCode::ConfigError,
                     "--calibration with a temp_scaling record is required");
        predictions.push_back(vbs::apply_temperature(
            vbs::mean_over_rows(single->values()), record->temperature.t));
      } else if (args.method == "variance_smoothing") {
        vbs::require(record && record->method == "variance_smoothing",
                     vbs::ErrorCode::ConfigError,
                     "--calibration with a variance_smoothing record is required");
        predictions.push_back(
            vbs::variance_smoothed_forward(*single, record->config, record->beta)
                .probs);
      } else {
        vbs::raise(vbs::ErrorCode::ConfigError,
                   "method '" + args.method + "' cannot evaluate VSL files");
      }
    } else {
      const auto& ensemble = std::get<vbs::EnsembleLogits>(loaded);
      if (args.method == "ensemble_mean") {
        predictions.push_back(vbs::ensemble_mean_predict(ensemble));
      } else if (args.method == "ensemble_smoothing") {
        vbs::require(record && record->method == "ensemble_smoothing",
                     vbs::ErrorCode::ConfigError,
                     "--calibration with an ensemble_smoothing record is required");
        predictions.push_back(
            vbs::ensemble_smoothed_predict(ensemble, record->config.alpha,
                                           record->beta.beta)
                .probs);
      } else {
        vbs::raise(vbs::ErrorCode::ConfigError,
                   "method '" + args.method + "' cannot evaluate VSE files");
      }
    }
  }
  return predictions;
}

int cmd_evaluate(const EvaluateArgs& args) {
  vbs::require(!args.in_paths.empty(), vbs::ErrorCode::ConfigError,
               "--in requires at least one path");

  std::vector<vbs::ProbVector> predictions;
  std::vector<int> labels;
  const bool dataset_mode =
      args.in_paths.size() == 1 && fs::path(args.in_paths.front()).extension() == ".vsd";
  if (dataset_mode) {
    predictions = dataset_predictions(args, args.in_paths.front(), labels);
  } else {
    vbs::require(!args.labels_path.empty(), vbs::ErrorCode::ConfigError,
                 "--labels is required when evaluating logit files");
    predictions = logit_file_predictions(args);
    labels = vbs::io::read_labels(args.labels_path);
  }

  const vbs::CalibrationReport report =
      vbs::evaluate(predictions, labels, args.n_bins);
  vbs::io::write_text_atomic(args.out_path, vbs::io::report_to_json(report));

  const std::string bins_path =
      args.bins_csv_path.empty()
          ? (fs::path(args.out_path).replace_extension().string() + "_bins.csv")
          : args.bins_csv_path;
  vbs::io::write_text_atomic(bins_path, vbs::io::bins_to_csv(report.bins));
  return 0;
}

int cmd_sweep(const SweepArgs& args) {
  const auto dataset = vbs::io::read_dataset(args.in_path);
  const auto model = vbs::io::read_model(args.model_path);
  const auto grid = parse_lambda_grid(args.lambda_grid);

  vbs::SmoothingConfig config;
  vbs::BetaCalibration beta;
  if (!args.calibration_path.empty()) {
    const auto record = vbs::io::calibration_from_json(
        vbs::io::read_text(args.calibration_path), args.calibration_path);
    vbs::require(record.method == "variance_smoothing", vbs::ErrorCode::ConfigError,
                 "sweep needs a variance_smoothing calibration record");
    config = record.config;
    beta = record.beta;
  } else {
    config.alpha = args.alpha;
    config.pool_kernel = args.pool_kernel;
    config.pool_stride = args.pool_stride;
    config.beta_policy = vbs::BetaPolicy::fixed(args.beta_value);
    config.validate();
    beta = vbs::BetaCalibration::fixed(args.beta_value);
  }

  const vbs::SweepCurve curve = vbs::noise_sweep(
      model, dataset, vbs::noise_kind_from_string(args.noise), grid, config, beta,
      vbs::rng::derive(args.seed, "sweep"));
  vbs::io::write_text_atomic(args.out_path, vbs::sweep_to_csv(curve));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-based smoothing toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate synthetic dataset splits");
  gen->add_option("--out", gen_args.out_dir, "Output directory")->required();
  gen->add_option("--seed", gen_args.seed, "Run seed");
  gen->add_option("--n-train", gen_args.n_train, "Training samples");
  gen->add_option("--n-val", gen_args.n_val, "Validation samples");
  gen->add_option("--n-test", gen_args.n_test, "Test samples");
  gen->add_option("--classes", gen_args.classes, "Class count K");
  gen->add_option("--patches", gen_args.patches, "Patches per sample T");
  gen->add_option("--patch-dim", gen_args.patch_dim, "Patch dimension d");
  gen->add_option("--signal", gen_args.signal, "Signal strength");
  gen->add_option("--patch-noise", gen_args.patch_noise, "Patch noise level");
  gen->add_option("--informative-fraction", gen_args.informative_fraction,
                  "Share of informative patches");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train the patch classifier");
  train->add_option("--in", train_args.in_path, "Training dataset (.vsd)")->required();
  train->add_option("--out", train_args.out_path, "Model output (.vsm)")->required();
  train->add_option("--log", train_args.log_path, "Training log output");
  train->add_option("--epochs", train_args.epochs, "Epochs");
  train->add_option("--lr", train_args.learning_rate, "Learning rate");
  train->add_option("--seed", train_args.seed, "Run seed");

  CalibrateArgs cal_args;
  CLI::App* cal = app.add_subcommand(
      "calibrate", "Fit beta or temperature on a validation split");
  cal->add_option("--method", cal_args.method,
                  "variance_smoothing, ensemble_smoothing or temp_scaling")
      ->required();
  cal->add_option("--in", cal_args.in_path, "Validation dataset (.vsd)")->required();
  cal->add_option("--out", cal_args.out_path, "Calibration record (JSON)")->required();
  cal->add_option("--model", cal_args.model_path, "Model file (.vsm)");
  cal->add_option("--members", cal_args.member_paths, "Ensemble member models");
  cal->add_option("--alpha", cal_args.alpha, "Smoothing strength alpha");
  cal->add_option("--beta-mode", cal_args.beta_mode,
                  "fixed, mean-offset or neg-percentile");
  cal->add_option("--beta-value", cal_args.beta_value, "Beta for fixed mode");
  cal->add_option("--beta-offset", cal_args.beta_offset, "Offset for mean-offset mode");
  cal->add_option("--beta-percentile", cal_args.beta_percentile,
                  "q for neg-percentile mode");
  cal->add_option("--pool-kernel", cal_args.pool_kernel, "Average-pooling kernel");
  cal->add_option("--pool-stride", cal_args.pool_stride, "Average-pooling stride");
  cal->add_option("--logit-scale", cal_args.logit_scale,
                  "Multiply logits by this factor");

  EvaluateArgs eval_args;
  CLI::App* eval = app.add_subcommand("evaluate", "Evaluate one method on a split");
  eval->add_option("--method", eval_args.method, "Prediction method")->required();
  eval->add_option("--in", eval_args.in_paths,
                   "Dataset (.vsd) or logit files (.vsl/.vse)")
      ->required();
  eval->add_option("--labels", eval_args.labels_path,
                   "Label file for logit-file evaluation");
  eval->add_option("--model", eval_args.model_path, "Model file (.vsm)");
  eval->add_option("--members", eval_args.member_paths, "Ensemble member models");
  eval->add_option("--calibration", eval_args.calibration_path,
                   "Calibration record (JSON)");
  eval->add_option("--out", eval_args.out_path, "Report output (JSON)")->required();
  eval->add_option("--bins-csv", eval_args.bins_csv_path,
                   "Reliability bins CSV output");
  eval->add_option("--bins", eval_args.n_bins, "Confidence bin count");
  eval->add_option("--logit-scale", eval_args.logit_scale,
                   "Multiply logits by this factor");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Noise sweep of the smoothing path");
  sweep->add_option("--in", sweep_args.in_path, "Dataset (.vsd)")->required();
  sweep->add_option("--model", sweep_args.model_path, "Model file (.vsm)")->required();
  sweep->add_option("--calibration", sweep_args.calibration_path,
                    "variance_smoothing calibration record");
  sweep->add_option("--noise", sweep_args.noise,
                    "gaussian, speckle, affine or elastic");
  sweep->add_option("--lambda-grid", sweep_args.lambda_grid,
                    "Grid as <start:stop:steps>");
  sweep->add_option("--out", sweep_args.out_path, "Curve CSV output")->required();
  sweep->add_option("--seed", sweep_args.seed, "Run seed");
  sweep->add_option("--alpha", sweep_args.alpha, "Alpha when no record is given");
  sweep->add_option("--beta-value", sweep_args.beta_value,
                    "Fixed beta when no record is given");
  sweep->add_option("--pool-kernel", sweep_args.pool_kernel,
                    "Pooling kernel when no record is given");
  sweep->add_option("--pool-stride", sweep_args.pool_stride,
                    "Pooling stride when no record is given");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: ConfigError: " << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (cal->parsed()) return cmd_calibrate(cal_args);
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
  } catch (const vbs::Error& e) {
    std::cerr << "error: " << vbs::error_code_name(e.code()) << ": " << e.detail()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
