// Command-line front end for the concentration-level pipeline.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "focus/errors.hpp"
#include "focus/pipeline.hpp"

namespace {

using focus::ExitCode;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

focus::PipelineConfig resolve_config(const GlobalOptions& global) {
  focus::PipelineConfig config;
  if (!global.config_path.empty()) config = focus::load_config(global.config_path);
  if (global.seed) config.seed = *global.seed;
  if (!global.out_dir.empty()) config.out_dir = global.out_dir;
  config.derive_seeds();
  config.validate();
  return config;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate concentration levels from body-keypoint traces"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", global.seed, "Master seed (overrides the config)");
  app.add_option("--out", global.out_dir, "Output directory (overrides the config)");

  std::vector<std::string> trace_files;
  auto* preprocess = app.add_subcommand("preprocess", "Extract windowed features from traces");
  preprocess->add_option("traces", trace_files, "Canonical trace files")->required();

  std::string feature_file;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> epochs;
  auto* train = app.add_subcommand("train", "Cross-validate and train the classifier");
  train->add_option("features", feature_file, "Feature file")->required();
  train->add_option("--folds", folds, "Number of cross-validation folds");
  train->add_option("--epochs", epochs, "Training epochs");

  std::string model_file;
  auto* recognize = app.add_subcommand("recognize", "Compute recognition levels");
  recognize->add_option("model", model_file, "Model file")->required();
  recognize->add_option("features", feature_file, "Feature file")->required();

  std::string series_file;
  auto* estimate = app.add_subcommand("estimate", "Kalman-filter a recognition series");
  estimate->add_option("series", series_file, "Recognition or series file")->required();

  std::optional<std::size_t> bins;
  auto* fit = app.add_subcommand("fit", "Fit a bimodal curve to the estimation levels");
  fit->add_option("series", series_file, "Series file with an s_e column")->required();
  fit->add_option("--bins", bins, "Histogram bins");

  std::optional<std::size_t> traces_per_class;
  std::optional<std::size_t> frames;
  auto* synth = app.add_subcommand("synth", "Generate labeled synthetic traces");
  synth->add_option("--traces-per-class", traces_per_class, "Traces per label");
  synth->add_option("--frames", frames, "Frames per trace");

  std::string trace_file;
  auto* run = app.add_subcommand("run", "Run the whole pipeline on one trace");
  run->add_option("trace", trace_file, "Canonical trace file")->required();
  run->add_option("model", model_file, "Model file")->required();
  run->add_option("--bins", bins, "Histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kInputError);
  }

  try {
    auto config = resolve_config(global);
    if (folds) {
      if (*folds < 2) throw focus::DataError("--folds must be at least 2");
      config.train.folds = *folds;
    }
    if (epochs) config.train.epochs = *epochs;
    if (bins) config.fit.bins = *bins;
    if (traces_per_class) config.traces_per_class = *traces_per_class;
    if (frames) config.synth.frames = *frames;
    config.validate();
    const focus::fs::path out = config.out_dir;

    if (*preprocess) {
      std::vector<focus::fs::path> paths(trace_files.begin(), trace_files.end());
      const auto result = focus::cmd_preprocess(paths, config, out);
      std::cout << "windows kept: " << result.rows.size()
                << ", dropped: " << result.dropped_windows << '\n';
    } else if (*train) {
      const auto report = focus::cmd_train(feature_file, config, out);
      print_warnings(report.kfold.warnings);
      print_warnings(report.final_model.warnings);
      for (std::size_t k = 0; k < report.kfold.fold_accuracies.size(); ++k) {
        std::cout << "fold " << k << " accuracy: " << report.kfold.fold_accuracies[k] << '\n';
      }
      std::cout << "median accuracy: " << report.kfold.median_accuracy << '\n';
    } else if (*recognize) {
      const auto series = focus::cmd_recognize(model_file, feature_file, config, out);
      std::cout << "windows recognized: " << series.size() << '\n';
    } else if (*estimate) {
      const auto series = focus::cmd_estimate(series_file, config, out);
      std::cout << "windows estimated: " << series.size() << '\n';
    } else if (*fit) {
      const auto result = focus::cmd_fit(series_file, config, out);
      std::cout << "mu1 " << result.params.mu1 << ", mu2 " << result.params.mu2
                << ", converged " << (result.converged ? "yes" : "no") << '\n';
    } else if (*synth) {
      const auto files = focus::cmd_synth(config, out);
      std::cout << "traces written: " << files.size() << '\n';
    } else if (*run) {
      const auto result = focus::cmd_run(trace_file, model_file, config, out);
      std::cout << "windows: " << result.features.size() << ", dropped: " << result.dropped_windows
                << ", fit: " << result.fit_status << '\n';
    }
  } catch (const focus::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kInputError);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumericError);
  }
  return static_cast<int>(ExitCode::kSuccess);
}
