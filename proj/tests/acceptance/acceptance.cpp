// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "focus/features.hpp"
#include "focus/kalman.hpp"
#include "focus/mixture_fit.hpp"
#include "focus/mlp.hpp"
#include "focus/pipeline.hpp"
#include "focus/rng.hpp"
#include "focus/synth.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace focus;
using focus::testing::quote;
using focus::testing::run_cli;
using focus::testing::ScratchDir;
using focus::testing::slurp;

namespace {

// Tolerances and budgets, one block per criterion.
constexpr int kGradientPairs = 20;
constexpr long double kFiniteDifferenceStep = 1e-6L;
constexpr double kGradientRelTolerance = 1e-6;
constexpr double kGradientSeconds = 10.0;

constexpr std::size_t kKalmanMaxSteps = 1000;
constexpr double kKalmanMeanTolerance = 1e-10;
constexpr double kKalmanCovarianceTolerance = 1e-12;
constexpr double kKalmanSeconds = 1.0;

constexpr double kFirstStepTolerance = 1e-15;

constexpr std::size_t kSurrogateTracesPerClass = 200;
constexpr std::size_t kSurrogateFrames = 100;
constexpr std::size_t kSurrogateWindows = 800;
constexpr double kSurrogateMinMedian = 0.90;
constexpr double kSurrogateSeconds = 60.0;

constexpr double kCurveRecoveryTolerance = 1e-6;
constexpr std::size_t kMixtureSamples = 2000;
constexpr double kMixtureMeanTolerance = 0.01;
constexpr double kMixtureSeconds = 5.0;

constexpr int kFeatureWindows = 1000;
constexpr double kFeatureTolerance = 1e-12;

constexpr std::size_t kCadenceFrames = 1000;
constexpr std::size_t kCadenceRows = 20;
constexpr double kCadenceStep = 2.5;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int pair = 0; pair < kGradientPairs; ++pair) {
    Rng rng(500 + pair);
    const auto model = gen::random_model(rng);
    const auto batch = gen::random_batch(rng, 1 + rng.below(16));
    const auto gradient = backward(model, batch.xs, batch.ys).gradient;
    const auto analytic = gradient.flat();
    const auto numeric =
        oracle::finite_difference_gradient(model, batch.xs, batch.ys, kFiniteDifferenceStep);
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      const double scale = std::max(std::abs(analytic[k]), std::abs(numeric[k]));
      if (scale > 0.0) worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / scale);
    }
  }
  const double elapsed = seconds_since(start);
  return {worst < kGradientRelTolerance && elapsed < kGradientSeconds,
          fmt("%d pairs, worst relative error %.3g < %g, %.2f s < %g s", kGradientPairs, worst,
              kGradientRelTolerance, elapsed, kGradientSeconds)};
}

Outcome kalman_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(2);
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    KalmanParams p;
    p.measurement_noise = trial == 0 ? 0.1 : rng.uniform(1e-3, 10.0);
    p.initial_covariance = trial == 0 ? 0.9 : rng.uniform(1e-2, 10.0);
    p.initial_estimate = trial == 0 ? 0.5 : rng.uniform();
    std::vector<double> measurements(kKalmanMaxSteps);
    for (auto& m : measurements) m = rng.uniform();
    auto state = initial_state(p);
    for (std::size_t t = 1; t <= kKalmanMaxSteps; ++t) {
      state = kf_step(state, measurements[t - 1], p);
      const double mean = oracle::precision_weighted_mean(
          p.initial_estimate, p.initial_covariance,
          std::span<const double>(measurements).first(t), p.measurement_noise);
      const double cov = oracle::fused_covariance(p.initial_covariance, t, p.measurement_noise);
      worst_mean = std::max(worst_mean, std::abs(state.estimate - mean));
      worst_cov = std::max(worst_cov, std::abs(state.covariance - cov));
    }
  }
  const double elapsed = seconds_since(start);
  return {worst_mean < kKalmanMeanTolerance && worst_cov < kKalmanCovarianceTolerance &&
              elapsed < kKalmanSeconds,
          fmt("T<=%zu, estimate error %.3g < %g, covariance error %.3g < %g, %.3f s < %g s",
              kKalmanMaxSteps, worst_mean, kKalmanMeanTolerance, worst_cov,
              kKalmanCovarianceTolerance, elapsed, kKalmanSeconds)};
}

Outcome first_step() {
  const KalmanParams defaults;
  const auto s = kf_step(initial_state(defaults), 1.0, defaults);
  const double ek = std::abs(s.gain - 0.9);
  const double ex = std::abs(s.estimate - 0.95);
  const double ep = std::abs(s.covariance - 0.09);
  return {ek <= kFirstStepTolerance && ex <= kFirstStepTolerance && ep <= kFirstStepTolerance,
          fmt("K=%.17g x=%.17g P=%.17g, errors %.2g %.2g %.2g <= %g", s.gain, s.estimate,
              s.covariance, ek, ex, ep, kFirstStepTolerance)};
}

Outcome surrogate_accuracy() {
  const auto start = std::chrono::steady_clock::now();
  SynthConfig synth;
  synth.seed = derive_seed(42, 2);
  synth.frames = kSurrogateFrames;
  Dataset data;
  for (const auto& trace : generate_dataset(synth, kSurrogateTracesPerClass)) {
    for (const auto& w : extract_features(trace, {}).windows) data.push_back(w.values(), *trace.label);
  }
  TrainConfig train;
  train.seed = derive_seed(42, 1);
  const auto result = kfold_cv(data, train);
  const double elapsed = seconds_since(start);
  std::string folds;
  for (double a : result.fold_accuracies) folds += fmt(" %.4f", a);
  return {data.size() == kSurrogateWindows && result.fold_accuracies.size() == 5 &&
              result.median_accuracy >= kSurrogateMinMedian && elapsed < kSurrogateSeconds,
          fmt("%zu windows, folds%s, median %.4f >= %g, %.2f s < %g s", data.size(), folds.c_str(),
              result.median_accuracy, kSurrogateMinMedian, elapsed, kSurrogateSeconds)};
}

double max_param_error(const BimodalParams& a, const BimodalParams& b) {
  return std::max({std::abs(a.a1 - b.a1), std::abs(a.mu1 - b.mu1), std::abs(a.s1 - b.s1),
                   std::abs(a.a2 - b.a2), std::abs(a.mu2 - b.mu2), std::abs(a.s2 - b.s2)});
}

Outcome mixture_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const BimodalParams truth{100.0, 0.09, 0.02, 60.0, 0.16, 0.03};
  const auto xs = gen::bin_centers(40);
  std::vector<double> ys;
  for (double x : xs) ys.push_back(eval_bimodal(truth, x));
  const auto curve = fit_bimodal_curve(xs, ys, {80.0, 0.08, 0.03, 70.0, 0.17, 0.025});
  const double curve_error = max_param_error(curve.params, truth);

  double worst_mean = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const auto v = gen::mixture_sample(rng, kMixtureSamples, 0.09, 0.02, 0.16, 0.03);
    const auto fit = fit_bimodal(build_histogram(v, 40), std::nullopt);
    worst_mean = std::max({worst_mean, std::abs(fit.params.mu1 - 0.09),
                           std::abs(fit.params.mu2 - 0.16)});
  }
  const double elapsed = seconds_since(start);
  return {curve_error < kCurveRecoveryTolerance && worst_mean <= kMixtureMeanTolerance &&
              elapsed < kMixtureSeconds,
          fmt("noise-free max error %.3g < %g; 10 seeds x %zu samples, worst mean error %.4f <= "
              "%g; %.3f s < %g s",
              curve_error, kCurveRecoveryTolerance, kMixtureSamples, worst_mean,
              kMixtureMeanTolerance, elapsed, kMixtureSeconds)};
}

Outcome feature_oracle() {
  Rng rng(6);
  double worst_oracle = 0.0, worst_shift = 0.0, worst_scale = 0.0;
  int windows = 0;
  for (int i = 0; i < kFeatureWindows; ++i) {
    auto trace = gen::random_trace(rng, 50, 0.2, 0.6);
    gen::drop_points(rng, trace, 0.2);
    const auto base = extract_features(trace, {});
    if (base.windows.size() != 1) continue;
    ++windows;
    const auto got = base.windows[0].values();
    const auto expected = oracle::window_sigmas(trace, 0, 50, 0.1);

    const double offset = rng.uniform(-0.2, 0.4);
    const double scale = rng.uniform(0.05, 1.0);
    auto shifted = trace;
    auto scaled = trace;
    for (std::size_t f = 0; f < trace.frames.size(); ++f) {
      for (std::size_t p = 0; p < kPointsPerFrame; ++p) {
        if (trace.frames[f].points[p].confidence == 0.0) continue;
        shifted.frames[f].points[p].x += offset;
        shifted.frames[f].points[p].y += offset;
        scaled.frames[f].points[p].x *= scale;
        scaled.frames[f].points[p].y *= scale;
      }
    }
    const auto a = extract_features(shifted, {}).windows.at(0).values();
    const auto b = extract_features(scaled, {}).windows.at(0).values();
    for (std::size_t k = 0; k < 4; ++k) {
      worst_oracle = std::max(worst_oracle, std::abs(got[k] - expected[k]));
      worst_shift = std::max(worst_shift, std::abs(a[k] - got[k]));
      worst_scale = std::max(worst_scale, std::abs(b[k] - scale * got[k]));
    }
  }
  return {windows == kFeatureWindows && worst_oracle < kFeatureTolerance &&
              worst_shift < kFeatureTolerance && worst_scale < kFeatureTolerance,
          fmt("%d windows, oracle %.3g, translation %.3g, scale %.3g, all < %g", windows,
              worst_oracle, worst_shift, worst_scale, kFeatureTolerance)};
}

Outcome cadence(const ScratchDir& dir, const fs::path& model) {
  SynthConfig synth;
  synth.seed = 7;
  synth.frames = kCadenceFrames;
  synth.fps = 20.0;
  write_file_atomic(dir / "cadence.jsonl", serialize_trace(generate_trace(synth, kLabelLow)));
  const auto out = dir / "cadence_out";
  const int status = run_cli("--out " + quote(out) + " run " + quote(dir / "cadence.jsonl") + " " +
                                 quote(model),
                             dir / "cadence.log");
  if (status != 0) return {false, fmt("run exited with %d", status)};
  std::istringstream in(slurp(out / kSeriesFile));
  const auto table = read_series_csv(in);
  double worst = 0.0;
  for (std::size_t i = 0; i < table.recognition.size(); ++i) {
    worst = std::max(worst, std::abs(table.recognition.t_seconds[i] - kCadenceStep * (i + 1)));
  }
  return {table.recognition.size() == kCadenceRows && worst == 0.0,
          fmt("%zu frames at 20 fps -> %zu rows (want %zu), max |t - 2.5(i+1)| = %g",
              kCadenceFrames, table.recognition.size(), kCadenceRows, worst)};
}

// synth -> preprocess -> train -> run into `out`; returns the first failing
// exit status or 0.
int full_pipeline(const ScratchDir& dir, const fs::path& config, const std::string& name) {
  const auto out = dir / name;
  const std::string common = "--config " + quote(config) + " --seed 1234 --out " + quote(out);
  const auto log = dir / (name + ".log");
  if (int s = run_cli(common + " synth", log); s != 0) return s;
  std::string traces;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(out / kTracesDir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) traces += " " + quote(f);
  if (int s = run_cli(common + " preprocess" + traces, log); s != 0) return s;
  if (int s = run_cli(common + " train " + quote(out / kFeaturesFile), log); s != 0) return s;
  return run_cli(common + " run " + quote(dir / "session.jsonl") + " " + quote(out / kModelFile),
                 log);
}

Outcome end_to_end_determinism(const ScratchDir& dir) {
  write_file_atomic(dir / "config.json",
                    R"({"kalman": {"process_noise": 0.02}})");
  // Alternating low and high stretches so the estimate moves between levels.
  SynthConfig synth;
  synth.frames = 500;
  LabeledTrace session;
  for (std::uint64_t part = 0; part < 10; ++part) {
    synth.seed = 99 + part;
    for (auto frame : generate_trace(synth, part % 2 == 0 ? kLabelLow : kLabelHigh).frames) {
      frame.frame_index = static_cast<std::int64_t>(session.frames.size());
      session.frames.push_back(frame);
    }
  }
  write_file_atomic(dir / "session.jsonl", serialize_trace(session));

  for (const char* name : {"first", "second"}) {
    if (int s = full_pipeline(dir, dir / "config.json", name); s != 0) {
      return {false, fmt("%s pipeline exited with %d", name, s)};
    }
  }
  std::string detail;
  bool identical = true;
  for (const char* file : {kFeaturesFile, kSeriesFile, kFitReportFile}) {
    const bool same = slurp(dir / "first" / file) == slurp(dir / "second" / file);
    identical = identical && same;
    detail += fmt("%s %s; ", file, same ? "identical" : "DIFFERENT");
  }
  const auto report = slurp(dir / "first" / kFitReportFile);
  const bool fitted = report.find("\"status\": \"ok\"") != std::string::npos;
  detail += fitted ? "fit status ok" : "fit status not_fitted";
  return {identical, detail};
}

}  // namespace

int main() {
  ScratchDir dir("acceptance");
  const auto model = dir / "init_model.txt";
  write_file_atomic(model, save_model(initialize_model(1), TrainConfig{}));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient vs central differences", gradient_check},
      {"2 Kalman vs precision-weighted mean", kalman_oracle},
      {"3 Kalman first step", first_step},
      {"4 surrogate 5-fold accuracy", surrogate_accuracy},
      {"5 bimodal fit recovery", mixture_recovery},
      {"6 feature oracle and invariances", feature_oracle},
      {"7 output cadence", [&] { return cadence(dir, model); }},
      {"8 end-to-end determinism", [&] { return end_to_end_determinism(dir); }},
  };

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("%s [%s] %s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                outcome.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
