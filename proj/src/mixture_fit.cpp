#include "focus/mixture_fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>
#include <json.hpp>

#include "focus/errors.hpp"
#include "focus/text_format.hpp"

namespace focus {

namespace {

constexpr std::size_t kParams = 6;
using Vec6 = Eigen::Matrix<double, kParams, 1>;
using Mat6 = Eigen::Matrix<double, kParams, kParams>;

Vec6 to_vector(const BimodalParams& p) {
  Vec6 v;
  v << p.a1, p.mu1, p.s1, p.a2, p.mu2, p.s2;
  return v;
}

BimodalParams from_vector(const Vec6& v) {
  return BimodalParams{v[0], v[1], v[2], v[3], v[4], v[5]};
}

Vec6 project(Vec6 v, const FitOptions& options) {
  for (std::size_t k : {0u, 3u}) v[k] = std::max(v[k], options.min_amplitude);
  for (std::size_t k : {1u, 4u}) v[k] = std::clamp(v[k], 0.0, 1.0);
  for (std::size_t k : {2u, 5u}) v[k] = std::max(v[k], options.min_width);
  return v;
}

// Partial derivatives of one component a * exp(-(x-mu)^2 / (2 s^2)).
void component_jacobian(double a, double mu, double s, double x, double* out) {
  const double d = x - mu;
  const double e = std::exp(-d * d / (2.0 * s * s));
  out[0] = e;
  out[1] = a * e * d / (s * s);
  out[2] = a * e * d * d / (s * s * s);
}

}  // namespace

std::size_t Histogram1D::nonzero_bins() const {
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

Histogram1D build_histogram(std::span<const double> values, std::size_t bins) {
  if (bins < 1) throw DataError("histogram needs at least one bin");
  if (values.empty()) throw DataError("cannot histogram an empty sample");
  Histogram1D hist;
  hist.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    hist.edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  }
  hist.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("histogram value " + format_double(v) + " outside [0, 1]");
    }
    const auto bin = std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
    ++hist.counts[bin];
  }
  hist.sample_count = values.size();
  return hist;
}

BimodalParams BimodalParams::canonical() const {
  if (mu1 <= mu2) return *this;
  return BimodalParams{a2, mu2, s2, a1, mu1, s1};
}

double eval_bimodal(const BimodalParams& p, double x) {
  if (!(p.s1 > 0.0) || !(p.s2 > 0.0)) throw DataError("Gaussian widths must be positive");
  const double d1 = x - p.mu1;
  const double d2 = x - p.mu2;
  return p.a1 * std::exp(-d1 * d1 / (2.0 * p.s1 * p.s1)) +
         p.a2 * std::exp(-d2 * d2 / (2.0 * p.s2 * p.s2));
}

void FitOptions::validate() const {
  if (bins < 4) throw DataError("fitting needs at least 4 bins");
  if (max_iterations == 0) throw DataError("max_iterations must be positive");
  if (!(min_width > 0.0)) throw DataError("min_width must be positive");
  if (!(min_amplitude > 0.0)) throw DataError("min_amplitude must be positive");
  if (!(initial_damping > 0.0)) throw DataError("initial_damping must be positive");
  if (!(relative_sse_tolerance > 0.0) || !(step_tolerance > 0.0)) {
    throw DataError("tolerances must be positive");
  }
}

BimodalParams initial_guess(const Histogram1D& hist) {
  const std::size_t n = hist.bins();
  if (n == 0 || hist.nonzero_bins() == 0) throw DataError("cannot seed a fit on an empty histogram");

  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(i + 1, n - 1);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += static_cast<double>(hist.counts[j]);
    smooth[i] = sum / static_cast<double>(hi - lo + 1);
  }

  // Plateaus of equal values count once; a plateau is a maximum when every
  // existing neighbour is lower and at least one neighbour exists.
  struct Peak {
    double height;
    double center;
  };
  std::vector<Peak> peaks;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end + 1 < n && smooth[end + 1] == smooth[start]) ++end;
    const bool has_left = start > 0;
    const bool has_right = end + 1 < n;
    const bool left_lower = !has_left || smooth[start - 1] < smooth[start];
    const bool right_lower = !has_right || smooth[end + 1] < smooth[start];
    if ((has_left || has_right) && left_lower && right_lower && smooth[start] > 0.0) {
      peaks.push_back({smooth[start], 0.5 * (hist.center(start) + hist.center(end))});
    }
    start = end + 1;
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.height > b.height; });

  const double width = 2.0 * hist.bin_width();
  if (peaks.size() >= 2) {
    return BimodalParams{peaks[0].height, peaks[0].center, width,
                         peaks[1].height, peaks[1].center, width}
        .canonical();
  }

  double total = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += static_cast<double>(hist.counts[i]);
    mean += static_cast<double>(hist.counts[i]) * hist.center(i);
  }
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = hist.center(i) - mean;
    var += static_cast<double>(hist.counts[i]) * d * d;
  }
  const double sd = std::max(std::sqrt(var / total), hist.bin_width());
  const double lo = std::clamp(mean - sd, 0.0, 1.0);
  const double hi = std::clamp(mean + sd, 0.0, 1.0);
  const auto height_at = [&](double x) {
    return std::max(smooth[std::min(static_cast<std::size_t>(x * static_cast<double>(n)), n - 1)],
                    0.5 * *std::max_element(smooth.begin(), smooth.end()));
  };
  return BimodalParams{height_at(lo), lo, width, height_at(hi), hi, width};
}

double sum_squared_residuals(const BimodalParams& params, std::span<const double> xs,
                             std::span<const double> ys) {
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = eval_bimodal(params, xs[i]) - ys[i];
    sse += r * r;
  }
  return sse;
}

BimodalFit fit_bimodal_curve(std::span<const double> xs, std::span<const double> ys,
                             const BimodalParams& init, const FitOptions& options) {
  options.validate();
  if (xs.size() != ys.size()) throw DataError("x/y sample count mismatch");
  if (xs.size() < kParams) throw DataError("fitting needs at least 6 samples");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DataError("non-finite fit sample");
  }

  Vec6 p = project(to_vector(init), options);
  double sse = sum_squared_residuals(from_vector(p), xs, ys);
  BimodalFit fit;
  fit.initial_sse = sse;
  double damping = options.initial_damping;
  constexpr double kMaxDamping = 1e16;

  std::size_t iter = 0;
  while (iter < options.max_iterations && !fit.converged) {
    ++iter;
    if (sse == 0.0) {
      fit.converged = true;
      break;
    }
    Mat6 jtj = Mat6::Zero();
    Vec6 jtr = Vec6::Zero();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Vec6 row;
      component_jacobian(p[0], p[1], p[2], xs[i], row.data());
      component_jacobian(p[3], p[4], p[5], xs[i], row.data() + 3);
      const double r = eval_bimodal(from_vector(p), xs[i]) - ys[i];
      jtj.noalias() += row * row.transpose();
      jtr.noalias() += row * r;
    }

    // Retry with growing damping until a step lowers the SSE or becomes negligible.
    while (true) {
      Mat6 system = jtj;
      for (std::size_t k = 0; k < kParams; ++k) {
        system(k, k) += damping * std::max(jtj(k, k), 1e-12);
      }
      const Vec6 delta = system.ldlt().solve(-jtr);
      const Vec6 candidate = project(p + delta, options);
      const Vec6 step = candidate - p;
      const bool tiny_step = step.norm() <= options.step_tolerance * (p.norm() + options.step_tolerance);

      double candidate_sse = std::numeric_limits<double>::infinity();
      if (delta.allFinite()) candidate_sse = sum_squared_residuals(from_vector(candidate), xs, ys);

      if (candidate_sse < sse) {
        const double relative_change = (sse - candidate_sse) / sse;
        p = candidate;
        sse = candidate_sse;
        damping = std::max(damping / 10.0, 1e-15);
        if (relative_change < options.relative_sse_tolerance || tiny_step) fit.converged = true;
        break;
      }
      if (tiny_step) {
        // No descent is available at machine precision around p.
        fit.converged = true;
        break;
      }
      damping *= 10.0;
      if (damping > kMaxDamping) break;
    }
    if (damping > kMaxDamping) break;
  }

  if (!p.allFinite() || !std::isfinite(sse)) throw NumericError("bimodal fit diverged");
  fit.params = from_vector(p).canonical();
  fit.residual_sse = sse;
  fit.iterations = iter;
  return fit;
}

BimodalFit fit_bimodal(const Histogram1D& hist, const std::optional<BimodalParams>& init,
                       const FitOptions& options) {
  if (hist.nonzero_bins() < kParams) {
    throw DataError("bimodal fit needs at least 6 nonzero bins, histogram has " +
                    std::to_string(hist.nonzero_bins()));
  }
  std::vector<double> xs(hist.bins());
  std::vector<double> ys(hist.bins());
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    xs[i] = hist.center(i);
    ys[i] = static_cast<double>(hist.counts[i]);
  }
  return fit_bimodal_curve(xs, ys, init ? *init : initial_guess(hist), options);
}

std::string fit_report_json(const BimodalFit& fit, const Histogram1D& hist,
                            const std::string& config_json) {
  nlohmann::ordered_json report;
  report["status"] = "ok";
  report["a1"] = fit.params.a1;
  report["mu1"] = fit.params.mu1;
  report["s1"] = fit.params.s1;
  report["a2"] = fit.params.a2;
  report["mu2"] = fit.params.mu2;
  report["s2"] = fit.params.s2;
  report["residual_sse"] = fit.residual_sse;
  report["converged"] = fit.converged;
  report["iterations"] = fit.iterations;
  report["bins"] = hist.bins();
  report["sample_count"] = hist.sample_count;
  if (!config_json.empty()) report["config"] = nlohmann::ordered_json::parse(config_json);
  return report.dump(2) + "\n";
}

std::string fit_failure_json(const std::string& reason, const Histogram1D* hist,
                             const std::string& config_json) {
  nlohmann::ordered_json report;
  report["status"] = "not_fitted";
  report["reason"] = reason;
  report["bins"] = hist ? hist->bins() : 0;
  report["sample_count"] = hist ? hist->sample_count : 0;
  if (!config_json.empty()) report["config"] = nlohmann::ordered_json::parse(config_json);
  return report.dump(2) + "\n";
}

void write_fit_curve_csv(std::ostream& out, const BimodalParams& params, std::size_t points) {
  out << "x,fitted\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double x = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    out << format_double(x) << ',' << format_double(eval_bimodal(params, x)) << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const Histogram1D& hist) {
  out << "bin_low,bin_high,center,count\n";
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    out << format_double(hist.edges[i]) << ',' << format_double(hist.edges[i + 1]) << ','
        << format_double(hist.center(i)) << ',' << hist.counts[i] << '\n';
  }
}

}  // namespace focus
