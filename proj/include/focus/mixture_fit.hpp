#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace focus {

/// Uniform bins over [0, 1].
struct Histogram1D {
  std::vector<double> edges;          // bins + 1 entries, edges[0] = 0, edges[bins] = 1
  std::vector<std::uint64_t> counts;  // bins entries
  std::uint64_t sample_count = 0;

  std::size_t bins() const { return counts.size(); }
  double bin_width() const { return 1.0 / static_cast<double>(counts.size()); }
  double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
  std::size_t nonzero_bins() const;
};

Histogram1D build_histogram(std::span<const double> values, std::size_t bins);

/// Two Gaussian bumps a * exp(-(x - mu)^2 / (2 s^2)), amplitudes in count units.
struct BimodalParams {
  double a1 = 0.0;
  double mu1 = 0.0;
  double s1 = 1.0;
  double a2 = 0.0;
  double mu2 = 0.0;
  double s2 = 1.0;

  // Swaps the components if needed so that mu1 <= mu2.
  BimodalParams canonical() const;
};

struct BimodalFit {
  BimodalParams params;
  double residual_sse = 0.0;
  double initial_sse = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

double eval_bimodal(const BimodalParams& params, double x);

struct FitOptions {
  std::size_t bins = 40;
  std::size_t max_iterations = 500;
  double relative_sse_tolerance = 1e-10;
  double step_tolerance = 1e-10;
  double min_width = 1e-4;
  double min_amplitude = 1e-9;
  double initial_damping = 1e-3;

  void validate() const;
};

/// Seeds from the two highest local maxima of the 3-bin smoothed counts,
/// widths at twice the bin width. With fewer than two maxima the seeds are
/// placed at the sample mean minus and plus one standard deviation.
BimodalParams initial_guess(const Histogram1D& hist);

/// Least-squares fit of eval_bimodal to (bin center, count) pairs by damped
/// Gauss-Newton with box constraints: widths >= min_width, amplitudes >=
/// min_amplitude, centers in [0, 1]. Only steps that lower the SSE are
/// accepted. Needs at least 6 nonzero bins.
BimodalFit fit_bimodal(const Histogram1D& hist, const std::optional<BimodalParams>& init,
                       const FitOptions& options = {});

/// Same solver on arbitrary (x, y) samples with an explicit starting point.
BimodalFit fit_bimodal_curve(std::span<const double> xs, std::span<const double> ys,
                             const BimodalParams& init, const FitOptions& options = {});

double sum_squared_residuals(const BimodalParams& params, std::span<const double> xs,
                             std::span<const double> ys);

/// One JSON object; `config` is embedded verbatim when non-empty.
std::string fit_report_json(const BimodalFit& fit, const Histogram1D& hist,
                            const std::string& config_json = {});
/// Report for a histogram that could not be fitted.
std::string fit_failure_json(const std::string& reason, const Histogram1D* hist,
                             const std::string& config_json = {});

void write_fit_curve_csv(std::ostream& out, const BimodalParams& params, std::size_t points = 200);
void write_histogram_csv(std::ostream& out, const Histogram1D& hist);

}  // namespace focus
