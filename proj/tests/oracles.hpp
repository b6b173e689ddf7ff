#pragma once

// Reference computations used only by tests. Each one is coded along a
// different route from the library implementation it checks.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "focus/features.hpp"
#include "focus/keypoint_io.hpp"

namespace focus::oracle {

// Mean first, then mean squared deviation.
inline double two_pass_std(std::span<const double> values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

// Sigmas for frames [first, first + count) with the same pooling rule, coded
// directly against the point index ranges.
inline std::array<double, 4> window_sigmas(const LabeledTrace& trace, std::size_t first,
                                           std::size_t count, double threshold) {
  std::vector<double> tx, ty, mx, my;
  for (std::size_t f = first; f < first + count; ++f) {
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& p = trace.frames[f].points[i];
      if (p.confidence >= threshold) {
        tx.push_back(p.x);
        ty.push_back(p.y);
      }
    }
    for (std::size_t i = 5; i < 10; ++i) {
      const auto& p = trace.frames[f].points[i];
      if (p.confidence >= threshold) {
        mx.push_back(p.x);
        my.push_back(p.y);
      }
    }
  }
  return {two_pass_std(tx), two_pass_std(ty), two_pass_std(mx), two_pass_std(my)};
}

}  // namespace focus::oracle

#include "focus/mlp.hpp"

namespace focus::oracle {

using WideParams = std::array<long double, MlpParams::kCount>;

inline WideParams widen(const MlpParams& p) {
  WideParams w{};
  const auto flat = p.flat();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = flat[i];
  return w;
}

inline long double dot(const long double* a, const long double* b, std::size_t n) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Straight-line evaluation of the 4-8-8-1 network from the flat layout,
// returning the output logit.
inline long double logit(const WideParams& w, const FeatureArray& x) {
  const long double in[4] = {x[0], x[1], x[2], x[3]};
  long double h1[8], h2[8];
  for (std::size_t i = 0; i < 8; ++i) {
    const long double z = dot(&w[MlpParams::kW1 + 4 * i], in, 4) + w[MlpParams::kB1 + i];
    h1[i] = z > 0.0L ? z : 0.0L;
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const long double z = dot(&w[MlpParams::kW2 + 8 * i], h1, 8) + w[MlpParams::kB2 + i];
    h2[i] = z > 0.0L ? z : 0.0L;
  }
  return dot(&w[MlpParams::kW3], h2, 8) + w[MlpParams::kB3];
}

inline long double probability(const WideParams& w, const FeatureArray& x) {
  return 1.0L / (1.0L + std::exp(-logit(w, x)));
}

inline long double clamped_bce(const WideParams& w, std::span<const FeatureArray> xs,
                               std::span<const int> ys) {
  long double total = 0.0L;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    long double p = probability(w, xs[s]);
    p = std::min(std::max(p, 1e-12L), 1.0L - 1e-12L);
    total += ys[s] == 1 ? -std::log(p) : -std::log(1.0L - p);
  }
  return total / static_cast<long double>(xs.size());
}

// Central differences with step h on every parameter.
inline std::vector<double> finite_difference_gradient(const MlpParams& params,
                                                      std::span<const FeatureArray> xs,
                                                      std::span<const int> ys, long double h) {
  auto w = widen(params);
  std::vector<double> grad(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const long double saved = w[k];
    w[k] = saved + h;
    const long double up = clamped_bce(w, xs, ys);
    w[k] = saved - h;
    const long double down = clamped_bce(w, xs, ys);
    w[k] = saved;
    grad[k] = static_cast<double>((up - down) / (2.0L * h));
  }
  return grad;
}

// Fusing a prior with T independent measurements of one constant level:
// the posterior mean is the precision-weighted mean of all of them.
inline double precision_weighted_mean(double x0, double p0, std::span<const double> measurements,
                                      double r) {
  long double weighted = static_cast<long double>(x0) / p0;
  long double precision = 1.0L / p0;
  for (double m : measurements) {
    weighted += static_cast<long double>(m) / r;
    precision += 1.0L / r;
  }
  return static_cast<double>(weighted / precision);
}

inline double fused_covariance(double p0, std::size_t steps, double r) {
  return static_cast<double>(1.0L / (1.0L / p0 + static_cast<long double>(steps) / r));
}

}  // namespace focus::oracle
