#include <doctest.h>

#include <cmath>
#include <sstream>

#include "focus/errors.hpp"
#include "focus/kalman.hpp"
#include "focus/rng.hpp"
#include "oracles.hpp"

using namespace focus;

namespace {

RecognitionSeries make_series(std::vector<double> values) {
  RecognitionSeries s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.window_index.push_back(i);
    s.t_seconds.push_back(2.5 * static_cast<double>(i + 1));
  }
  s.values = std::move(values);
  return s;
}

RecognitionSeries random_series(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return make_series(std::move(v));
}

}  // namespace

TEST_CASE("kf_step") {
  const KalmanParams defaults;
  SUBCASE("first step from the defaults") {
    const auto s = kf_step(initial_state(defaults), 1.0, defaults);
    CHECK(s.gain == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.estimate == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(s.covariance == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(s.step == 1);
  }
  SUBCASE("zero innovation leaves the prediction") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      KalmanParams p;
      p.transition = rng.uniform(0.5, 1.5);
      p.measurement_noise = rng.uniform(0.01, 2.0);
      const KalmanState s{rng.uniform(), rng.uniform(0.01, 1.0), 3, 0.0};
      const double predicted = p.transition * s.estimate;
      CHECK(kf_step(s, predicted, p).estimate == doctest::Approx(predicted).epsilon(1e-15));
    }
  }
  SUBCASE("huge measurement noise ignores the measurement") {
    KalmanParams p;
    p.measurement_noise = 1e9;
    for (double m : {0.0, 1.0, -5.0, 5.0}) {
      CHECK(std::abs(kf_step(initial_state(p), m, p).estimate - 0.5) < 1e-8);
    }
  }
  SUBCASE("non-finite measurement") {
    CHECK_THROWS_AS(kf_step(initial_state(defaults), NAN, defaults), InputError);
    CHECK_THROWS_AS(kf_step(initial_state(defaults), INFINITY, defaults), InputError);
  }
}

TEST_CASE("parameter validation") {
  KalmanParams p;
  p.measurement_noise = 0.0;
  CHECK_THROWS_AS(p.validate(), DataError);
  p = {};
  p.initial_covariance = -1.0;
  CHECK_THROWS_AS(p.validate(), DataError);
  p = {};
  p.process_noise = -0.1;
  CHECK_THROWS_AS(p.validate(), DataError);
  CHECK_NOTHROW(KalmanParams{}.validate());
}

TEST_CASE("gain and convex-combination properties") {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    KalmanParams p;
    p.transition = rng.uniform(0.2, 1.5);
    p.process_noise = rng.uniform(0.0, 0.1);
    p.measurement_noise = rng.uniform(1e-3, 5.0);
    const KalmanState s{rng.uniform(), rng.uniform(1e-3, 2.0), 0, 0.0};
    const double m = rng.uniform();
    const auto next = kf_step(s, m, p);
    CHECK(next.gain > 0.0);
    CHECK(next.gain < 1.0);
    CHECK(next.covariance >= 0.0);
    const double predicted = p.transition * s.estimate;
    CHECK(next.estimate >= std::min(predicted, m) - 1e-15);
    CHECK(next.estimate <= std::max(predicted, m) + 1e-15);
  }
}

TEST_CASE("run_filter") {
  const KalmanParams defaults;
  SUBCASE("empty series") {
    CHECK(run_filter(RecognitionSeries{}, defaults).size() == 0);
  }
  SUBCASE("alignment with the input") {
    Rng rng(3);
    const auto in = random_series(rng, 37);
    const auto out = run_filter(in, defaults);
    CHECK(out.size() == in.size());
    CHECK(out.t_seconds == in.t_seconds);
    CHECK(out.window_index == in.window_index);
    for (double v : out.values) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("constant series converges monotonically") {
    for (double c : {0.0, 0.2, 0.5, 0.93, 1.0}) {
      const auto out = run_filter(make_series(std::vector<double>(200, c)), defaults);
      double previous = std::abs(defaults.initial_estimate - c);
      for (double v : out.values) {
        const double error = std::abs(v - c);
        if (previous > 0.0) {
          CHECK(error < previous);
        } else {
          CHECK(error == 0.0);
        }
        previous = error;
      }
      CHECK(previous < 0.01);
    }
  }
  SUBCASE("matches the precision-weighted mean") {
    Rng rng(4);
    for (std::size_t n : {1u, 2u, 10u, 137u, 1000u}) {
      KalmanParams p;
      p.measurement_noise = rng.uniform(0.01, 1.0);
      p.initial_covariance = rng.uniform(0.1, 2.0);
      p.initial_estimate = rng.uniform();
      const auto in = random_series(rng, n);
      const auto out = run_filter(in, p);
      for (std::size_t t = 0; t < n; ++t) {
        const auto prefix = std::span<const double>(in.values).first(t + 1);
        const double expected = oracle::precision_weighted_mean(
            p.initial_estimate, p.initial_covariance, prefix, p.measurement_noise);
        CHECK(std::abs(out.values[t] - expected) < 1e-10);
      }
    }
  }
  SUBCASE("covariance follows the closed form") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      KalmanParams p;
      p.measurement_noise = rng.uniform(0.01, 1.0);
      p.initial_covariance = rng.uniform(0.1, 2.0);
      auto state = initial_state(p);
      double previous = state.covariance;
      for (std::size_t t = 1; t <= 1000; ++t) {
        state = kf_step(state, rng.uniform(), p);
        CHECK(state.covariance < previous);
        CHECK(std::abs(state.covariance -
                       oracle::fused_covariance(p.initial_covariance, t, p.measurement_noise)) <
              1e-12);
        previous = state.covariance;
      }
    }
  }
  SUBCASE("non-finite input") {
    CHECK_THROWS_AS(run_filter(make_series({0.5, NAN}), defaults), InputError);
  }
}

TEST_CASE("series csv") {
  Rng rng(6);
  const auto rec = random_series(rng, 12);
  const auto est = run_filter(rec, {});

  SUBCASE("full table round trip") {
    std::stringstream buf;
    write_series_csv(buf, rec, est, "config {}");
    const auto text = buf.str();
    CHECK(text.rfind("# config {}\nwindow_index,t_seconds,s_r,s_e\n", 0) == 0);
    const auto table = read_series_csv(buf);
    CHECK(table.recognition.values == rec.values);
    CHECK(table.recognition.t_seconds == rec.t_seconds);
    CHECK(table.recognition.window_index == rec.window_index);
    REQUIRE(table.estimation.has_value());
    CHECK(table.estimation->values == est.values);
  }
  SUBCASE("recognition-only round trip") {
    std::stringstream buf;
    write_recognition_csv(buf, rec);
    const auto table = read_series_csv(buf);
    CHECK(table.recognition.values == rec.values);
    CHECK_FALSE(table.estimation.has_value());
  }
  SUBCASE("malformed files") {
    std::istringstream bad_header("a,b,c\n0,1,0.5\n");
    CHECK_THROWS_AS(read_series_csv(bad_header), InputError);
    std::istringstream bad_row("window_index,t_seconds,s_r\n0,1\n");
    CHECK_THROWS_AS(read_series_csv(bad_row), InputError);
    std::istringstream bad_number("window_index,t_seconds,s_r\n0,1,abc\n");
    CHECK_THROWS_AS(read_series_csv(bad_number), InputError);
  }
}
