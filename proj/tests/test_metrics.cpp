#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ssanc/metrics.hpp"
#include "ssanc/signals.hpp"

using namespace ssanc;

TEST(NoiseReduction, ClosedForms) {
  const Vector v = signals::white_noise(1000, 1);
  EXPECT_EQ(noise_reduction(v, v), 0.0);
  EXPECT_NEAR(noise_reduction(v, v / 2), 20 * std::log10(2.0), 1e-12);
  for (double c : {0.1, 0.7, 3.0}) EXPECT_NEAR(noise_reduction(v, c * v), -20 * std::log10(c), 1e-12);
  EXPECT_TRUE(std::isinf(noise_reduction(v, Vector::Zero(1000))));
  EXPECT_THROW(noise_reduction(v, Vector::Zero(3)), InvalidArgument);
}

TEST(SpeechDistortion, ClosedForms) {
  const Vector t = signals::speech_like(4000, 16000, 2);
  EXPECT_EQ(speech_distortion_index(t, t), kSdiFloorDb);
  EXPECT_NEAR(speech_distortion_index(t, Vector::Zero(t.size())), 0.0, 1e-12);
  EXPECT_NEAR(speech_distortion_index(t, 1.1 * t), -20.0, 1e-9);
  for (double c : {0.5, 0.9, 2.0}) EXPECT_NEAR(speech_distortion_index(t, c * t), 10 * std::log10((1 - c) * (1 - c)), 1e-9);
  EXPECT_THROW(speech_distortion_index(Vector::Zero(5), Vector::Zero(5)), InvalidArgument);
}

TEST(ControlEffort, Sums) {
  EXPECT_EQ(control_effort(Vector::Zero(4)), 0.0);
  EXPECT_EQ(control_effort(Vector::Ones(3)), 3.0);
}

TEST(QualityProxy, ClosedFormsAndMonotonicity) {
  const Vector t = signals::speech_like(16000, 16000, 3);
  EXPECT_EQ(quality_proxy(t, t), 0.0);
  EXPECT_NEAR(quality_proxy(t, 2 * t), 20 * std::log10(2.0), 1e-9);
  const Vector n = signals::white_noise(16000, 4);
  const double weak = quality_proxy(t, t + 0.01 * n), strong = quality_proxy(t, t + 0.5 * n);
  EXPECT_GT(strong, weak);
  EXPECT_GT(weak, 0.0);
  EXPECT_NEAR(quality_proxy(7 * t, 7 * (t + 0.1 * n)), quality_proxy(t, t + 0.1 * n), 1e-9);
  EXPECT_TRUE(std::isfinite(quality_proxy(t, Vector::Zero(t.size()))));
}

TEST(QualityProxy, Errors) {
  EXPECT_THROW(quality_proxy(Vector::Zero(1000), Vector::Ones(1000)), InvalidArgument);
  EXPECT_THROW(quality_proxy(Vector::Ones(1000), Vector::Ones(999)), InvalidArgument);
  EXPECT_THROW(quality_proxy(Vector::Ones(1000), Vector::Ones(1000), 4, 2), InvalidArgument);
}

TEST(Metrics, NrScaleInvariance) {
  const Vector a = signals::white_noise(500, 5), b = signals::white_noise(500, 6);
  EXPECT_NEAR(noise_reduction(10 * a, 10 * b), noise_reduction(a, b), 1e-12);
}

TEST(Evaluate, FlagsNoiseFreeAndInfiniteCases) {
  MicSignals m;
  m.K = 1;
  m.x_s = {signals::speech_like(4000, 16000, 1)};
  m.x_v = {Vector::Zero(4000)};
  m.p_s = signals::speech_like(4000, 16000, 2);
  m.p_v = Vector::Zero(4000);
  RunResult r;
  r.y = Vector::Zero(4000);
  r.e_s = m.p_s;
  r.e_v = Vector::Zero(4000);
  r.e = r.e_s;
  r.t = m.p_s;
  MetricBundle b = evaluate(m, r);
  EXPECT_TRUE(b.noise_free);
  EXPECT_TRUE(std::isnan(b.nr_db));
  EXPECT_TRUE(b.sdi_clamped);
  EXPECT_EQ(b.quality_db, 0.0);

  m.p_v = signals::white_noise(4000, 3);
  b = evaluate(m, r);
  EXPECT_FALSE(b.noise_free);
  EXPECT_TRUE(b.nr_infinite);
  r.t = Vector();
  EXPECT_THROW(evaluate(m, r), InvalidArgument);
}
