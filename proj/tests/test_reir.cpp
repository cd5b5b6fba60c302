#include <gtest/gtest.h>

#include <cmath>

#include "ssanc/reir.hpp"
#include "ssanc/scene.hpp"
#include "ssanc/signals.hpp"
#include "test_util.hpp"

using namespace ssanc;

static Scene pure_delay_scene() {
  SynthParams p;
  p.K = 3;
  p.speech_delays = {2, 0, 5, 4};
  p.noise_delays = {0, 0, 0, 0};
  p.gains = {{0.7, 1}, {1.0, 1}, {1.3, 1}, {0.85, 1}};
  p.ir_len = 16;
  p.sec_ir_len = 16;
  return synth_scene(p);
}

TEST(EstimateReirs, PureDelayScenesGiveDelayAndGainRatios) {
  const Scene s = pure_delay_scene();
  ASSERT_EQ(s.spatial_ref, 1);
  const MicSignals m = render_desired(s, signals::white_noise(8000, 1));
  const ReIRSet r = estimate_reirs(m, s.spatial_ref, 24);
  const double gains[] = {0.7, 1.0, 1.3, 0.85};
  const Index delays[] = {2, 0, 5, 4};
  for (int k = 0; k <= s.K; ++k)
    EXPECT_LE((r.h[k] - gains[k] * unit_pulse(delays[k], 24)).norm(), 1e-6) << "channel " << k;
  EXPECT_LE((r.h[s.spatial_ref] - unit_pulse(0, 24)).norm(), 1e-7);  // ridge bias only
}

TEST(EstimateReirs, ReconstructsErrorMicSpeech) {
  const Scene s = synth_scene(default_synth_params());
  const MicSignals m = render_desired(s, signals::white_noise(16000, 2));
  const ReIRSet r = estimate_reirs(m, s.spatial_ref, 48);
  const Vector rec = filter(r.h.back(), m.speech(s.spatial_ref));
  EXPECT_LT(10 * std::log10((rec - m.p_s).squaredNorm() / m.p_s.squaredNorm()), -40.0);
  EXPECT_LT(r.residual.back(), 1e-4);
}

TEST(EstimateReirs, Errors) {
  const Scene s = pure_delay_scene();
  const MicSignals desired = render_desired(s, signals::white_noise(500, 1));
  EXPECT_THROW(estimate_reirs(desired, 3, 8), InvalidArgument);  // error mic cannot be the reference
  EXPECT_THROW(estimate_reirs(desired, -1, 8), InvalidArgument);
  EXPECT_THROW(estimate_reirs(desired, 1, 600), InvalidArgument);
  const MicSignals noisy = render_mics(s, signals::white_noise(500, 1), signals::white_noise(500, 2), 0);
  EXPECT_THROW(estimate_reirs(noisy, 1, 8), InvalidArgument);
  MicSignals silent = desired;
  for (auto& x : silent.x_s) x.setZero();
  silent.p_s.setZero();
  EXPECT_THROW(estimate_reirs(silent, 1, 8, 0.0), NumericError);
}

TEST(EstimateReirs, JsonRoundTrip) {
  const Scene s = pure_delay_scene();
  const ReIRSet r = estimate_reirs(render_desired(s, signals::white_noise(2000, 3)), 1, 12);
  const ReIRSet back = reirs_from_json(reirs_to_json(r));
  EXPECT_EQ(back.spatial_ref, 1);
  ASSERT_EQ(back.h.size(), r.h.size());
  for (std::size_t k = 0; k < r.h.size(); ++k) EXPECT_EQ(back.h[k], r.h[k]);
  EXPECT_THROW(reirs_from_json(nlohmann::json{{"Lh", 3}}), LoadError);
}

TEST(Highpass, PaperCutoffMeetsMagnitudeBounds) {
  for (Index len : {280, 559}) {
    const Vector psi = design_min_phase_highpass(120, 16000, len);
    EXPECT_LE(magnitude_at(psi, 0, 16000), 0.1) << len;
    const Vector proto = linear_phase_highpass(120, 16000, len);
    for (double f = 180; f < 8000; f += 37) {
      const double m = magnitude_at(psi, f, 16000);
      EXPECT_GE(m, 0.89) << f;
      EXPECT_LE(m, 1.12) << f;
      EXPECT_NEAR(20 * std::log10(m / magnitude_at(proto, f, 16000)), 0.0, 1.0) << f;
    }
  }
}

TEST(Highpass, MinimumPhaseConcentratesEnergy) {
  const Vector psi = design_min_phase_highpass(120, 16000, 280);
  const Vector proto = linear_phase_highpass(120, 16000, 280);
  double a = 0, b = 0;
  for (Index i = 0; i < psi.size(); ++i) {
    a += psi[i] * psi[i];
    b += proto[i] * proto[i];
    EXPECT_GE(a, b * (1 - 1e-12)) << "prefix " << i;
  }
}

TEST(Highpass, Errors) {
  EXPECT_THROW(design_min_phase_highpass(8000, 16000, 64), InvalidArgument);
  EXPECT_THROW(design_min_phase_highpass(0, 16000, 64), InvalidArgument);
  EXPECT_THROW(design_min_phase_highpass(120, 16000, 7), InvalidArgument);
}
