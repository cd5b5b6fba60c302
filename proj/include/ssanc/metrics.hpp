#pragma once

// Evaluation metrics: noise reduction, speech distortion index, control
// effort, and a log-spectral-distance quality proxy.
//
// The quality proxy is a self-contained substitute for perceptual speech
// quality scores (e.g. PESQ MOS-LQO); its values are not comparable to MOS.

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "ssanc/convmat.hpp"
#include "ssanc/error.hpp"
#include "ssanc/scene.hpp"
#include "ssanc/simulate.hpp"

namespace ssanc {

inline constexpr double kSdiFloorDb = -120.0;

/// 10 log10(sum p_v^2 / sum e_v^2); +inf when e_v is silent.
inline double noise_reduction(const Vector& p_v, const Vector& e_v) {
  if (p_v.size() != e_v.size()) throw InvalidArgument("noise_reduction: length mismatch");
  const double den = e_v.squaredNorm();
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(p_v.squaredNorm() / den);
}

/// 10 log10(sum (t - e_s)^2 / sum t^2), clamped below at -120 dB.
inline double speech_distortion_index(const Vector& t, const Vector& e_s) {
  if (t.size() != e_s.size()) throw InvalidArgument("speech_distortion_index: length mismatch");
  const double den = t.squaredNorm();
  if (!(den > 0.0)) throw InvalidArgument("speech_distortion_index: target signal is silent");
  const double num = (t - e_s).squaredNorm();
  if (num == 0.0) return kSdiFloorDb;
  return std::max(kSdiFloorDb, 10.0 * std::log10(num / den));
}

inline double control_effort(const Vector& y) { return y.squaredNorm(); }

/// Mean over active frames of the RMS difference (dB) between the
/// log-magnitude spectra of `u` and the reference `t`. Frames are Hann
/// windowed; a frame is active when its energy in `t` lies within
/// `silence_db` of the loudest frame. Lower is better, 0 means identical.
inline double quality_proxy(const Vector& t, const Vector& u, Index frame = 256, Index hop = 128,
                            double silence_db = -40.0) {
  if (t.size() != u.size()) throw InvalidArgument("quality_proxy: length mismatch");
  if (frame < 8 || hop < 1) throw InvalidArgument("quality_proxy: frame must be >= 8 and hop >= 1");
  const Index n = t.size();
  if (n == 0) throw InvalidArgument("quality_proxy: empty signals");

  std::vector<Index> starts;
  for (Index s = 0; s + frame <= n; s += hop) starts.push_back(s);
  if (starts.empty()) starts.push_back(0);

  Vector window(frame);
  for (Index i = 0; i < frame; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(frame));

  const auto windowed = [&](const Vector& x, Index start) {
    std::vector<double> buf(static_cast<std::size_t>(frame), 0.0);
    for (Index i = 0; i < frame && start + i < n; ++i) buf[static_cast<std::size_t>(i)] = x[start + i] * window[i];
    return buf;
  };
  const auto energy = [](const std::vector<double>& b) {
    double e = 0.0;
    for (double v : b) e += v * v;
    return e;
  };

  std::vector<double> frame_energy;
  double loudest = 0.0;
  for (Index s : starts) {
    frame_energy.push_back(energy(windowed(t, s)));
    loudest = std::max(loudest, frame_energy.back());
  }
  if (!(loudest > 0.0)) throw InvalidArgument("quality_proxy: reference signal is silent");
  const double gate = loudest * std::pow(10.0, silence_db / 10.0);

  Eigen::FFT<double> fft;
  const Index bins = frame / 2 + 1;
  double total = 0.0;
  int active = 0;
  std::vector<std::complex<double>> T, U;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (frame_energy[f] < gate || frame_energy[f] == 0.0) continue;
    fft.fwd(T, windowed(t, starts[f]));
    fft.fwd(U, windowed(u, starts[f]));
    double peak_t = 0.0, peak_u = 0.0;
    for (Index k = 0; k < bins; ++k) {
      peak_t = std::max(peak_t, std::abs(T[static_cast<std::size_t>(k)]));
      peak_u = std::max(peak_u, std::abs(U[static_cast<std::size_t>(k)]));
    }
    // -100 dB floors relative to each frame's own peak keep the measure
    // invariant to a common gain.
    const double floor_t = 1e-5 * peak_t;
    const double floor_u = std::max(1e-5 * peak_u, 1e-5 * floor_t);
    double acc = 0.0;
    for (Index k = 0; k < bins; ++k) {
      const double lt = 20.0 * std::log10(std::max(std::abs(T[static_cast<std::size_t>(k)]), floor_t));
      const double lu = 20.0 * std::log10(std::max(std::abs(U[static_cast<std::size_t>(k)]), floor_u));
      acc += (lu - lt) * (lu - lt);
    }
    total += std::sqrt(acc / static_cast<double>(bins));
    ++active;
  }
  return total / active;
}

struct MetricBundle {
  double nr_db = 0.0;
  double sdi_db = 0.0;
  double effort = 0.0;
  double quality_db = 0.0;
  double snr_in_db = 0.0;
  double snr_out_db = 0.0;
  bool nr_infinite = false;     // e_v silent
  bool noise_free = false;      // p_v silent, NR and SNRs undefined (NaN)
  bool sdi_clamped = false;     // SDI hit the -120 dB floor
};

inline MetricBundle evaluate(const MicSignals& mics, const RunResult& run, Index frame = 256, Index hop = 128) {
  if (run.t.size() != mics.N()) throw InvalidArgument("evaluate: run has no target signal");
  MetricBundle m;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.noise_free = mics.p_v.squaredNorm() == 0.0;
  if (m.noise_free) {
    m.nr_db = m.snr_in_db = m.snr_out_db = nan;
  } else {
    m.nr_db = noise_reduction(mics.p_v, run.e_v);
    m.nr_infinite = std::isinf(m.nr_db);
    m.snr_in_db = snr_db(mics.p_s, mics.p_v);
    m.snr_out_db = run.e_v.squaredNorm() > 0.0 ? snr_db(run.e_s, run.e_v) : std::numeric_limits<double>::infinity();
  }
  m.sdi_db = speech_distortion_index(run.t, run.e_s);
  m.sdi_clamped = m.sdi_db <= kSdiFloorDb;
  m.effort = control_effort(run.y);
  m.quality_db = quality_proxy(run.t, run.e, frame, hop);
  return m;
}

}  // namespace ssanc
