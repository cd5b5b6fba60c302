#pragma once

// Seeded test signals: white noise, speech-shaped noise with a syllabic
// envelope (stand-in for a clean utterance) and a babble-like mixture.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "ssanc/convmat.hpp"

namespace ssanc::signals {

inline Vector white_noise(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// White noise through a low-Q resonance near 500 Hz with a DC-blocking
/// zero, roughly following the long-term speech spectrum.
inline Vector speech_shaped_noise(Index n, double fs, std::uint64_t seed) {
  const Vector white = white_noise(n, seed);
  const double r = 0.92;
  const double theta = 2.0 * std::numbers::pi * 500.0 / fs;
  const double a1 = 2.0 * r * std::cos(theta);
  const double a2 = -r * r;
  Vector out = Vector::Zero(n);
  double y1 = 0.0, y2 = 0.0, x1 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double y = white[i] - x1 + a1 * y1 + a2 * y2;
    x1 = white[i];
    y2 = y1;
    y1 = y;
    out[i] = y;
  }
  return out / std::sqrt(out.squaredNorm() / std::max<Index>(n, 1));
}

/// Speech-shaped noise gated by a smooth 3-6 Hz syllable envelope with
/// occasional pauses, normalized to unit RMS.
inline Vector speech_like(Index n, double fs, std::uint64_t seed) {
  Vector carrier = speech_shaped_noise(n, fs, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Index i = 0;
  while (i < n) {
    const double rate = 3.0 + 3.0 * uni(rng);
    const Index len = std::max<Index>(1, static_cast<Index>(fs / rate));
    const bool pause = uni(rng) < 0.15;
    const double level = pause ? 0.0 : 0.4 + 0.6 * uni(rng);
    for (Index j = 0; j < len && i + j < n; ++j) {
      const double s = std::sin(std::numbers::pi * static_cast<double>(j) / static_cast<double>(len));
      carrier[i + j] *= level * s * s;
    }
    i += len;
  }
  const double rms = std::sqrt(carrier.squaredNorm() / std::max<Index>(n, 1));
  return rms > 0.0 ? Vector(carrier / rms) : carrier;
}

/// Sum of `talkers` independent speech-like streams, unit RMS.
inline Vector babble(Index n, double fs, std::uint64_t seed, int talkers = 6) {
  Vector sum = Vector::Zero(n);
  for (int t = 0; t < talkers; ++t)
    sum += speech_like(n, fs, seed * 1315423911ULL + static_cast<std::uint64_t>(t) + 1);
  const double rms = std::sqrt(sum.squaredNorm() / std::max<Index>(n, 1));
  return rms > 0.0 ? Vector(sum / rms) : sum;
}

}  // namespace ssanc::signals
