#pragma once

// Relative impulse responses (ReIRs) of the desired source with respect to a
// spatial reference microphone, and the minimum-phase high-pass prototype
// used for spectral weighting of the constraint.

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "ssanc/convmat.hpp"
#include "ssanc/correlation.hpp"
#include "ssanc/error.hpp"
#include "ssanc/scene.hpp"

namespace ssanc {

struct ReIRSet {
  std::vector<Vector> h;         // K+1 filters of length Lh; h[K] maps to the error mic
  int spatial_ref = 0;           // 0-based
  Index Lh = 0;
  std::vector<double> residual;  // per channel, residual energy / channel energy

  int K() const { return static_cast<int>(h.size()) - 1; }
};

/// Least-squares ReIR estimate per channel:
///   h_k = argmin sum_n (x_k(n) - (h * x_ref)(n))^2 + reg * |h|^2.
/// `reg < 0` selects 1e-8 times the mean diagonal of the normal matrix.
/// The signals must come from a desired-only rendering.
inline ReIRSet estimate_reirs(const MicSignals& mics, int spatial_ref, Index Lh, double reg = -1.0) {
  if (spatial_ref < 0 || spatial_ref >= mics.K)
    throw InvalidArgument("estimate_reirs: spatial reference " + std::to_string(spatial_ref + 1) +
                          " is not a reference microphone (1.." + std::to_string(mics.K) + ")");
  if (Lh < 1) throw InvalidArgument("estimate_reirs: Lh must be >= 1");
  if (mics.N() <= Lh) throw InvalidArgument("estimate_reirs: signal shorter than the ReIR length");
  for (int k = 0; k <= mics.K; ++k)
    if (mics.noise(k).squaredNorm() != 0.0)
      throw InvalidArgument("estimate_reirs: expects a desired-only rendering (noise components must be zero)");

  const Vector& ref = mics.speech(spatial_ref);
  Matrix R = lagged_products(ref, ref, Lh, Lh);
  R = 0.5 * (R + R.transpose()).eval();
  if (reg < 0.0) reg = 1e-8 * R.diagonal().mean();
  R.diagonal().array() += reg;
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() != Eigen::Success)
    throw NumericError("estimate_reirs: normal equations are singular; increase the ridge weight");

  ReIRSet set;
  set.spatial_ref = spatial_ref;
  set.Lh = Lh;
  for (int k = 0; k <= mics.K; ++k) {
    const Vector& xk = mics.speech(k);
    const Vector r = lagged_products(ref, xk, Lh, 1).col(0);
    Vector h = llt.solve(r);
    const double energy = xk.squaredNorm();
    const double err = (xk - filter(h, ref)).squaredNorm();
    set.residual.push_back(energy > 0.0 ? err / energy : 0.0);
    set.h.push_back(std::move(h));
  }
  return set;
}

inline nlohmann::json reirs_to_json(const ReIRSet& set) {
  nlohmann::json taps = nlohmann::json::array();
  for (const auto& h : set.h) taps.push_back(std::vector<double>(h.data(), h.data() + h.size()));
  return {{"spatial_ref", set.spatial_ref + 1}, {"Lh", set.Lh}, {"h", taps},
          {"residual", set.residual}};
}

inline ReIRSet reirs_from_json(const nlohmann::json& j) {
  ReIRSet set;
  try {
    set.spatial_ref = j.at("spatial_ref").get<int>() - 1;
    set.Lh = j.at("Lh").get<Index>();
    for (const auto& taps : j.at("h")) {
      const auto v = taps.get<std::vector<double>>();
      if (static_cast<Index>(v.size()) != set.Lh) throw LoadError("ReIR JSON: tap count differs from Lh");
      set.h.push_back(Eigen::Map<const Vector>(v.data(), set.Lh));
    }
    if (j.contains("residual")) set.residual = j.at("residual").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("ReIR JSON: ") + e.what());
  }
  if (set.h.size() < 2 || set.spatial_ref < 0 || set.spatial_ref >= set.K())
    throw LoadError("ReIR JSON: inconsistent channel count or spatial reference");
  return set;
}

/// Linear-phase windowed-sinc high-pass (spectral inversion of a Hamming
/// lowpass). Odd lengths are designed directly; even lengths get one
/// trailing zero.
inline Vector linear_phase_highpass(double cutoff_hz, double fs, Index len) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0))
    throw InvalidArgument("highpass: cutoff must lie in (0, fs/2)");
  if (len < 3) throw InvalidArgument("highpass: need at least 3 taps");
  const Index n = (len % 2 == 1) ? len : len - 1;
  const Index mid = n / 2;
  const double fc = cutoff_hz / fs;
  Vector lp(n);
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i - mid);
    const double sinc = t == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    const double win = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    lp[i] = sinc * win;
  }
  lp /= lp.sum();
  Vector hp = -lp;
  hp[mid] += 1.0;
  return zero_padded(hp, len);
}

/// Minimum-phase counterpart of `linear_phase_highpass` with the same
/// magnitude response, via real-cepstrum folding.
inline Vector design_min_phase_highpass(double cutoff_hz, double fs, Index len) {
  if (len < 8) throw InvalidArgument("design_min_phase_highpass: need at least 8 taps");
  const Vector proto = linear_phase_highpass(cutoff_hz, fs, len);

  Index nfft = 1;
  while (nfft < 64 * len) nfft <<= 1;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> time(static_cast<std::size_t>(nfft)), freq;
  for (Index i = 0; i < len; ++i) time[static_cast<std::size_t>(i)] = proto[i];
  fft.fwd(freq, time);

  double peak = 0.0;
  for (const auto& z : freq) peak = std::max(peak, std::abs(z));
  const double floor = peak * 1e-9;
  std::vector<std::complex<double>> logmag(freq.size());
  for (std::size_t i = 0; i < freq.size(); ++i) logmag[i] = std::log(std::max(std::abs(freq[i]), floor));

  std::vector<std::complex<double>> cep;
  fft.inv(cep, logmag);
  const std::size_t half = static_cast<std::size_t>(nfft / 2);
  for (std::size_t i = 1; i < half; ++i) cep[i] = 2.0 * cep[i].real();
  cep[0] = cep[0].real();
  cep[half] = cep[half].real();
  for (std::size_t i = half + 1; i < cep.size(); ++i) cep[i] = 0.0;

  std::vector<std::complex<double>> spec;
  fft.fwd(spec, cep);
  for (auto& z : spec) z = std::exp(z);
  std::vector<std::complex<double>> minph;
  fft.inv(minph, spec);

  Vector out(len);
  for (Index i = 0; i < len; ++i) out[i] = minph[static_cast<std::size_t>(i)].real();
  // Equal magnitude implies equal energy; restore what truncation dropped.
  out *= std::sqrt(proto.squaredNorm() / out.squaredNorm());
  return out;
}

/// |H(f)| of an FIR at frequency f (Hz).
inline double magnitude_at(const Vector& taps, double f_hz, double fs) {
  std::complex<double> acc = 0.0;
  const double w = 2.0 * std::numbers::pi * f_hz / fs;
  for (Index i = 0; i < taps.size(); ++i) acc += taps[i] * std::polar(1.0, -w * static_cast<double>(i));
  return std::abs(acc);
}

}  // namespace ssanc
