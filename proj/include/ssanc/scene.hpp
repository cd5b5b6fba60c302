#pragma once

// Acoustic scene: impulse responses from the desired (speech) and undesired
// (noise) source to K reference microphones and one error microphone, plus the
// secondary path from the loudspeaker to the error microphone.
//
// Channel indices are 0-based in the API; channel K is the error microphone.
// Files (manifests, configs) use 1-based microphone labels.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssanc/convmat.hpp"
#include "ssanc/error.hpp"
#include "ssanc/wav.hpp"

namespace ssanc {

struct Scene {
  int K = 0;
  std::vector<Vector> ir_speech;  // K+1 responses, last one at the error mic
  std::vector<Vector> ir_noise;   // K+1 responses
  Vector g;                       // secondary path
  double fs = 16000.0;
  int spatial_ref = 0;  // in [0, K)

  int err_index() const { return K; }
  int num_mics() const { return K + 1; }
  Index Lg() const { return g.size(); }

  Index max_ir_len() const {
    Index n = 0;
    for (const auto& h : ir_speech) n = std::max(n, h.size());
    for (const auto& h : ir_noise) n = std::max(n, h.size());
    return n;
  }

  void validate() const {
    if (K < 1) throw InvalidArgument("scene: need at least one reference microphone");
    if (static_cast<int>(ir_speech.size()) != K + 1 || static_cast<int>(ir_noise.size()) != K + 1)
      throw InvalidArgument("scene: expected " + std::to_string(K + 1) +
                            " impulse responses per source");
    if (g.size() < 1) throw InvalidArgument("scene: empty secondary path");
    if (spatial_ref < 0 || spatial_ref >= K)
      throw InvalidArgument("scene: spatial reference must be a reference microphone");
    if (!(fs > 0.0)) throw InvalidArgument("scene: sample rate must be positive");
    const auto finite = [](const Vector& v) { return v.size() > 0 && v.allFinite(); };
    for (int k = 0; k <= K; ++k)
      if (!finite(ir_speech[k]) || !finite(ir_noise[k]))
        throw InvalidArgument("scene: impulse response " + std::to_string(k + 1) +
                              " is empty or not finite");
    if (!g.allFinite()) throw InvalidArgument("scene: secondary path not finite");
  }
};

struct MicGain {
  double speech = 1.0;
  double noise = 1.0;
};

/// Parameters of a sparse synthetic scene (integer-delay pulses with optional
/// seeded exponentially decaying tails).
struct SynthParams {
  int K = 2;
  std::vector<Index> speech_delays;  // K+1 entries, samples
  std::vector<Index> noise_delays;   // K+1 entries, samples
  std::vector<MicGain> gains;        // K+1 entries, empty means unit gains
  Index sec_delay = 1;
  Index sec_ir_len = 48;
  double sec_gain = 1.0;
  double fs = 16000.0;
  std::uint64_t seed = 1;
  Index ir_len = 64;
  double tail_level = 0.0;
  double tail_decay = 6.0;  // samples
  int spatial_ref = -1;     // -1 selects the reference mic with the smallest speech delay
};

/// Desk-scale default: two reference microphones, the desired source reaches
/// the spatial reference (mic 2) first and the error microphone 4 samples
/// later, the noise source reaches mic 1 six samples ahead of the error mic.
inline SynthParams default_synth_params() {
  SynthParams p;
  p.K = 2;
  p.speech_delays = {1, 0, 4};
  p.noise_delays = {0, 3, 6};
  p.gains = {{0.9, 1.0}, {1.0, 0.7}, {0.85, 0.8}};
  p.sec_delay = 1;
  p.sec_ir_len = 48;
  p.sec_gain = 0.8;
  p.ir_len = 64;
  p.tail_level = 0.05;
  return p;
}

namespace detail {

inline Vector sparse_ir(Index len, Index delay, double gain, double tail_level, double decay,
                        std::uint64_t seed) {
  Vector h = unit_pulse(delay, len) * gain;
  if (tail_level > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = delay + 1; i < len; ++i)
      h[i] = tail_level * gain * normal(rng) * std::exp(-static_cast<double>(i - delay) / decay);
  }
  return h;
}

}  // namespace detail

inline Scene synth_scene(const SynthParams& p) {
  if (p.K < 1) throw InvalidArgument("synth_scene: K must be >= 1");
  const auto n = static_cast<std::size_t>(p.K + 1);
  if (p.speech_delays.size() != n || p.noise_delays.size() != n)
    throw InvalidArgument("synth_scene: need K+1 speech and noise delays");
  if (!p.gains.empty() && p.gains.size() != n)
    throw InvalidArgument("synth_scene: need K+1 gain pairs");
  if (p.sec_delay < 1)
    throw InvalidArgument("synth_scene: secondary path needs at least one sample of delay");
  if (p.sec_delay >= p.sec_ir_len)
    throw InvalidArgument("synth_scene: secondary delay must be below the secondary IR length");
  for (std::size_t k = 0; k < n; ++k)
    if (p.speech_delays[k] < 0 || p.speech_delays[k] >= p.ir_len || p.noise_delays[k] < 0 ||
        p.noise_delays[k] >= p.ir_len)
      throw InvalidArgument("synth_scene: delays must lie in [0, ir_len)");

  Scene s;
  s.K = p.K;
  s.fs = p.fs;
  for (std::size_t k = 0; k < n; ++k) {
    const MicGain gain = p.gains.empty() ? MicGain{} : p.gains[k];
    const std::uint64_t base = p.seed * 1000003ULL + k * 2;
    s.ir_speech.push_back(detail::sparse_ir(p.ir_len, p.speech_delays[k], gain.speech,
                                            p.tail_level, p.tail_decay, base));
    s.ir_noise.push_back(detail::sparse_ir(p.ir_len, p.noise_delays[k], gain.noise,
                                           p.tail_level, p.tail_decay, base + 1));
  }
  s.g = detail::sparse_ir(p.sec_ir_len, p.sec_delay, p.sec_gain, p.tail_level, p.tail_decay,
                          p.seed * 1000003ULL + 999);

  if (p.spatial_ref >= 0) {
    s.spatial_ref = p.spatial_ref;
  } else {
    s.spatial_ref = 0;
    for (int k = 1; k < p.K; ++k)
      if (p.speech_delays[k] < p.speech_delays[s.spatial_ref]) s.spatial_ref = k;
  }
  s.validate();
  return s;
}

/// Roles -> filenames of a measured IR set. `spatial_ref` is a 1-based label.
struct SceneManifest {
  double fs = 16000.0;
  int mics = 0;
  std::vector<std::string> speech_irs;
  std::vector<std::string> noise_irs;
  std::string secondary;
  int spatial_ref = 1;

  static SceneManifest from_json(const nlohmann::json& j) {
    SceneManifest m;
    try {
      m.fs = j.at("fs").get<double>();
      m.mics = j.at("mics").get<int>();
      m.speech_irs = j.at("speech_irs").get<std::vector<std::string>>();
      m.noise_irs = j.at("noise_irs").get<std::vector<std::string>>();
      m.secondary = j.at("secondary").get<std::string>();
      m.spatial_ref = j.at("spatial_ref").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(std::string("scene manifest: ") + e.what());
    }
    return m;
  }

  nlohmann::json to_json() const {
    return {{"fs", fs},           {"mics", mics},         {"speech_irs", speech_irs},
            {"noise_irs", noise_irs}, {"secondary", secondary}, {"spatial_ref", spatial_ref}};
  }
};

inline Scene load_scene_wav(const std::filesystem::path& dir, const SceneManifest& m) {
  if (m.mics < 2) throw LoadError("scene manifest: need at least 2 microphones");
  if (static_cast<int>(m.speech_irs.size()) != m.mics ||
      static_cast<int>(m.noise_irs.size()) != m.mics)
    throw LoadError("scene manifest: expected " + std::to_string(m.mics) +
                    " speech and noise impulse responses");
  if (m.spatial_ref < 1 || m.spatial_ref >= m.mics)
    throw LoadError("scene manifest: spatial_ref must name a reference microphone (1.." +
                    std::to_string(m.mics - 1) + ")");

  const auto load = [&](const std::string& name) {
    double fs = 0.0;
    Vector v = wav::read_mono(dir / name, &fs);
    if (fs != m.fs)
      throw LoadError("'" + (dir / name).string() + "': sample rate " + std::to_string(fs) +
                      " Hz does not match manifest rate " + std::to_string(m.fs) + " Hz");
    return v;
  };

  Scene s;
  s.K = m.mics - 1;
  s.fs = m.fs;
  s.spatial_ref = m.spatial_ref - 1;
  for (int k = 0; k < m.mics; ++k) {
    s.ir_speech.push_back(load(m.speech_irs[k]));
    s.ir_noise.push_back(load(m.noise_irs[k]));
  }
  s.g = load(m.secondary);
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw LoadError(std::string("scene manifest: ") + e.what());
  }
  return s;
}

inline Scene load_scene_wav(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError("cannot open scene manifest '" + manifest_path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("scene manifest '" + manifest_path.string() + "': " + e.what());
  }
  return load_scene_wav(manifest_path.parent_path(), SceneManifest::from_json(j));
}

/// Component-wise microphone signals. Reference channels 0..K-1 are in
/// x_s / x_v; the error-microphone primary signal is p = p_s + p_v.
struct MicSignals {
  int K = 0;
  std::vector<Vector> x_s;
  std::vector<Vector> x_v;
  Vector p_s;
  Vector p_v;

  Index N() const { return p_s.size(); }
  Vector p() const { return p_s + p_v; }

  const Vector& speech(int ch) const { return ch == K ? p_s : x_s.at(static_cast<std::size_t>(ch)); }
  const Vector& noise(int ch) const { return ch == K ? p_v : x_v.at(static_cast<std::size_t>(ch)); }
  Vector channel(int ch) const { return speech(ch) + noise(ch); }

  /// Controller inputs [x_1 .. x_K, p].
  std::vector<Vector> channels() const {
    std::vector<Vector> out;
    for (int k = 0; k <= K; ++k) out.push_back(channel(k));
    return out;
  }
  std::vector<Vector> speech_channels() const {
    std::vector<Vector> out;
    for (int k = 0; k <= K; ++k) out.push_back(speech(k));
    return out;
  }
  std::vector<Vector> noise_channels() const {
    std::vector<Vector> out;
    for (int k = 0; k <= K; ++k) out.push_back(noise(k));
    return out;
  }

  MicSignals scaled(double c) const {
    MicSignals m = *this;
    for (auto& v : m.x_s) v *= c;
    for (auto& v : m.x_v) v *= c;
    m.p_s *= c;
    m.p_v *= c;
    return m;
  }
};

inline double snr_db(const Vector& s, const Vector& v) {
  return 10.0 * std::log10(s.squaredNorm() / v.squaredNorm());
}

/// Render the desired source only; noise components are zero.
inline MicSignals render_desired(const Scene& scene, const Vector& speech) {
  scene.validate();
  if (speech.size() <= scene.max_ir_len())
    throw InvalidArgument("render: signal must be longer than the longest impulse response");
  MicSignals m;
  m.K = scene.K;
  for (int k = 0; k < scene.K; ++k) {
    m.x_s.push_back(filter(scene.ir_speech[k], speech));
    m.x_v.push_back(Vector::Zero(speech.size()));
  }
  m.p_s = filter(scene.ir_speech[scene.K], speech);
  m.p_v = Vector::Zero(speech.size());
  return m;
}

/// Render both sources; the noise is scaled so that the error-microphone SNR
/// (full-signal energies) equals `snr_db_at_error`.
inline MicSignals render_mics(const Scene& scene, const Vector& speech, const Vector& noise,
                              double snr_db_at_error) {
  if (speech.size() != noise.size())
    throw InvalidArgument("render_mics: speech and noise lengths differ");
  MicSignals m = render_desired(scene, speech);
  const Vector p_v = filter(scene.ir_noise[scene.K], noise);
  const double ev = p_v.squaredNorm();
  if (!(ev > 0.0))
    throw NumericError("render_mics: noise component at the error microphone is silent, cannot scale to SNR");
  const double es = m.p_s.squaredNorm();
  const double alpha = std::sqrt(es / (ev * std::pow(10.0, snr_db_at_error / 10.0)));
  for (int k = 0; k < scene.K; ++k) m.x_v[k] = alpha * filter(scene.ir_noise[k], noise);
  m.p_v = alpha * p_v;
  return m;
}

}  // namespace ssanc
