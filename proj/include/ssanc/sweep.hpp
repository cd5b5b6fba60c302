#pragma once

// Config-driven delay sweeps: for every target delay, design the control
// filter, run it over the scene and evaluate the metrics. Results go to CSV.
//
// Config schema (JSON, every key optional unless noted):
//
//   scene         {"type": "synthetic", <SynthParams fields>} or
//                 {"type": "manifest", "path": "<manifest.json>"}
//   speech_wav    mono WAV for the desired source (default: synthetic speech-like signal)
//   noise_wav     mono WAV for the noise source (default: synthetic babble)
//   duration_s    signal length in seconds (default 5)
//   fs            sample rate of the synthetic scene (default 16000)
//   desired_only  render the desired source only (default false)
//   snr_db        SNR at the error microphone (default -5)
//   Lw, Lg, Lh    control filter, secondary path and ReIR lengths (default 48)
//   target        "error_mic" or "reference_mic"
//   delta         {"start", "stop", "step"} (default 0..Lw/2 step 1)
//   psi           "off" or {"cutoff_hz": 120, "taps": L}
//   beta_div, rho_div, beta, rho, reir_reg
//   quality_frame, quality_hop
//   seed          master seed (default 1)
//   output        CSV path (default "sweep.csv"), relative to the working directory
//   record_timing fill the design_ms column (default false; timing breaks byte-identical output)
//
// Paths inside the config are resolved against the config file's directory.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ssanc/convmat.hpp"
#include "ssanc/error.hpp"
#include "ssanc/metrics.hpp"
#include "ssanc/reir.hpp"
#include "ssanc/scene.hpp"
#include "ssanc/signals.hpp"
#include "ssanc/simulate.hpp"
#include "ssanc/solver.hpp"
#include "ssanc/wav.hpp"

namespace ssanc {

struct DeltaRange {
  Index start = 0;
  Index stop = 0;
  Index step = 1;

  std::vector<Index> values() const {
    std::vector<Index> v;
    for (Index d = start; d <= stop; d += step) v.push_back(d);
    return v;
  }
};

struct PsiConfig {
  bool enabled = false;
  double cutoff_hz = 120.0;
  Index taps = 0;  // 0 means L
};

struct SweepConfig {
  bool manifest_scene = false;
  std::filesystem::path manifest;
  SynthParams synth = default_synth_params();
  std::optional<std::filesystem::path> speech_wav, noise_wav;
  double duration_s = 5.0;
  bool desired_only = false;
  double snr_db = -5.0;
  Index Lw = 48, Lg = 48, Lh = 48;
  TargetKind target = TargetKind::error_mic;
  DeltaRange delta{0, 24, 1};
  PsiConfig psi;
  DesignParams design;
  double reir_reg = -1.0;
  Index quality_frame = 256, quality_hop = 128;
  std::uint64_t seed = 1;
  std::filesystem::path output = "sweep.csv";
  bool record_timing = false;

  Index L() const { return Lg + Lw - 1; }

  /// Largest delay the constraint can represent for the configured target.
  Index max_delta() const { return target == TargetKind::error_mic ? L() - 1 : Lh - 1; }

  void validate() const {
    if (Lw < 1 || Lg < 1 || Lh < 1) throw InvalidArgument("config: Lw, Lg and Lh must be >= 1");
    if (delta.step < 1) throw InvalidArgument("config: delta.step must be >= 1");
    if (delta.start < 0 || delta.stop < delta.start)
      throw InvalidArgument("config: delta range must satisfy 0 <= start <= stop");
    if (delta.stop > max_delta())
      throw InvalidArgument("config: delta.stop = " + std::to_string(delta.stop) + " exceeds " +
                            std::to_string(max_delta()) + " for the " + to_string(target) + " target");
    if (!(duration_s > 0.0)) throw InvalidArgument("config: duration_s must be positive");
    if (psi.enabled && psi.taps != 0 && (psi.taps < 8 || psi.taps > L()))
      throw InvalidArgument("config: psi.taps must lie in [8, L]");
    if (!(design.beta_div > 0.0) || !(design.rho_div > 0.0))
      throw InvalidArgument("config: beta_div and rho_div must be positive");
    if (quality_frame < 8 || quality_hop < 1)
      throw InvalidArgument("config: quality_frame must be >= 8 and quality_hop >= 1");
  }
};

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline SynthParams synth_from_json(const nlohmann::json& j, SynthParams p) {
  read_opt(j, "K", p.K);
  read_opt(j, "speech_delays", p.speech_delays);
  read_opt(j, "noise_delays", p.noise_delays);
  if (j.contains("gains")) {
    p.gains.clear();
    for (const auto& g : j.at("gains")) p.gains.push_back({g.at(0).get<double>(), g.at(1).get<double>()});
  }
  read_opt(j, "sec_delay", p.sec_delay);
  read_opt(j, "sec_ir_len", p.sec_ir_len);
  read_opt(j, "sec_gain", p.sec_gain);
  read_opt(j, "ir_len", p.ir_len);
  read_opt(j, "tail_level", p.tail_level);
  read_opt(j, "tail_decay", p.tail_decay);
  if (j.contains("spatial_ref")) p.spatial_ref = j.at("spatial_ref").get<int>() - 1;
  return p;
}

}  // namespace detail

inline SweepConfig sweep_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  SweepConfig c;
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  try {
    if (!j.is_object()) throw LoadError("config: top level must be a JSON object");
    detail::read_opt(j, "fs", c.synth.fs);
    detail::read_opt(j, "Lw", c.Lw);
    detail::read_opt(j, "Lg", c.Lg);
    detail::read_opt(j, "Lh", c.Lh);
    c.synth.sec_ir_len = c.Lg;
    c.delta = {0, c.Lw / 2, 1};
    if (j.contains("scene")) {
      const auto& s = j.at("scene");
      const std::string type = s.value("type", "synthetic");
      if (type == "manifest") {
        c.manifest_scene = true;
        c.manifest = resolve(s.at("path").get<std::string>());
      } else if (type == "synthetic") {
        c.synth = detail::synth_from_json(s, c.synth);
      } else {
        throw LoadError("config: scene.type must be 'synthetic' or 'manifest'");
      }
    }
    if (j.contains("speech_wav")) c.speech_wav = resolve(j.at("speech_wav").get<std::string>());
    if (j.contains("noise_wav")) c.noise_wav = resolve(j.at("noise_wav").get<std::string>());
    detail::read_opt(j, "duration_s", c.duration_s);
    detail::read_opt(j, "desired_only", c.desired_only);
    detail::read_opt(j, "snr_db", c.snr_db);
    if (j.contains("target")) c.target = parse_target_kind(j.at("target").get<std::string>());
    if (j.contains("delta")) {
      const auto& d = j.at("delta");
      detail::read_opt(d, "start", c.delta.start);
      detail::read_opt(d, "stop", c.delta.stop);
      detail::read_opt(d, "step", c.delta.step);
    }
    if (j.contains("psi")) {
      const auto& p = j.at("psi");
      if (p.is_string()) {
        if (p.get<std::string>() != "off") throw LoadError("config: psi must be \"off\" or an object");
      } else {
        c.psi.enabled = true;
        detail::read_opt(p, "cutoff_hz", c.psi.cutoff_hz);
        detail::read_opt(p, "taps", c.psi.taps);
      }
    }
    detail::read_opt(j, "beta_div", c.design.beta_div);
    detail::read_opt(j, "rho_div", c.design.rho_div);
    if (j.contains("beta")) c.design.beta = j.at("beta").get<double>();
    if (j.contains("rho")) c.design.rho = j.at("rho").get<double>();
    detail::read_opt(j, "reir_reg", c.reir_reg);
    detail::read_opt(j, "quality_frame", c.quality_frame);
    detail::read_opt(j, "quality_hop", c.quality_hop);
    detail::read_opt(j, "seed", c.seed);
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    detail::read_opt(j, "record_timing", c.record_timing);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw LoadError(e.what());
  }
  return c;
}

inline SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("config '" + path.string() + "': " + e.what());
  }
  return sweep_config_from_json(j, path.parent_path());
}

/// Everything shared by all delays of a sweep.
struct Experiment {
  SweepConfig config;
  Scene scene;
  MicSignals mics;
  ReIRSet reirs;
  Vector psi = Vector::Ones(1);
  Matrix phi_xx;

  double fs() const { return scene.fs; }
};

namespace detail {

inline Vector source_signal(const std::optional<std::filesystem::path>& path, Index n, double fs,
                            const char* role, Vector (*fallback)(Index, double, std::uint64_t),
                            std::uint64_t seed) {
  if (!path) return fallback(n, fs, seed);
  double file_fs = 0.0;
  Vector v = wav::read_mono(*path, &file_fs);
  if (file_fs != fs)
    throw LoadError(std::string(role) + " WAV '" + path->string() + "' is at " + std::to_string(file_fs) +
                    " Hz, scene runs at " + std::to_string(fs) + " Hz");
  if (v.size() < n)
    throw LoadError(std::string(role) + " WAV '" + path->string() + "' is shorter than duration_s");
  return v.head(n);
}

inline Vector babble_default(Index n, double fs, std::uint64_t seed) { return signals::babble(n, fs, seed); }

}  // namespace detail

inline Experiment prepare_experiment(const SweepConfig& config) {
  config.validate();
  Experiment ex;
  ex.config = config;

  if (config.manifest_scene) {
    ex.scene = load_scene_wav(config.manifest);
  } else {
    SynthParams p = config.synth;
    p.seed = config.seed;
    ex.scene = synth_scene(p);
  }
  if (ex.scene.g.size() > config.Lg)
    throw InvalidArgument("config: secondary path has " + std::to_string(ex.scene.g.size()) +
                          " taps, more than Lg = " + std::to_string(config.Lg));
  if (ex.scene.g.size() < config.Lg) {
    std::cerr << "warning: secondary path zero-padded from " << ex.scene.g.size() << " to Lg = " << config.Lg
              << " taps\n";
    ex.scene.g = zero_padded(ex.scene.g, config.Lg);
  }

  const double fs = ex.scene.fs;
  const auto n = static_cast<Index>(std::llround(config.duration_s * fs));
  if (n < static_cast<Index>(fs)) throw InvalidArgument("config: signals must be at least 1 s long");

  const std::uint64_t s = config.seed;
  const Vector speech =
      detail::source_signal(config.speech_wav, n, fs, "speech", &signals::speech_like, s * 4 + 1);
  if (config.desired_only) {
    ex.mics = render_desired(ex.scene, speech);
  } else {
    const Vector noise =
        detail::source_signal(config.noise_wav, n, fs, "noise", &detail::babble_default, s * 4 + 2);
    ex.mics = render_mics(ex.scene, speech, noise, config.snr_db);
  }

  // ReIRs from a white-noise rendering of the desired source.
  const MicSignals probe = render_desired(ex.scene, signals::white_noise(n, s * 4 + 3));
  ex.reirs = estimate_reirs(probe, ex.scene.spatial_ref, config.Lh, config.reir_reg);

  if (config.psi.enabled)
    ex.psi = design_min_phase_highpass(config.psi.cutoff_hz, fs, config.psi.taps > 0 ? config.psi.taps : config.L());
  ex.phi_xx = autocorrelation(ex.mics.channels(), config.L());
  return ex;
}

struct SweepRow {
  Index delta = 0;
  double nr_db = 0.0;
  double sdi_db = 0.0;
  double quality_db = 0.0;
  double effort = 0.0;
  double constraint_residual = 0.0;
  double design_ms = 0.0;
  std::string error;  // non-empty: this delay failed, numeric fields are meaningless
};

struct DelayOutcome {
  DesignResult design;
  RunResult run;
  MetricBundle metrics;
  double design_ms = 0.0;
};

inline ControlDesigner make_designer(const Experiment& ex) {
  const Matrix H = build_constraint_matrix(ex.reirs, ex.config.L());
  return ControlDesigner(ex.phi_xx, ex.scene.g, H, ex.scene.K, ex.config.Lw, ex.config.design);
}

inline DelayOutcome run_delay(const Experiment& ex, const ControlDesigner& designer, Index delta) {
  const SweepConfig& c = ex.config;
  DelayOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const Vector f = constraint_vector(ex.reirs, ex.psi, c.target, delta, c.L());
  out.design = designer.design(f);
  out.design_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  out.run = apply_control(out.design.filter, ex.mics, ex.scene.g);
  out.run.t = realize_target(ex.mics, c.target, delta, ex.scene.spatial_ref);
  out.metrics = evaluate(ex.mics, out.run, c.quality_frame, c.quality_hop);
  return out;
}

/// Rows come back in delay order regardless of `threads`.
inline std::vector<SweepRow> run_sweep(const Experiment& ex, unsigned threads = 1) {
  const ControlDesigner designer = make_designer(ex);
  const std::vector<Index> deltas = ex.config.delta.values();
  std::vector<SweepRow> rows(deltas.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < deltas.size(); i = next++) {
      SweepRow& row = rows[i];
      row.delta = deltas[i];
      try {
        const DelayOutcome o = run_delay(ex, designer, deltas[i]);
        row.nr_db = o.metrics.nr_db;
        row.sdi_db = o.metrics.sdi_db;
        row.quality_db = o.metrics.quality_db;
        row.effort = o.metrics.effort;
        row.constraint_residual = o.design.diagnostics.constraint_residual;
        row.design_ms = o.design_ms;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(deltas.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

inline std::vector<SweepRow> run_sweep(const SweepConfig& config, unsigned threads = 1) {
  return run_sweep(prepare_experiment(config), threads);
}

namespace detail {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "delta,nr_db,sdi_db,quality_db,effort,constraint_residual,design_ms,error";

inline void write_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool record_timing) {
  using detail::format_number;
  out << kCsvHeader << "\r\n";
  for (const auto& r : rows) {
    out << r.delta << ',';
    if (r.error.empty()) {
      out << format_number(r.nr_db) << ',' << format_number(r.sdi_db) << ',' << format_number(r.quality_db) << ','
          << format_number(r.effort) << ',' << format_number(r.constraint_residual) << ',';
    } else {
      out << ",,,,,";
    }
    if (record_timing && r.error.empty()) out << format_number(r.design_ms);
    out << ',' << detail::csv_field(r.error) << "\r\n";
  }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows, bool record_timing) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path.string() + "'");
  write_csv(out, rows, record_timing);
}

/// gnuplot script plotting every metric column of `csv` against delta.
inline std::string gnuplot_script(const std::filesystem::path& csv, const std::string& title) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set key off\n"
    << "set xlabel 'delay (samples)'\n"
    << "set grid\n"
    << "set multiplot layout 2,2 title '" << title << "'\n";
  const char* names[] = {"NR (dB)", "SDI (dB)", "log-spectral distance (dB)", "control effort"};
  for (int col = 2; col <= 5; ++col)
    s << "set ylabel '" << names[col - 2] << "'\n"
      << "plot '" << csv.filename().string() << "' every ::1 using 1:" << col << " with linespoints pt 7 ps 0.5\n";
  s << "unset multiplot\n";
  return s.str();
}

}  // namespace ssanc
