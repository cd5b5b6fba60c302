#pragma once

// Command-line front end: design, sweep, simulate, verify.
// Exit codes: 0 success, 1 configuration or input error, 2 numeric failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssanc/error.hpp"
#include "ssanc/metrics.hpp"
#include "ssanc/simulate.hpp"
#include "ssanc/solver.hpp"
#include "ssanc/sweep.hpp"
#include "ssanc/verify.hpp"
#include "ssanc/wav.hpp"

namespace ssanc {

inline nlohmann::json filter_to_json(const ControlFilter& f) {
  nlohmann::json channels = nlohmann::json::array();
  for (int k = 0; k <= f.K; ++k) {
    const Vector c = f.channel(k);
    channels.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  return {{"K", f.K}, {"Lw", f.Lw}, {"channels", channels}};
}

inline ControlFilter filter_from_json(const nlohmann::json& j) {
  ControlFilter f;
  try {
    f.K = j.at("K").get<int>();
    f.Lw = j.at("Lw").get<Index>();
    const auto& channels = j.at("channels");
    if (f.K < 1 || f.Lw < 1 || static_cast<int>(channels.size()) != f.K + 1)
      throw LoadError("filter JSON: expected K+1 channels");
    f.w.resize(static_cast<Index>(f.K + 1) * f.Lw);
    for (int k = 0; k <= f.K; ++k) {
      const auto taps = channels.at(static_cast<std::size_t>(k)).get<std::vector<double>>();
      if (static_cast<Index>(taps.size()) != f.Lw) throw LoadError("filter JSON: channel length differs from Lw");
      f.w.segment(static_cast<Index>(k) * f.Lw, f.Lw) = Eigen::Map<const Vector>(taps.data(), f.Lw);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("filter JSON: ") + e.what());
  }
  return f;
}

/// One WAV channel per filter channel, Lw frames each.
inline void write_filter_wav(const std::filesystem::path& path, const ControlFilter& f, double fs) {
  wav::Audio a;
  a.fs = fs;
  for (int k = 0; k <= f.K; ++k) a.channels.push_back(f.channel(k));
  wav::write(path, a, wav::SampleFormat::float32);
}

inline ControlFilter read_filter_wav(const std::filesystem::path& path) {
  const wav::Audio a = wav::read(path);
  if (a.channels.size() < 2) throw LoadError("filter WAV '" + path.string() + "' needs at least 2 channels");
  ControlFilter f;
  f.K = static_cast<int>(a.channels.size()) - 1;
  f.Lw = a.frames();
  f.w.resize(static_cast<Index>(f.K + 1) * f.Lw);
  for (int k = 0; k <= f.K; ++k) f.w.segment(static_cast<Index>(k) * f.Lw, f.Lw) = a.channels[static_cast<std::size_t>(k)];
  return f;
}

inline nlohmann::json metrics_to_json(const MetricBundle& m) {
  const auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  };
  return {{"nr_db", num(m.nr_db)},           {"sdi_db", num(m.sdi_db)},
          {"quality_db", num(m.quality_db)}, {"effort", num(m.effort)},
          {"snr_in_db", num(m.snr_in_db)},   {"snr_out_db", num(m.snr_out_db)},
          {"nr_infinite", m.nr_infinite},    {"noise_free", m.noise_free},
          {"sdi_clamped", m.sdi_clamped}};
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << text;
}

inline std::vector<Index> parse_dims(const std::string& s) {
  std::vector<Index> v;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(item, &used);
      if (used != item.size() || x < 1) throw std::invalid_argument(item);
      v.push_back(static_cast<Index>(x));
    } catch (const std::exception&) {
      throw InvalidArgument("--verify-dims: '" + s + "' is not a list of positive integers");
    }
  }
  if (v.size() != 3) throw InvalidArgument("--verify-dims expects Lw,Lg,Lh");
  return v;
}

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

inline SweepConfig load_config(const CommonOptions& o) {
  if (o.config.empty()) throw InvalidArgument("--config is required");
  SweepConfig c = load_sweep_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

inline int cmd_design(const CommonOptions& o, std::optional<Index> delta, const std::string& wav_out) {
  SweepConfig c = load_config(o);
  const Index d = delta ? *delta : c.delta.start;
  if (d < 0 || d > c.max_delta())
    throw InvalidArgument("--delta " + std::to_string(d) + " outside [0, " + std::to_string(c.max_delta()) + "]");
  c.delta = {d, d, 1};
  const Experiment ex = prepare_experiment(c);
  const ControlDesigner designer = make_designer(ex);
  const DelayOutcome o2 = run_delay(ex, designer, d);

  const DesignDiagnostics& dg = o2.design.diagnostics;
  nlohmann::json j = filter_to_json(o2.design.filter);
  j["fs"] = ex.fs();
  j["target"] = to_string(c.target);
  j["delta"] = d;
  j["diagnostics"] = {{"beta", dg.beta},
                      {"rho", dg.rho},
                      {"constraint_residual", dg.constraint_residual},
                      {"predicted_error_power", dg.predicted_error_power},
                      {"w_norm", dg.w_norm},
                      {"w_over_q", dg.w_norm},  // |q| = 1
                      {"inner_rank", dg.inner_rank},
                      {"eigenvalues_converged", dg.eigenvalues_converged}};
  j["metrics"] = metrics_to_json(o2.metrics);
  write_text(o.out, j.dump(2) + "\n");
  if (!wav_out.empty()) write_filter_wav(wav_out, o2.design.filter, ex.fs());
  std::cerr << "delta " << d << ": |w| = " << dg.w_norm << ", constraint residual = " << dg.constraint_residual
            << (dg.eigenvalues_converged ? "" : " (power iteration did not converge; best estimate used)") << "\n";
  return 0;
}

inline int cmd_sweep(const CommonOptions& o, const std::string& gnuplot) {
  SweepConfig c = load_config(o);
  if (!o.out.empty()) c.output = o.out;
  const Experiment ex = prepare_experiment(c);
  const std::vector<SweepRow> rows = run_sweep(ex, o.threads);
  write_csv(c.output, rows, c.record_timing);
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.error.empty(); });
  for (const auto& r : rows)
    if (!r.error.empty()) std::cerr << "delta " << r.delta << ": " << r.error << "\n";
  if (!gnuplot.empty())
    write_text(gnuplot, gnuplot_script(c.output, "delay sweep (" + to_string(c.target) + " target)"));
  std::cerr << "wrote " << rows.size() << " rows to " << c.output.string() << "\n";
  return failed == static_cast<long>(rows.size()) && !rows.empty() ? 2 : 0;
}

inline int cmd_simulate(const CommonOptions& o, const std::string& filter_path, std::optional<double> ghat_scale) {
  SweepConfig c = load_config(o);
  if (filter_path.empty()) throw InvalidArgument("--filter is required");
  ControlFilter w;
  Index delta = c.delta.start;
  TargetKind kind = c.target;
  if (std::filesystem::path(filter_path).extension() == ".wav") {
    w = read_filter_wav(filter_path);
  } else {
    std::ifstream in(filter_path);
    if (!in) throw LoadError("cannot open filter '" + filter_path + "'");
    nlohmann::json j;
    try {
      in >> j;
      if (j.contains("delta")) delta = j.at("delta").get<Index>();
      if (j.contains("target")) kind = parse_target_kind(j.at("target").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("filter '" + filter_path + "': " + e.what());
    }
    w = filter_from_json(j);
  }
  c.delta = {delta, delta, 1};
  const Experiment ex = prepare_experiment(c);
  if (w.K != ex.scene.K) throw InvalidArgument("filter has K = " + std::to_string(w.K) + ", scene has " +
                                               std::to_string(ex.scene.K));
  RunResult run = ghat_scale ? closed_loop_sim(w, ex.mics, ex.scene.g, *ghat_scale * ex.scene.g)
                             : apply_control(w, ex.mics, ex.scene.g);
  run.t = realize_target(ex.mics, kind, delta, ex.scene.spatial_ref);
  const MetricBundle m = evaluate(ex.mics, run, c.quality_frame, c.quality_hop);

  const std::filesystem::path dir = o.out.empty() ? "." : o.out;
  std::filesystem::create_directories(dir);
  const auto put = [&](const char* name, const Vector& v) {
    wav::write_mono(dir / name, v, ex.fs(), wav::SampleFormat::float32);
  };
  put("y.wav", run.y);
  put("e.wav", run.e);
  put("e_s.wav", run.e_s);
  put("e_v.wav", run.e_v);
  put("p.wav", ex.mics.p());
  put("t.wav", run.t);
  std::cout << metrics_to_json(m).dump(2) << "\n";
  return 0;
}

inline int cmd_verify(const CommonOptions& o, const std::string& dims, int instances) {
  const std::vector<Index> d = parse_dims(dims);
  const Index Lw = d[0], Lg = d[1], Lh = d[2];
  if (instances < 1) throw InvalidArgument("--instances must be >= 1");
  std::mt19937_64 rng(o.seed.value_or(1));
  double worst = 0.0;
  int done = 0;
  for (int i = 0; i < instances; ++i) {
    int K = 1 + i % 2;
    if (verify::degrees_of_freedom(K, Lw, Lh) < 1) K = 2;
    if (verify::degrees_of_freedom(K, Lw, Lh) < 1)
      throw InvalidArgument("--verify-dims: the constraint fixes every filter tap for K <= 2 (need 2*Lw >= Lh)");
    const auto inst = verify::random_well_posed_instance(rng, K, Lw, Lg, Lh, i % 4 >= 2);
    const auto cmp = verify::compare_with_oracle(inst);
    worst = std::max(worst, cmp.rel_error);
    ++done;
    std::printf("instance %2d  K=%d  beta=%.3e  dropped=%ld  rel_error=%.3e\n", i + 1, K, cmp.beta,
                static_cast<long>(cmp.dropped_rows), cmp.rel_error);
  }
  std::printf("max relative deviation vs. KKT oracle over %d instances: %.3e\n", done, worst);
  return worst <= 1e-8 ? 0 : 2;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Spatially selective ANC filter design and delay sweeps"};
  app.require_subcommand(1);
  detail::CommonOptions opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON experiment config");
    sub->add_option("--out", opt.out, "output path");
    sub->add_option("--seed", opt.seed, "override the config seed");
  };

  std::optional<Index> delta;
  std::string wav_out;
  auto* design = app.add_subcommand("design", "design one filter and export it with diagnostics (JSON)");
  add_common(design);
  design->add_option("--delta", delta, "target delay in samples (default: delta.start)");
  design->add_option("--wav", wav_out, "also export the filter as a multichannel WAV");

  std::string gnuplot;
  auto* sweep = app.add_subcommand("sweep", "run a delay sweep and write CSV");
  add_common(sweep);
  sweep->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--gnuplot", gnuplot, "write a companion gnuplot script");

  std::string filter_path;
  std::optional<double> ghat_scale;
  auto* simulate = app.add_subcommand("simulate", "run a filter over the scene and write WAV outputs");
  add_common(simulate);
  simulate->add_option("--filter", filter_path, "filter JSON (from design) or multichannel WAV");
  simulate->add_option("--ghat-scale", ghat_scale,
                       "closed-loop run with the secondary-path estimate scaled by this factor");

  std::string dims = "4,3,3";
  int instances = 20;
  auto* verify_cmd = app.add_subcommand("verify", "compare the closed-form design with the KKT oracle");
  verify_cmd->add_option("--verify-dims", dims, "Lw,Lg,Lh");
  verify_cmd->add_option("--seed", opt.seed, "random seed");
  verify_cmd->add_option("--instances", instances, "number of random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (design->parsed()) return detail::cmd_design(opt, delta, wav_out);
    if (sweep->parsed()) return detail::cmd_sweep(opt, gnuplot);
    if (simulate->parsed()) return detail::cmd_simulate(opt, filter_path, ghat_scale);
    if (verify_cmd->parsed()) return detail::cmd_verify(opt, dims, instances);
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ssanc
