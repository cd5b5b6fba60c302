#pragma once

// Running a designed control filter over microphone signals. The loudspeaker
// signal is y(n) = sum_k (w_k * x_k)(n) + (w_{K+1} * p_hat)(n) and the error
// signal e(n) = p(n) + (g * y)(n). Speech and noise components are processed
// separately through the same linear system.

#include <string>
#include <vector>

#include "ssanc/convmat.hpp"
#include "ssanc/error.hpp"
#include "ssanc/scene.hpp"
#include "ssanc/solver.hpp"

namespace ssanc {

struct RunResult {
  Vector y, y_s, y_v;
  Vector e, e_s, e_v;
  Vector p_hat;
  Vector t;  // target signal, filled by the caller via realize_target
};

namespace detail {

inline void check_run_dims(const ControlFilter& w, const MicSignals& mics) {
  if (w.K != mics.K)
    throw InvalidArgument("simulate: filter has K=" + std::to_string(w.K) + " but signals have K=" +
                          std::to_string(mics.K));
  if (w.w.size() != static_cast<Index>(w.K + 1) * w.Lw)
    throw InvalidArgument("simulate: filter length does not match (K+1)*Lw");
  for (int k = 0; k <= mics.K; ++k)
    if (mics.speech(k).size() != mics.N() || mics.noise(k).size() != mics.N())
      throw InvalidArgument("simulate: channel lengths differ");
}

/// Controller output for one component, primary channel known in advance.
inline Vector open_loop_output(const ControlFilter& w, const std::vector<Vector>& inputs) {
  Vector y = Vector::Zero(inputs.front().size());
  for (int k = 0; k <= w.K; ++k) y += filter(w.channel(k), inputs[static_cast<std::size_t>(k)]);
  return y;
}

struct LoopOutput {
  Vector y, e, p_hat;
};

/// Sample-recursive loop: p_hat(n) = e(n) - (g_hat * y)(n) feeds the primary
/// channel of the controller. Needs g[0] = g_hat[0] = 0.
inline LoopOutput closed_loop_component(const ControlFilter& w, const std::vector<Vector>& inputs,
                                        const Vector& g, const Vector& g_hat) {
  const Vector& p = inputs.back();
  const Index n = p.size();
  Vector y = Vector::Zero(n);
  for (int k = 0; k < w.K; ++k) y += filter(w.channel(k), inputs[static_cast<std::size_t>(k)]);
  const Vector wp = w.channel(w.K);

  LoopOutput out{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  for (Index i = 0; i < n; ++i) {
    double anti = 0.0, est = 0.0;
    for (Index j = 1; j < g.size() && j <= i; ++j) anti += g[j] * out.y[i - j];
    for (Index j = 1; j < g_hat.size() && j <= i; ++j) est += g_hat[j] * out.y[i - j];
    out.e[i] = p[i] + anti;
    out.p_hat[i] = out.e[i] - est;
    double yi = y[i];
    for (Index j = 0; j < wp.size() && j <= i; ++j) yi += wp[j] * out.p_hat[i - j];
    out.y[i] = yi;
  }
  return out;
}

}  // namespace detail

/// Perfect secondary-path estimate: p_hat = p.
inline RunResult apply_control(const ControlFilter& w, const MicSignals& mics, const Vector& g) {
  detail::check_run_dims(w, mics);
  RunResult r;
  r.y_s = detail::open_loop_output(w, mics.speech_channels());
  r.y_v = detail::open_loop_output(w, mics.noise_channels());
  r.e_s = mics.p_s + filter(g, r.y_s);
  r.e_v = mics.p_v + filter(g, r.y_v);
  r.y = r.y_s + r.y_v;
  r.e = r.e_s + r.e_v;
  r.p_hat = mics.p();
  return r;
}

/// Recursive simulation with an estimated secondary path g_hat used to
/// recover the primary signal from the error microphone.
inline RunResult closed_loop_sim(const ControlFilter& w, const MicSignals& mics, const Vector& g,
                                 const Vector& g_hat) {
  detail::check_run_dims(w, mics);
  if (g.size() < 1 || g[0] != 0.0)
    throw InvalidArgument("closed_loop_sim: secondary path must start with a zero tap (delay-free loop)");
  if (g_hat.size() >= 1 && g_hat[0] != 0.0)
    throw InvalidArgument("closed_loop_sim: estimated secondary path must start with a zero tap (delay-free loop)");
  const auto s = detail::closed_loop_component(w, mics.speech_channels(), g, g_hat);
  const auto v = detail::closed_loop_component(w, mics.noise_channels(), g, g_hat);
  RunResult r;
  r.y_s = s.y;
  r.y_v = v.y;
  r.e_s = s.e;
  r.e_v = v.e;
  r.y = s.y + v.y;
  r.e = s.e + v.e;
  r.p_hat = s.p_hat + v.p_hat;
  return r;
}

/// Unweighted target: the desired component at the error microphone or at the
/// spatial reference microphone, delayed by `delta` samples.
inline Vector realize_target(const MicSignals& mics, TargetKind kind, Index delta, int spatial_ref) {
  const Vector& anchor = kind == TargetKind::error_mic ? mics.p_s : mics.speech(spatial_ref);
  return delayed(anchor, delta, mics.N());
}

}  // namespace ssanc
