#pragma once

// Constrained control-filter design.
//
// With u = q + Gt w the effective filter applied to the stacked input x(n)
// (e(n) = u^T x(n)), the design problem is
//
//   min_w  u^T Phi_xx u + beta w^T w   s.t.  H^T u = f,
//
// where Gt = blkdiag(G, ..., G) is the secondary-path matrix, H stacks the
// transposed ReIR convolution matrices and f encodes the target signal.
// Writing A = Gt^T H, Phi_rr = Gt^T Phi_xx Gt + beta I, phi = Gt^T Phi_xx q and
// c = f - H^T q, the regularized closed form is
//
//   w = -Phi_rr^{-1} phi
//       + Phi_rr^{-1} A (A^T Phi_rr^{-1} A + rho I)^{-1} (c + A^T Phi_rr^{-1} phi),
//
// which is also the minimizer of the quadratic-penalty problem
// w^T Phi_rr w + 2 phi^T w + |A^T w - c|^2 / rho. For rho = 0 the inner matrix
// is rank deficient by at least Lg - 1 (every column of A^T lies in the range
// of a convolution with g), so it is inverted on its range.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssanc/convmat.hpp"
#include "ssanc/correlation.hpp"
#include "ssanc/error.hpp"
#include "ssanc/reir.hpp"

namespace ssanc {

enum class TargetKind { error_mic, reference_mic };

inline std::string to_string(TargetKind kind) {
  return kind == TargetKind::error_mic ? "error_mic" : "reference_mic";
}

inline TargetKind parse_target_kind(const std::string& s) {
  if (s == "error_mic" || s == "error") return TargetKind::error_mic;
  if (s == "reference_mic" || s == "reference") return TargetKind::reference_mic;
  throw InvalidArgument("unknown target kind '" + s + "' (expected error_mic or reference_mic)");
}

struct Constraint {
  Matrix H;  // (K+1)L x (Lh+L-1)
  Vector f;  // Lh+L-1
  TargetKind kind = TargetKind::error_mic;
  Index delta = 0;
  Vector psi = Vector::Ones(1);
};

/// H = [H_1 ... H_{K+1}]^T: rows k*L .. (k+1)*L-1 hold the transposed
/// (Lh+L-1) x L convolution matrix of h_k, so that H^T u = sum_k h_k * u_k.
inline Matrix build_constraint_matrix(const ReIRSet& reirs, Index L) {
  if (L < 1) throw InvalidArgument("build_constraint_matrix: L must be >= 1");
  const int channels = static_cast<int>(reirs.h.size());
  const Index m = reirs.Lh + L - 1;
  Matrix H(channels * L, m);
  for (int k = 0; k < channels; ++k) {
    if (reirs.h[k].size() != reirs.Lh) throw InvalidArgument("build_constraint_matrix: ReIR length mismatch");
    H.middleRows(k * L, L) = build_conv_matrix(reirs.h[k], L).data.transpose();
  }
  return H;
}

/// Constraint vector for the chosen target (spectrally weighted by psi):
///  - reference_mic: f = psi * delta_Delta, 0 <= Delta < Lh;
///  - error_mic:     f = psi * h_{K+1} delayed by Delta, the delayed ReIR
///                   (Lh + Delta taps) must fit in Lh + L - 1 samples.
/// Samples of psi * (.) beyond Lh + L - 1 are dropped.
inline Vector constraint_vector(const ReIRSet& reirs, const Vector& psi, TargetKind kind, Index delta,
                                Index L) {
  const Index m = reirs.Lh + L - 1;
  if (psi.size() < 1 || psi.size() > L)
    throw InvalidArgument("constraint: spectral weighting needs between 1 and L = " +
                          std::to_string(L) + " taps");
  if (delta < 0) throw InvalidArgument("constraint: delay must be non-negative");
  Vector anchor;
  if (kind == TargetKind::reference_mic) {
    if (delta >= reirs.Lh)
      throw InvalidArgument("constraint: reference-target delay " + std::to_string(delta) +
                            " must be below Lh = " + std::to_string(reirs.Lh));
    anchor = unit_pulse(delta, reirs.Lh);
  } else {
    if (delta + reirs.Lh > m)
      throw InvalidArgument("constraint: error-target delay " + std::to_string(delta) +
                            " pushes the delayed ReIR beyond " + std::to_string(m) + " samples");
    anchor = delayed(reirs.h.back(), delta, reirs.Lh + delta);
  }
  const Vector full = convolve(psi, anchor);
  Vector f = Vector::Zero(m);
  const Index n = std::min(m, full.size());
  f.head(n) = full.head(n);
  return f;
}

inline Constraint build_constraint(const ReIRSet& reirs, const Vector& psi, TargetKind kind, Index delta,
                                   Index Lw, Index Lg) {
  if (Lw < 1 || Lg < 1) throw InvalidArgument("build_constraint: Lw and Lg must be >= 1");
  const Index L = Lg + Lw - 1;
  Constraint c;
  c.f = constraint_vector(reirs, psi, kind, delta, L);
  c.H = build_constraint_matrix(reirs, L);
  c.kind = kind;
  c.delta = delta;
  c.psi = psi;
  return c;
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration. Stops once the Rayleigh quotient changes by at most `tol`
/// relative; throws ConvergenceError (carrying the last estimate) otherwise.
inline double largest_eigenvalue(const Matrix& A, double tol = 1e-12, int max_iter = 100000) {
  if (A.rows() != A.cols()) throw InvalidArgument("largest_eigenvalue: matrix must be square");
  if (A.rows() == 0) return 0.0;
  if (!A.allFinite()) throw InvalidArgument("largest_eigenvalue: matrix not finite");
  const Matrix S = 0.5 * (A + A.transpose());

  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> uni(0.5, 1.5);
  Vector v(S.rows());
  for (Index i = 0; i < v.size(); ++i) v[i] = uni(rng);
  v.normalize();

  double lambda = v.dot(S * v);
  for (int it = 0; it < max_iter; ++it) {
    Vector sv = S * v;
    const double norm = sv.norm();
    if (norm == 0.0) return 0.0;
    v = sv / norm;
    const double next = v.dot(S * v);
    if (std::abs(next - lambda) <= tol * std::abs(next)) return std::max(next, 0.0);
    lambda = next;
  }
  throw ConvergenceError("largest_eigenvalue: no convergence in " + std::to_string(max_iter) +
                             " iterations (best estimate " + std::to_string(lambda) + ")",
                         std::max(lambda, 0.0));
}

/// Sample average of x x^T over the given stacked frames, symmetrized.
inline Matrix estimate_autocorrelation(std::span<const Vector> frames) {
  if (frames.empty()) throw InvalidArgument("estimate_autocorrelation: no frames");
  const Index d = frames.front().size();
  Matrix phi = Matrix::Zero(d, d);
  for (const auto& x : frames) {
    if (x.size() != d) throw InvalidArgument("estimate_autocorrelation: inconsistent frame lengths");
    phi.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  phi = phi.selfadjointView<Eigen::Lower>();
  phi /= static_cast<double>(frames.size());
  return 0.5 * (phi + phi.transpose());
}

/// Same estimate as `estimate_autocorrelation` over every frame n = 0..N-1 of
/// the stacked input built from `channels` with L taps per channel, computed
/// blockwise from lagged products instead of N outer products.
inline Matrix autocorrelation(std::span<const Vector> channels, Index L) {
  if (channels.empty()) throw InvalidArgument("autocorrelation: no channels");
  const Index n = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != n) throw InvalidArgument("autocorrelation: channel lengths differ");
  if (n == 0) throw InvalidArgument("autocorrelation: empty signals");
  const auto C = static_cast<Index>(channels.size());
  Matrix phi(C * L, C * L);
  for (Index i = 0; i < C; ++i) {
    for (Index j = i; j < C; ++j) {
      const Matrix S = lagged_products(channels[i], channels[j], L, L) / static_cast<double>(n);
      phi.block(i * L, j * L, L, L) = S;
      if (j != i) phi.block(j * L, i * L, L, L) = S.transpose();
    }
  }
  return 0.5 * (phi + phi.transpose());
}

/// Gt^T X for X with (K+1)L rows, evaluated blockwise.
inline Matrix secondary_transpose_times(const Matrix& G, int K, const Matrix& X) {
  const Index L = G.rows(), Lw = G.cols();
  Matrix out(static_cast<Index>(K + 1) * Lw, X.cols());
  for (int k = 0; k <= K; ++k) out.middleRows(k * Lw, Lw).noalias() = G.transpose() * X.middleRows(k * L, L);
  return out;
}

/// X Gt for X with (K+1)L columns.
inline Matrix times_secondary(const Matrix& X, const Matrix& G, int K) {
  const Index L = G.rows(), Lw = G.cols();
  Matrix out(X.rows(), static_cast<Index>(K + 1) * Lw);
  for (int k = 0; k <= K; ++k) out.middleCols(k * Lw, Lw).noalias() = X.middleCols(k * L, L) * G;
  return out;
}

struct DesignParams {
  std::optional<double> beta;  // explicit value overrides beta_div
  std::optional<double> rho;   // explicit value overrides rho_div
  double beta_div = 500.0;
  double rho_div = 30000.0;
  double eig_tol = 1e-12;
  int eig_max_iter = 20000;
};

/// Stacked multichannel FIR: K reference channels followed by the primary channel.
struct ControlFilter {
  Vector w;
  int K = 0;
  Index Lw = 0;

  Vector channel(int k) const { return w.segment(static_cast<Index>(k) * Lw, Lw); }
};

struct DesignDiagnostics {
  double beta = 0.0;
  double rho = 0.0;
  double constraint_residual = 0.0;    // |H^T (q + Gt w) - f|
  double predicted_error_power = 0.0;  // (q + Gt w)^T Phi_xx (q + Gt w)
  double w_norm = 0.0;
  Index inner_rank = 0;
  bool eigenvalues_converged = true;
};

struct DesignResult {
  ControlFilter filter;
  DesignDiagnostics diagnostics;
};

namespace detail {

inline void check_design_dims(const Matrix& phi_xx, const Vector& g, const Matrix& H, int K, Index Lw) {
  if (K < 1) throw InvalidArgument("design: K must be >= 1");
  if (Lw < 1 || g.size() < 1) throw InvalidArgument("design: Lw and Lg must be >= 1");
  const Index L = g.size() + Lw - 1;
  const Index d = static_cast<Index>(K + 1) * L;
  if (phi_xx.rows() != d || phi_xx.cols() != d)
    throw InvalidArgument("design: autocorrelation must be " + std::to_string(d) + " x " +
                          std::to_string(d) + " for K=" + std::to_string(K) +
                          ", L=" + std::to_string(L));
  if (H.cols() > 0 && H.rows() != d)
    throw InvalidArgument("design: constraint matrix needs " + std::to_string(d) + " rows");
}

inline double lambda_max_or_best(const Matrix& A, const DesignParams& p, bool& converged) {
  try {
    return largest_eigenvalue(A, p.eig_tol, p.eig_max_iter);
  } catch (const ConvergenceError& e) {
    converged = false;
    return e.best_estimate();
  }
}

}  // namespace detail

/// Caches everything that does not depend on the constraint vector f, so a
/// delay sweep only pays for one small solve per delay.
class ControlDesigner {
 public:
  ControlDesigner(const Matrix& phi_xx, const Vector& g, const Matrix& H, int K, Index Lw,
                  const DesignParams& params = {})
      : K_(K), Lw_(Lw), L_(g.size() + Lw - 1), H_(H) {
    detail::check_design_dims(phi_xx, g, H, K, Lw);
    G_ = build_conv_matrix(g, Lw).data;
    const Index qi = static_cast<Index>(K) * L_;
    q_power_ = phi_xx(qi, qi);

    const Matrix phi_g = times_secondary(phi_xx, G_, K);  // Phi_xx Gt
    filtered_ = secondary_transpose_times(G_, K, phi_g);  // Gt^T Phi_xx Gt
    filtered_ = 0.5 * (filtered_ + filtered_.transpose()).eval();
    phi_ = phi_g.row(qi).transpose();                    // Gt^T Phi_xx q

    bool converged = true;
    beta_ = params.beta ? *params.beta : detail::lambda_max_or_best(filtered_, params, converged) / params.beta_div;
    if (!(beta_ > 0.0) || !std::isfinite(beta_))
      throw NumericError("design: control-effort weight beta must be positive (got " +
                         std::to_string(beta_) + "); check that the input signals are not silent");

    Matrix rr = filtered_;
    rr.diagonal().array() += beta_;
    rr_llt_.compute(rr);
    if (rr_llt_.info() != Eigen::Success)
      throw NumericError("design: Phi_rr factorization failed; increase beta");
    w0_ = -rr_llt_.solve(phi_);

    if (H_.cols() > 0) {
      Hq_ = H_.row(qi).transpose();
      A_ = secondary_transpose_times(G_, K, H_);
      B_ = rr_llt_.solve(A_);
      Matrix inner = A_.transpose() * B_;
      inner = 0.5 * (inner + inner.transpose()).eval();
      rho_ = params.rho ? *params.rho : detail::lambda_max_or_best(inner, params, converged) / params.rho_div;
      if (rho_ < 0.0 || !std::isfinite(rho_)) throw InvalidArgument("design: rho must be >= 0");
      if (rho_ > 0.0) {
        inner.diagonal().array() += rho_;
        inner_llt_.compute(inner);
        if (inner_llt_.info() != Eigen::Success)
          throw NumericError("design: constraint system factorization failed; increase rho or beta");
        inner_rank_ = inner.rows();
      } else {
        // Range-space solve without forming the squared system: with
        // Phi_rr = R R^T and At = R^{-1} A, Phi_rr^{-1} A inner^+ rhs equals
        // R^{-T} (At^T)^+ rhs (minimum-norm least squares).
        use_pinv_ = true;
        const Matrix At = rr_llt_.matrixL().solve(A_);
        range_cod_.setThreshold(kRangeThreshold);
        range_cod_.compute(At.transpose());
        inner_rank_ = range_cod_.rank();
      }
    }
    eig_converged_ = converged;
  }

  DesignResult design(const Vector& f) const {
    Vector w = w0_;
    double residual = 0.0;
    if (H_.cols() > 0) {
      if (f.size() != H_.cols())
        throw InvalidArgument("design: constraint vector needs " + std::to_string(H_.cols()) + " entries");
      const Vector rhs = f - Hq_ - A_.transpose() * w0_;
      if (use_pinv_) {
        const Vector z = range_cod_.solve(rhs);
        w += rr_llt_.matrixU().solve(z);
      } else {
        w += B_ * inner_llt_.solve(rhs);
      }
      residual = (Hq_ + A_.transpose() * w - f).norm();
    }
    if (!w.allFinite()) throw NumericError("design: non-finite filter; increase beta or rho");

    DesignResult r;
    r.filter = ControlFilter{w, K_, Lw_};
    r.diagnostics.beta = beta_;
    r.diagnostics.rho = rho_;
    r.diagnostics.constraint_residual = residual;
    r.diagnostics.predicted_error_power = q_power_ + 2.0 * phi_.dot(w) + w.dot(filtered_ * w);
    r.diagnostics.w_norm = w.norm();
    r.diagnostics.inner_rank = inner_rank_;
    r.diagnostics.eigenvalues_converged = eig_converged_;
    return r;
  }

  double beta() const { return beta_; }
  double rho() const { return rho_; }
  Index L() const { return L_; }
  const Matrix& filtered_autocorrelation() const { return filtered_; }
  const Matrix& constraint_gain() const { return A_; }  // Gt^T H

  /// Relative pivot threshold separating the structural null space of the
  /// rho = 0 constraint system from its range.
  static constexpr double kRangeThreshold = 1e-10;

 private:
  int K_;
  Index Lw_, L_;
  Matrix H_, G_, filtered_, A_, B_;
  Vector phi_, w0_, Hq_;
  Eigen::LLT<Matrix> rr_llt_, inner_llt_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> range_cod_;
  double q_power_ = 0.0, beta_ = 0.0, rho_ = 0.0;
  Index inner_rank_ = 0;
  bool use_pinv_ = false;
  bool eig_converged_ = true;
};

inline DesignResult design_control_filter(const Matrix& phi_xx, const Vector& g, const Constraint& constraint,
                                          const DesignParams& params, int K, Index Lw) {
  return ControlDesigner(phi_xx, g, constraint.H, K, Lw, params).design(constraint.f);
}

struct KktResult {
  ControlFilter filter;
  Index dropped_rows = 0;  // linearly dependent constraint rows removed
  double residual = 0.0;
};

/// Reference solution by a direct saddle-point solve of
///   min (q + Gt w)^T Phi_xx (q + Gt w) + beta w^T w  s.t.  H^T (q + Gt w) = f.
/// Dependent constraint rows are removed by column-pivoted QR first. An empty
/// H gives the unconstrained (ridge-regularized Wiener) solution. The KKT
/// matrix squares the conditioning of the constraint side, so assembly and
/// solve run in extended precision.
inline KktResult kkt_oracle(const Matrix& phi_xx, const Vector& g, const Constraint& constraint, double beta,
                            int K, Index Lw) {
  using Real = long double;
  using MatrixX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  detail::check_design_dims(phi_xx, g, constraint.H, K, Lw);
  if (!(beta > 0.0)) throw InvalidArgument("kkt_oracle: beta must be positive");
  const MatrixX G = build_conv_matrix(g, Lw).data.cast<Real>();
  const Index L = G.rows();
  const Index n = static_cast<Index>(K + 1) * Lw;
  const Index qi = static_cast<Index>(K) * L;

  // Dense Gt keeps this path independent of the blockwise products above.
  MatrixX Gt = MatrixX::Zero((K + 1) * L, n);
  for (int k = 0; k <= K; ++k) Gt.block(k * L, k * Lw, L, Lw) = G;
  const MatrixX phi_x = phi_xx.cast<Real>();
  MatrixX P = Gt.transpose() * phi_x * Gt;
  P.diagonal().array() += static_cast<Real>(beta);
  const VectorX phi = Gt.transpose() * phi_x.col(qi);

  KktResult out;
  if (constraint.H.cols() == 0) {
    const VectorX w = P.ldlt().solve(-phi);
    out.filter = ControlFilter{w.cast<double>(), K, Lw};
    return out;
  }

  const MatrixX Hx = constraint.H.cast<Real>();
  const MatrixX A = Gt.transpose() * Hx;
  const VectorX c = constraint.f.cast<Real>() - Hx.row(qi).transpose();
  Eigen::ColPivHouseholderQR<MatrixX> qr(A);
  qr.setThreshold(static_cast<Real>(ControlDesigner::kRangeThreshold));
  const Index r = qr.rank();
  out.dropped_rows = A.cols() - r;
  MatrixX Ar(n, r);
  VectorX cr(r);
  for (Index i = 0; i < r; ++i) {
    const Index col = qr.colsPermutation().indices()[i];
    Ar.col(i) = A.col(col);
    cr[i] = c[col];
  }

  MatrixX kkt = MatrixX::Zero(n + r, n + r);
  kkt.topLeftCorner(n, n) = P;
  kkt.topRightCorner(n, r) = Ar;
  kkt.bottomLeftCorner(r, n) = Ar.transpose();
  VectorX rhs(n + r);
  rhs.head(n) = -phi;
  rhs.tail(r) = cr;
  const VectorX w = kkt.fullPivLu().solve(rhs).head(n);

  const Real residual = (A.transpose() * w - c).norm();
  const Real free_norm = P.ldlt().solve(phi).norm();
  const Real scale = c.norm() + A.norm() * (w.norm() + free_norm) + std::numeric_limits<Real>::min();
  out.residual = static_cast<double>(residual);
  if (residual > Real(1e-8) * scale)
    throw InfeasibleError("kkt_oracle: constraints are inconsistent (residual " +
                              std::to_string(out.residual) + " after dropping " +
                              std::to_string(out.dropped_rows) + " dependent rows)",
                          out.residual);
  out.filter = ControlFilter{w.cast<double>(), K, Lw};
  return out;
}

}  // namespace ssanc
