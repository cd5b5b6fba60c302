#pragma once

// Small random design problems for cross-checking the closed-form filter
// against the saddle-point oracle.

#include <cstdint>
#include <random>

#include <Eigen/SVD>

#include "ssanc/convmat.hpp"
#include "ssanc/reir.hpp"
#include "ssanc/solver.hpp"

namespace ssanc::verify {

struct OracleInstance {
  Matrix phi_xx;
  Vector g;
  Constraint constraint;
  int K = 1;
  Index Lw = 0;
};

/// Smallest retained singular value of Gt^T H relative to the largest, after
/// discarding the structural null space (below the range threshold).
inline double constraint_conditioning(const OracleInstance& inst) {
  const Matrix Gt = block_diag_secondary(build_conv_matrix(inst.g, inst.Lw), inst.K);
  const Matrix A = Gt.transpose() * inst.constraint.H;
  const Eigen::JacobiSVD<Matrix> svd(A);
  const Vector s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0.0;
  double smallest = s[0];
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > ControlDesigner::kRangeThreshold * s[0]) smallest = s[i];
  return smallest / s[0];
}

/// Free parameters left by the constraint: (K+1)Lw filter taps minus the
/// Lh+Lw-1 dimensional range of Gt^T H.
inline Index degrees_of_freedom(int K, Index Lw, Index Lh) {
  return static_cast<Index>(K + 1) * Lw - std::min<Index>(static_cast<Index>(K + 1) * Lw, Lh + Lw - 1);
}

/// Random PSD autocorrelation from colored random signals, random secondary
/// path and ReIRs (identity at the spatial reference). The target is either
/// the zero-delay error-microphone target or a random feasible f.
inline OracleInstance random_instance(std::mt19937_64& rng, int K, Index Lw, Index Lg, Index Lh,
                                      bool random_target) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto randn = [&](Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  OracleInstance inst;
  inst.K = K;
  inst.Lw = Lw;
  inst.g = randn(Lg);
  const Index L = Lg + Lw - 1;

  const Index N = 8 * (K + 1) * L + 64;
  std::vector<Vector> channels;
  const Vector source = randn(N);
  for (int k = 0; k <= K; ++k) channels.push_back(filter(randn(3), source) + 0.5 * randn(N));
  inst.phi_xx = autocorrelation(channels, L);

  ReIRSet reirs;
  reirs.spatial_ref = 0;
  reirs.Lh = Lh;
  for (int k = 0; k <= K; ++k) reirs.h.push_back(k == 0 ? unit_pulse(0, Lh) : Vector(randn(Lh)));

  inst.constraint = build_constraint(reirs, Vector::Ones(1), TargetKind::error_mic, 0, Lw, Lg);
  if (random_target) {
    // f = H^T (q + Gt w_feasible) for a random w_feasible.
    const Matrix Gt = block_diag_secondary(build_conv_matrix(inst.g, Lw), K);
    const Vector u = build_q(K, L).data + Gt * randn((K + 1) * Lw);
    inst.constraint.f = inst.constraint.H.transpose() * u;
  }
  return inst;
}

/// Draws instances until the constraint leaves at least one free parameter
/// and is numerically full rank on its range (conditioning >= min_conditioning).
inline OracleInstance random_well_posed_instance(std::mt19937_64& rng, int K, Index Lw, Index Lg, Index Lh,
                                                 bool random_target, double min_conditioning = 1e-5) {
  if (degrees_of_freedom(K, Lw, Lh) < 1)
    throw InvalidArgument("random_well_posed_instance: constraint fixes every filter tap (need K*Lw >= Lh)");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    OracleInstance inst = random_instance(rng, K, Lw, Lg, Lh, random_target);
    if (constraint_conditioning(inst) >= min_conditioning) return inst;
  }
  throw NumericError("random_well_posed_instance: no well-conditioned draw in 1000 attempts");
}

struct Comparison {
  double rel_error = 0.0;  // |w_closed - w_kkt| / |w_kkt|
  double beta = 0.0;
  Index dropped_rows = 0;
};

/// beta from the lambda_max / 500 rule, rho = 0.
inline Comparison compare_with_oracle(const OracleInstance& inst) {
  DesignParams params;
  params.rho = 0.0;
  const ControlDesigner designer(inst.phi_xx, inst.g, inst.constraint.H, inst.K, inst.Lw, params);
  const DesignResult closed = designer.design(inst.constraint.f);
  const KktResult oracle = kkt_oracle(inst.phi_xx, inst.g, inst.constraint, designer.beta(), inst.K, inst.Lw);
  Comparison c;
  c.beta = designer.beta();
  c.dropped_rows = oracle.dropped_rows;
  const double denom = oracle.filter.w.norm();
  c.rel_error = (closed.filter.w - oracle.filter.w).norm() / (denom > 0.0 ? denom : 1.0);
  return c;
}

}  // namespace ssanc::verify
