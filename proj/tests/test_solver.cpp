#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "ssanc/reir.hpp"
#include "ssanc/scene.hpp"
#include "ssanc/signals.hpp"
#include "ssanc/simulate.hpp"
#include "ssanc/solver.hpp"
#include "ssanc/verify.hpp"
#include "test_util.hpp"

using namespace ssanc;
using testutil::randn;
using testutil::rel_err;

TEST(Autocorrelation, SingleFrameIsOuterProduct) {
  std::mt19937_64 rng(1);
  const Vector x = randn(rng, 6);
  std::vector<Vector> frames{x};
  EXPECT_LE((estimate_autocorrelation(frames) - x * x.transpose()).norm(), 1e-14);
  std::vector<Vector> bad{x, randn(rng, 5)};
  EXPECT_THROW(estimate_autocorrelation(bad), InvalidArgument);
}

TEST(Autocorrelation, FastRouteMatchesFrameAverage) {
  std::mt19937_64 rng(2);
  const Index L = 5, N = 200;
  std::vector<Vector> ch{randn(rng, N), randn(rng, N), randn(rng, N)};
  std::vector<Vector> frames;
  for (Index n = 0; n < N; ++n) frames.push_back(stacked_input(ch, n, L).data);
  const Matrix slow = estimate_autocorrelation(frames);
  EXPECT_LE((autocorrelation(ch, L) - slow).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autocorrelation, WhiteNoiseApproachesIdentity) {
  std::vector<Vector> ch{signals::white_noise(50000, 1), signals::white_noise(50000, 2)};
  const Matrix phi = autocorrelation(ch, 4);
  for (Index i = 0; i < 8; ++i) EXPECT_NEAR(phi(i, i), 1.0, 0.1);
  EXPECT_LT((phi - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(LargestEigenvalue, DiagonalAndRandom) {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 3, 1, 2;
  EXPECT_NEAR(largest_eigenvalue(d), 3.0, 1e-8);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    Matrix B(20, 20);
    for (Index j = 0; j < 20; ++j) B.col(j) = randn(rng, 20);
    const Matrix A = B * B.transpose();
    const double ref = Eigen::SelfAdjointEigenSolver<Matrix>(A).eigenvalues().maxCoeff();
    EXPECT_NEAR(largest_eigenvalue(A) / ref, 1.0, 1e-6);
  }
}

TEST(LargestEigenvalue, NonConvergenceCarriesEstimate) {
  // A nearly degenerate top pair converges slowly.
  Matrix B = Matrix::Zero(2, 2);
  B << 2, 0, 0, 1.999999;
  try {
    largest_eigenvalue(B, 1e-300, 3);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_estimate(), 1.9);
    EXPECT_LE(e.best_estimate(), 2.0);
  }
  EXPECT_THROW(largest_eigenvalue(Matrix::Zero(2, 3)), InvalidArgument);
}

TEST(Constraint, DimensionsAndZeroDelayErrorTarget) {
  std::mt19937_64 rng(4);
  ReIRSet r;
  r.Lh = 3;
  r.spatial_ref = 0;
  r.h = {unit_pulse(0, 3), randn(rng, 3), randn(rng, 3)};
  const Constraint c = build_constraint(r, Vector::Ones(1), TargetKind::error_mic, 0, 4, 3);
  const Index L = 6;
  EXPECT_EQ(c.H.rows(), 3 * L);
  EXPECT_EQ(c.H.cols(), r.Lh + L - 1);
  EXPECT_EQ(c.f, zero_padded(r.h[2], r.Lh + L - 1));
  // H^T q = f: w = 0 satisfies the zero-delay error-mic constraint exactly.
  EXPECT_LE((c.H.transpose() * build_q(2, L).data - c.f).norm(), 0.0);
}

TEST(Constraint, DenseProductMatchesChannelConvolutions) {
  std::mt19937_64 rng(5);
  ReIRSet r;
  r.Lh = 4;
  r.h = {randn(rng, 4), randn(rng, 4), randn(rng, 4)};
  const Index L = 7;
  const Matrix H = build_constraint_matrix(r, L);
  const Vector u = randn(rng, 3 * L);
  Vector ref = Vector::Zero(r.Lh + L - 1);
  for (Index k = 0; k < 3; ++k) ref += convolve(r.h[static_cast<std::size_t>(k)], u.segment(k * L, L));
  EXPECT_LE((H.transpose() * u - ref).norm(), 1e-12);
}

TEST(Constraint, ReferenceTargetAndBounds) {
  ReIRSet r;
  r.Lh = 5;
  r.h = {unit_pulse(0, 5), unit_pulse(1, 5), unit_pulse(4, 5)};
  const Index L = 6;
  EXPECT_EQ(constraint_vector(r, Vector::Ones(1), TargetKind::reference_mic, 3, L), unit_pulse(3, 10));
  EXPECT_THROW(constraint_vector(r, Vector::Ones(1), TargetKind::reference_mic, 5, L), InvalidArgument);
  EXPECT_EQ(constraint_vector(r, Vector::Ones(1), TargetKind::error_mic, 5, L), unit_pulse(9, 10));
  EXPECT_THROW(constraint_vector(r, Vector::Ones(1), TargetKind::error_mic, 6, L), InvalidArgument);
  EXPECT_THROW(constraint_vector(r, Vector::Ones(7), TargetKind::error_mic, 0, L), InvalidArgument);
  Vector psi(2);
  psi << 1, -0.5;
  Vector expected = Vector::Zero(10);
  expected[2] = 1;
  expected[3] = -0.5;
  EXPECT_EQ(constraint_vector(r, psi, TargetKind::reference_mic, 2, L), expected);
}

TEST(Design, MatchesKktOracleOnSmallInstance) {
  std::mt19937_64 rng(6);
  const auto inst = verify::random_well_posed_instance(rng, 2, 4, 3, 3, false);
  EXPECT_LE(verify::compare_with_oracle(inst).rel_error, 1e-8);
}

TEST(Design, MatchesKktOracleOnRandomTargets) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const int K = 1 + t % 2;
    const auto inst = verify::random_well_posed_instance(rng, K, 5, 4, K == 1 ? 3 : 5, true);
    EXPECT_LE(verify::compare_with_oracle(inst).rel_error, 1e-8) << "instance " << t;
  }
}

TEST(Design, PenaltyFormIdentity) {
  // For rho > 0 the closed form minimizes w^T Phi_rr w + 2 phi^T w + |A^T w - c|^2 / rho.
  std::mt19937_64 rng(8);
  const auto inst = verify::random_instance(rng, 2, 5, 4, 4, true);
  DesignParams p;
  p.rho = 0.3;
  const DesignResult r = design_control_filter(inst.phi_xx, inst.g, inst.constraint, p, 2, 5);
  const Index L = 8;
  const Matrix Gt = block_diag_secondary(build_conv_matrix(inst.g, 5), 2);
  const Vector q = build_q(2, L).data;
  const Matrix A = Gt.transpose() * inst.constraint.H;
  const Vector c = inst.constraint.f - inst.constraint.H.transpose() * q;
  Matrix P = Gt.transpose() * inst.phi_xx * Gt;
  P.diagonal().array() += r.diagnostics.beta;
  const Vector phi = Gt.transpose() * inst.phi_xx * q;
  const Vector ref = (P + A * A.transpose() / 0.3).ldlt().solve(-phi + A * c / 0.3);
  EXPECT_LE(rel_err(r.filter.w, ref), 1e-9);
}

TEST(Design, UnconstrainedOracleIsWiener) {
  std::mt19937_64 rng(9);
  auto inst = verify::random_instance(rng, 1, 4, 3, 3, false);
  inst.constraint.H = Matrix(0, 0);
  inst.constraint.f = Vector(0);
  const KktResult k = kkt_oracle(inst.phi_xx, inst.g, inst.constraint, 0.05, 1, 4);
  const Matrix Gt = block_diag_secondary(build_conv_matrix(inst.g, 4), 1);
  Matrix P = Gt.transpose() * inst.phi_xx * Gt;
  P.diagonal().array() += 0.05;
  const Vector ref = -P.llt().solve(Gt.transpose() * inst.phi_xx * build_q(1, 6).data);
  EXPECT_LE(rel_err(k.filter.w, ref), 1e-10);
  DesignParams p;
  p.beta = 0.05;
  const ControlDesigner d(inst.phi_xx, inst.g, Matrix(0, 0), 1, 4, p);
  EXPECT_LE(rel_err(d.design(Vector(0)).filter.w, ref), 1e-10);
}

TEST(Design, OracleBeatsFeasiblePerturbations) {
  std::mt19937_64 rng(10);
  const auto inst = verify::random_well_posed_instance(rng, 2, 4, 3, 3, true);
  const double beta = 0.1;
  const KktResult k = kkt_oracle(inst.phi_xx, inst.g, inst.constraint, beta, 2, 4);
  const Matrix Gt = block_diag_secondary(build_conv_matrix(inst.g, 4), 2);
  const Vector q = build_q(2, 6).data;
  const Matrix A = Gt.transpose() * inst.constraint.H;
  const auto cost = [&](const Vector& w) {
    const Vector u = q + Gt * w;
    return u.dot(inst.phi_xx * u) + beta * w.squaredNorm();
  };
  // Null-space directions of A^T keep the constraint satisfied.
  const Eigen::FullPivLU<Matrix> lu(A.transpose());
  const Matrix N = lu.kernel();
  ASSERT_GT(N.cols(), 0);
  const double best = cost(k.filter.w);
  for (int t = 0; t < 100; ++t) EXPECT_GE(cost(k.filter.w + N * randn(rng, N.cols()) * 0.1), best - 1e-10);
}

TEST(Design, InfeasibleConstraintReported) {
  std::mt19937_64 rng(11);
  auto inst = verify::random_instance(rng, 1, 3, 3, 3, false);
  inst.constraint.f = randn(rng, inst.constraint.f.size()) * 10.0;  // generically outside the range
  EXPECT_THROW(kkt_oracle(inst.phi_xx, inst.g, inst.constraint, 0.1, 1, 3), InfeasibleError);
}

TEST(Design, RhoZeroResidualIsTiny) {
  std::mt19937_64 rng(12);
  const auto inst = verify::random_well_posed_instance(rng, 2, 6, 4, 5, true);
  DesignParams p;
  p.rho = 0.0;
  const DesignResult r = design_control_filter(inst.phi_xx, inst.g, inst.constraint, p, 2, 6);
  EXPECT_LE(r.diagnostics.constraint_residual, 1e-8);
  DesignParams rule;
  const DesignResult r2 = design_control_filter(inst.phi_xx, inst.g, inst.constraint, rule, 2, 6);
  EXPECT_TRUE(std::isfinite(r2.diagnostics.constraint_residual));
  EXPECT_GT(r2.diagnostics.rho, 0.0);
}

TEST(Design, EffortNonIncreasingInBeta) {
  const Scene s = synth_scene(default_synth_params());
  const Index n = 16000, Lw = 16;
  const MicSignals m = render_mics(s, signals::speech_like(n, 16000, 1), signals::babble(n, 16000, 2), -5);
  const ReIRSet r = estimate_reirs(render_desired(s, signals::white_noise(n, 3)), s.spatial_ref, 16);
  const Vector g = s.g;
  const Index L = g.size() + Lw - 1;
  const Matrix phi = autocorrelation(m.channels(), L);
  const Constraint c = build_constraint(r, Vector::Ones(1), TargetKind::error_mic, 4, Lw, g.size());
  double prev = std::numeric_limits<double>::infinity();
  for (double beta : {0.01, 0.1, 1.0}) {
    DesignParams p;
    p.beta = beta;
    const DesignResult d = design_control_filter(phi, g, c, p, s.K, Lw);
    const double effort = apply_control(d.filter, m, g).y.squaredNorm();
    EXPECT_LE(effort, prev * (1 + 1e-9)) << "beta " << beta;
    prev = effort;
  }
}

TEST(Design, ScaleInvariantUnderLambdaRules) {
  std::mt19937_64 rng(13);
  const auto inst = verify::random_instance(rng, 2, 5, 4, 4, true);
  const DesignResult a = design_control_filter(inst.phi_xx, inst.g, inst.constraint, {}, 2, 5);
  const DesignResult b = design_control_filter(100.0 * inst.phi_xx, inst.g, inst.constraint, {}, 2, 5);
  EXPECT_LE(rel_err(b.filter.w, a.filter.w), 1e-9);
  EXPECT_NEAR(b.diagnostics.beta / a.diagnostics.beta, 100.0, 1e-6);
}

TEST(Design, DimensionErrors) {
  std::mt19937_64 rng(14);
  const auto inst = verify::random_instance(rng, 1, 3, 3, 3, false);
  EXPECT_THROW(design_control_filter(inst.phi_xx, inst.g, inst.constraint, {}, 2, 3), InvalidArgument);
  DesignParams p;
  p.beta = 0.0;
  EXPECT_THROW(design_control_filter(inst.phi_xx, inst.g, inst.constraint, p, 1, 3), NumericError);
  Constraint wrong = inst.constraint;
  wrong.f = Vector::Zero(3);
  EXPECT_THROW(design_control_filter(inst.phi_xx, inst.g, wrong, {}, 1, 3), InvalidArgument);
}
