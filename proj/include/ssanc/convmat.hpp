#pragma once

// Dense convolution-matrix algebra: lower-banded Toeplitz builders,
// block-diagonal assembly, unit pulses and stacked multichannel vectors.

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "ssanc/error.hpp"

namespace ssanc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Convolution matrix of a tap vector: `data * x == coeffs * x` (full linear
/// convolution) for any x with `cols()` samples.
struct ConvMatrix {
  Vector coeffs;
  Matrix data;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
};

inline ConvMatrix build_conv_matrix(const Vector& h, Index input_len) {
  if (h.size() < 1) throw InvalidArgument("build_conv_matrix: empty tap vector");
  if (input_len < 1) throw InvalidArgument("build_conv_matrix: input_len must be >= 1");
  ConvMatrix m{h, Matrix::Zero(h.size() + input_len - 1, input_len)};
  for (Index j = 0; j < input_len; ++j) m.data.col(j).segment(j, h.size()) = h;
  return m;
}

/// `copies` copies of `block` along the diagonal.
inline Matrix block_diag(const Matrix& block, Index copies) {
  if (copies < 1) throw InvalidArgument("block_diag: need at least one copy");
  Matrix out = Matrix::Zero(copies * block.rows(), copies * block.cols());
  for (Index k = 0; k < copies; ++k)
    out.block(k * block.rows(), k * block.cols(), block.rows(), block.cols()) = block;
  return out;
}

/// Secondary-path matrix for K reference microphones plus the primary channel
/// (K+1 diagonal copies of G).
inline Matrix block_diag_secondary(const ConvMatrix& G, Index K) {
  if (K < 1) throw InvalidArgument("block_diag_secondary: K must be >= 1");
  return block_diag(G.data, K + 1);
}

inline Vector unit_pulse(Index delta, Index len) {
  if (len < 1) throw InvalidArgument("unit_pulse: len must be >= 1");
  if (delta < 0 || delta >= len)
    throw InvalidArgument("unit_pulse: delay " + std::to_string(delta) +
                          " outside [0, " + std::to_string(len) + ")");
  Vector v = Vector::Zero(len);
  v[delta] = 1.0;
  return v;
}

/// K+1 equal-length blocks stored contiguously (channel-major).
struct StackedVector {
  Vector data;
  Index block_len = 0;

  Index num_blocks() const { return block_len == 0 ? 0 : data.size() / block_len; }
  auto block(Index k) { return data.segment(k * block_len, block_len); }
  auto block(Index k) const { return data.segment(k * block_len, block_len); }
};

/// Selector of the current primary sample: K zero blocks, then a unit pulse.
inline StackedVector build_q(Index K, Index L) {
  if (K < 1 || L < 1) throw InvalidArgument("build_q: K and L must be >= 1");
  StackedVector q{Vector::Zero((K + 1) * L), L};
  q.data[K * L] = 1.0;
  return q;
}

/// Stacked tapped-delay-line vector at time n: block k holds
/// [x_k(n), x_k(n-1), ..., x_k(n-L+1)], samples before 0 are zero.
inline StackedVector stacked_input(std::span<const Vector> channels, Index n, Index L) {
  StackedVector x{Vector::Zero(static_cast<Index>(channels.size()) * L), L};
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const Vector& c = channels[k];
    for (Index j = 0; j < L && n - j >= 0; ++j)
      if (n - j < c.size()) x.data[static_cast<Index>(k) * L + j] = c[n - j];
  }
  return x;
}

/// Full linear convolution, length len(a) + len(b) - 1.
inline Vector convolve(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0) return Vector();
  Vector out = Vector::Zero(a.size() + b.size() - 1);
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    out.segment(i, b.size()) += a[i] * b;
  }
  return out;
}

/// Causal filtering of x by ir, truncated to len(x) samples.
inline Vector filter(const Vector& ir, const Vector& x) {
  const Index n = x.size();
  Vector out = Vector::Zero(n);
  for (Index i = 0; i < ir.size() && i < n; ++i) {
    if (ir[i] == 0.0) continue;
    out.tail(n - i) += ir[i] * x.head(n - i);
  }
  return out;
}

/// Shift by `delta` samples (prepend zeros), keeping `len` samples.
inline Vector delayed(const Vector& x, Index delta, Index len) {
  Vector out = Vector::Zero(len);
  const Index count = std::min<Index>(x.size(), len - delta);
  if (count > 0) out.segment(delta, count) = x.head(count);
  return out;
}

/// Zero-pad (never truncate) to `len` samples.
inline Vector zero_padded(const Vector& x, Index len) {
  if (x.size() > len)
    throw InvalidArgument("zero_padded: vector of length " + std::to_string(x.size()) +
                          " does not fit in " + std::to_string(len));
  Vector out = Vector::Zero(len);
  out.head(x.size()) = x;
  return out;
}

}  // namespace ssanc
