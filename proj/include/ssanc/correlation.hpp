#pragma once

#include "ssanc/convmat.hpp"

namespace ssanc {

/// Lagged cross products of two prewindowed signals:
///   S(i, j) = sum_{n=0}^{N-1} a(n - i) * b(n - j),  0 <= i < rows, 0 <= j < cols,
/// with samples before 0 taken as zero. Equals the sum of outer products of
/// tapped-delay-line vectors over all N time steps, computed in O(N (rows + cols))
/// via the diagonal recursion S(i+1, j+1) = S(i, j) - a(N-1-i) b(N-1-j).
inline Matrix lagged_products(const Vector& a, const Vector& b, Index rows, Index cols) {
  const Index n = std::min(a.size(), b.size());
  Matrix S = Matrix::Zero(rows, cols);
  for (Index j = 0; j < cols && j < n; ++j) S(0, j) = a.segment(j, n - j).dot(b.head(n - j));
  for (Index i = 1; i < rows && i < n; ++i) S(i, 0) = a.head(n - i).dot(b.segment(i, n - i));
  for (Index i = 1; i < rows; ++i) {
    for (Index j = 1; j < cols; ++j) {
      const Index ai = n - i, bj = n - j;
      S(i, j) = S(i - 1, j - 1) - (ai >= 0 && ai < n && bj >= 0 && bj < n ? a[ai] * b[bj] : 0.0);
    }
  }
  return S;
}

}  // namespace ssanc
