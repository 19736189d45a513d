#pragma once

#include <cstddef>
#include <span>

#include "adp/linalg.hpp"

namespace adp {

/// Discretized (Ax)(t) = ∫₀ᵗ x(s) ds on n cells of width h = 1/n:
/// h/2 on the diagonal, h below it, zero above.
struct IntegrationOperator {
  std::size_t n = 0;
  DenseMatrix matrix;
};

inline IntegrationOperator make_integration(std::size_t n) {
  if (n == 0) throw ValidationError("make_integration: n must be at least 1");
  const double h = 1.0 / static_cast<double>(n);
  IntegrationOperator op{n, DenseMatrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) op.matrix(i, j) = h;
    op.matrix(i, i) = h / 2.0;
  }
  return op;
}

inline DenseMatrix adjoint(const DenseMatrix& m) { return transpose(m); }

/// b − c · v uᵀ, with v in the output space (rows) and u in the input space (cols).
inline DenseMatrix rank_one_update(const DenseMatrix& b, double c, std::span<const double> v,
                                   std::span<const double> u) {
  if (v.size() != b.rows() || u.size() != b.cols())
    throw ValidationError("rank_one_update: dimension mismatch");
  DenseMatrix out(b);
  add_outer(out, -c, v, u);
  return out;
}

}  // namespace adp
