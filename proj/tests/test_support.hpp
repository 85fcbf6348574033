#pragma once

// Random instance generators for the property tests. Every generator takes
// an explicit engine so a failing instance can be replayed from its seed.

#include <random>

#include <transferkit/transferkit.hpp>

namespace tk_test {

using transferkit::Complex;
using transferkit::ComplexMatrix;
using transferkit::Index;

using Rng = std::mt19937_64;

inline ComplexMatrix random_matrix(Rng& rng, Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix m(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) m(i, j) = Complex(g(rng), g(rng));
  }
  return m;
}

inline ComplexMatrix random_hermitian(Rng& rng, Index n) {
  const ComplexMatrix a = random_matrix(rng, n);
  return 0.5 * (a + a.adjoint());
}

/// Hermitian with operator norm exactly `norm`.
inline ComplexMatrix random_hermitian_with_norm(Rng& rng, Index n, double norm) {
  const ComplexMatrix h = random_hermitian(rng, n);
  return h * (norm / transferkit::operator_norm(h));
}

/// Wishart-type PSD matrix of the given rank, unit trace.
inline ComplexMatrix random_psd(Rng& rng, Index n, Index rank) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix a(n, rank);
  for (Index j = 0; j < rank; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = Complex(g(rng), g(rng));
  }
  ComplexMatrix p = a * a.adjoint();
  return p / p.trace().real();
}

/// Positive definite with a controlled condition number (at most ~1 + 4n).
inline ComplexMatrix random_pd(Rng& rng, Index n) {
  return random_psd(rng, n, n) + transferkit::identity(n) / static_cast<double>(n);
}

inline double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace tk_test
