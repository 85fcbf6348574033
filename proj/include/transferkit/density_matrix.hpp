#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "operator_core.hpp"

namespace transferkit {

/// Positive semidefinite, unit-trace operator on n_sites sites.
class DensityMatrix {
 public:
  static constexpr double kTraceTolerance = 1e-12;

  DensityMatrix(ComplexMatrix matrix, int n_sites, int local_dim)
      : matrix_(std::move(matrix)), n_sites_(n_sites), local_dim_(local_dim) {
    detail::require_site_layout(matrix_, local_dim_, n_sites_, "DensityMatrix");
    require_hermitian(matrix_, "DensityMatrix");
    matrix_ = hermitian_part(matrix_);
    const double tr = matrix_.trace().real();
    if (std::abs(tr - 1.0) > kTraceTolerance) {
      throw DomainError("DensityMatrix: trace " + std::to_string(tr) + " differs from 1");
    }
    const RealVector ev = hermitian_eigenvalues(matrix_);
    if (ev(0) < -psd_tolerance(ev(ev.size() - 1))) {
      throw DomainError("DensityMatrix: negative eigenvalue " + std::to_string(ev(0)));
    }
  }

  /// Divides a Hermitian PSD operator by its trace.
  static DensityMatrix normalized(const ComplexMatrix& x, int n_sites, int local_dim) {
    const double tr = x.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) throw DomainError("DensityMatrix: trace must be positive");
    return DensityMatrix(hermitian_part(x) / tr, n_sites, local_dim);
  }

  static DensityMatrix maximally_mixed(int n_sites, int local_dim) {
    const Index dim = detail::site_dim(local_dim, n_sites);
    return DensityMatrix(identity(dim) / static_cast<double>(dim), n_sites, local_dim);
  }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  int n_sites() const noexcept { return n_sites_; }
  int local_dim() const noexcept { return local_dim_; }
  Index dim() const noexcept { return matrix_.rows(); }

  /// Marginal on `kept_sites` (1-based), ascending site order.
  DensityMatrix reduced(const std::vector<int>& kept_sites) const {
    ComplexMatrix r = reduce_to_sites(matrix_, local_dim_, n_sites_, kept_sites);
    const double tr = r.trace().real();
    return DensityMatrix(r / tr, static_cast<int>(kept_sites.size()), local_dim_);
  }

  /// Marginal on the first k sites.
  DensityMatrix first_sites(int k) const {
    if (k < 1 || k > n_sites_) throw ArgumentError("DensityMatrix::first_sites: k out of range");
    std::vector<int> kept(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) kept[static_cast<std::size_t>(i)] = i + 1;
    return reduced(kept);
  }

 private:
  ComplexMatrix matrix_;
  int n_sites_;
  int local_dim_;
};

/// Result of projecting a Hermitian operator onto the density-matrix set.
struct ProjectedState {
  DensityMatrix state;
  /// Trace distance between the trace-normalized input and the projection.
  double projection_distance;
};

/// Hermitizes x, clips negative eigenvalues to zero and renormalizes.
inline ProjectedState project_to_density_matrix(const ComplexMatrix& x, int n_sites, int local_dim) {
  const ComplexMatrix h = hermitian_part(x);
  const double tr = h.trace().real();
  if (!(tr > 0.0)) throw DomainError("project_to_density_matrix: trace must be positive");
  const HermitianSpectrum spec = HermitianSpectrum::of(h / tr);
  RealVector clipped = spec.values.cwiseMax(0.0);
  const double mass = clipped.sum();
  clipped /= mass;
  const ComplexMatrix projected = spec.vectors * clipped.asDiagonal() * spec.vectors.adjoint();
  const double distance = (spec.values - clipped).cwiseAbs().sum();
  return {DensityMatrix(hermitian_part(projected), n_sites, local_dim), distance};
}

}  // namespace transferkit
