#pragma once

// Dense complex-matrix primitives on tensor-product spaces.
//
// Site ordering: for an n-site operator with local dimension d, site 1 is
// the leftmost (slowest-varying) tensor factor, i.e. the basis index of
// |s_1 ... s_n> is sum_i s_i d^(n-i).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "budget.hpp"
#include "errors.hpp"

namespace transferkit {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace tol {
/// Relative hermiticity tolerance: ||X - X^H|| <= 1e-10 (1 + ||X||).
inline constexpr double kHermiticity = 1e-10;
/// Relative positivity tolerance: lambda_min >= -1e-12 (1 + ||X||).
inline constexpr double kPsd = 1e-12;
/// Absolute tolerance on exp(sH) exp(-sH) = 1.
inline constexpr double kExpm = 1e-9;
}  // namespace tol

inline ComplexMatrix identity(Index dim) { return ComplexMatrix::Identity(dim, dim); }

inline bool is_real(const ComplexMatrix& x) { return x.imag().cwiseAbs().maxCoeff() == 0.0; }

/// Eigendecomposition of a Hermitian matrix. Real symmetric input is routed
/// through the real solver, which is several times faster.
struct HermitianSpectrum {
  RealVector values;      // ascending
  ComplexMatrix vectors;  // columns are eigenvectors
  bool real = false;      // vectors have zero imaginary part

  static HermitianSpectrum of(const ComplexMatrix& h) {
    HermitianSpectrum s;
    if (h.size() > 0 && is_real(h)) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h.real());
      if (solver.info() != Eigen::Success) throw NumericalBreakdown("Hermitian eigensolver failed");
      s.values = solver.eigenvalues();
      s.vectors = solver.eigenvectors().cast<Complex>();
      s.real = true;
    } else {
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
      if (solver.info() != Eigen::Success) throw NumericalBreakdown("Hermitian eigensolver failed");
      s.values = solver.eigenvalues();
      s.vectors = solver.eigenvectors();
    }
    return s;
  }

  /// V f(Lambda) V^H for a real scalar function f.
  template <class F>
  ComplexMatrix apply(F&& f) const {
    const RealVector fv = values.unaryExpr(std::forward<F>(f));
    if (real) {
      const RealMatrix v = vectors.real();
      return (v * fv.asDiagonal() * v.transpose()).cast<Complex>();
    }
    return vectors * fv.asDiagonal() * vectors.adjoint();
  }

  ComplexMatrix exp(double scale) const {
    return apply([scale](double x) { return std::exp(scale * x); });
  }

  double norm() const {
    return values.size() == 0 ? 0.0 : std::max(std::abs(values(0)), std::abs(values(values.size() - 1)));
  }
};

/// Eigenvalues only (ascending) of a Hermitian matrix.
inline RealVector hermitian_eigenvalues(const ComplexMatrix& h) {
  if (h.size() > 0 && is_real(h)) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h.real(), Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

/// Largest singular value.
inline double operator_norm(const ComplexMatrix& x) {
  if (x.size() == 0) return 0.0;
  if ((x - x.adjoint()).cwiseAbs().maxCoeff() == 0.0) {
    const RealVector ev = hermitian_eigenvalues(x);
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  }
  Eigen::BDCSVD<ComplexMatrix> svd(x);
  return svd.singularValues()(0);
}

inline double hermiticity_tolerance(double norm) { return tol::kHermiticity * (1.0 + norm); }
inline double psd_tolerance(double norm) { return tol::kPsd * (1.0 + norm); }

/// Operator-norm distance of x from its adjoint, and the location of the
/// worst entry.
struct HermiticityDefect {
  double norm = 0.0;
  Index row = 0;
  Index col = 0;
  double entry = 0.0;
};

inline HermiticityDefect hermiticity_defect(const ComplexMatrix& x) {
  HermiticityDefect defect;
  const ComplexMatrix skew = x - x.adjoint();
  defect.entry = skew.cwiseAbs().maxCoeff(&defect.row, &defect.col);
  if (defect.entry > 0.0) {
    // i (X - X^H) is Hermitian, so its spectral radius is its operator norm.
    const RealVector ev = hermitian_eigenvalues(Complex(0.0, 1.0) * skew);
    defect.norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  }
  return defect;
}

/// Throws NotHermitianError when ||x - x^H|| exceeds the hermiticity tolerance.
inline void require_hermitian(const ComplexMatrix& x, std::string_view what) {
  if (x.rows() != x.cols()) {
    throw ArgumentError(std::string(what) + ": matrix is not square");
  }
  const HermiticityDefect defect = hermiticity_defect(x);
  if (defect.entry == 0.0) return;
  const double scale = operator_norm(0.5 * (x + x.adjoint()));
  if (defect.norm > hermiticity_tolerance(scale)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": matrix is not Hermitian; largest asymmetry |X(" << defect.row << "," << defect.col
        << ") - conj(X(" << defect.col << "," << defect.row << "))| = " << defect.entry
        << ", ||X - X^H|| = " << defect.norm;
    throw NotHermitianError(msg.str(), static_cast<long>(defect.row), static_cast<long>(defect.col),
                            defect.entry);
  }
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& x) { return 0.5 * (x + x.adjoint()); }

/// Integer interval [first, last] of chain sites.
struct SiteInterval {
  int first = 1;
  int last = 1;
  int size() const { return last - first + 1; }
  bool operator==(const SiteInterval&) const = default;
};

/// Dense Hermitian matrix acting on the sites of `support`, each of local
/// dimension `local_dim`.
class HermitianOperator {
 public:
  HermitianOperator(ComplexMatrix matrix, SiteInterval support, int local_dim)
      : matrix_(std::move(matrix)), support_(support), local_dim_(local_dim) {
    validate_shape();
    require_hermitian(matrix_, "HermitianOperator");
    matrix_ = hermitian_part(matrix_);
  }

  /// Skips the hermiticity check; for operators Hermitian by construction.
  static HermitianOperator trusted(ComplexMatrix matrix, SiteInterval support, int local_dim) {
    return HermitianOperator(std::move(matrix), support, local_dim, TrustedTag{});
  }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  SiteInterval support() const noexcept { return support_; }
  int local_dim() const noexcept { return local_dim_; }
  int n_sites() const noexcept { return support_.size(); }
  Index dim() const noexcept { return matrix_.rows(); }

 private:
  struct TrustedTag {};
  HermitianOperator(ComplexMatrix matrix, SiteInterval support, int local_dim, TrustedTag)
      : matrix_(std::move(matrix)), support_(support), local_dim_(local_dim) {
    validate_shape();
  }

  void validate_shape() const {
    if (local_dim_ < 1) throw ArgumentError("HermitianOperator: local dimension must be positive");
    if (support_.last < support_.first) throw ArgumentError("HermitianOperator: empty support");
    const auto expected = static_cast<Index>(checked_pow(static_cast<std::size_t>(local_dim_), support_.size()));
    if (matrix_.rows() != expected || matrix_.cols() != expected) {
      throw ArgumentError("HermitianOperator: matrix dimension " + std::to_string(matrix_.rows()) +
                          " does not match d^sites = " + std::to_string(expected));
    }
  }

  ComplexMatrix matrix_;
  SiteInterval support_;
  int local_dim_;
};

/// Kronecker product A (x) B; A is the left (slower) factor.
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const Index rows = a.rows() * b.rows();
  const Index cols = a.cols() * b.cols();
  require_dense_fits(static_cast<std::size_t>(std::max(rows, cols)), "kron");
  ComplexMatrix out(rows, cols);
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

namespace detail {

inline Index site_dim(int d, int n) {
  return static_cast<Index>(checked_pow(static_cast<std::size_t>(d), n));
}

inline void require_site_layout(const ComplexMatrix& x, int d, int n_sites, std::string_view what) {
  if (d < 1 || n_sites < 1) throw ArgumentError(std::string(what) + ": invalid local dimension or site count");
  const Index dim = site_dim(d, n_sites);
  if (x.rows() != dim || x.cols() != dim) {
    throw ArgumentError(std::string(what) + ": matrix dimension " + std::to_string(x.rows()) + " != " +
                        std::to_string(d) + "^" + std::to_string(n_sites));
  }
}

/// Digits of `index` in base d, most significant (site 1) first.
inline void digits(Index index, int d, std::vector<int>& out) {
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = static_cast<int>(index % d);
    index /= d;
  }
}

}  // namespace detail

/// Partial trace over `traced_sites` (1-based) of an operator on n_sites
/// sites of local dimension d. Remaining sites keep their relative order.
inline ComplexMatrix partial_trace(const ComplexMatrix& x, int d, int n_sites, const std::vector<int>& traced_sites) {
  detail::require_site_layout(x, d, n_sites, "partial_trace");
  std::vector<bool> traced(static_cast<std::size_t>(n_sites), false);
  for (int s : traced_sites) {
    if (s < 1 || s > n_sites) {
      throw ArgumentError("partial_trace: site " + std::to_string(s) + " outside [1," + std::to_string(n_sites) + "]");
    }
    if (traced[static_cast<std::size_t>(s - 1)]) {
      throw ArgumentError("partial_trace: site " + std::to_string(s) + " listed twice");
    }
    traced[static_cast<std::size_t>(s - 1)] = true;
  }
  const int n_traced = static_cast<int>(traced_sites.size());
  const Index kept_dim = detail::site_dim(d, n_sites - n_traced);
  const Index traced_dim = detail::site_dim(d, n_traced);

  // groups[t] lists full indices whose traced digits encode t, ordered by
  // their kept-digit index.
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(traced_dim),
                                         std::vector<Index>(static_cast<std::size_t>(kept_dim)));
  std::vector<int> dig(static_cast<std::size_t>(n_sites));
  for (Index full = 0; full < x.rows(); ++full) {
    detail::digits(full, d, dig);
    Index kept = 0;
    Index tr = 0;
    for (int s = 0; s < n_sites; ++s) {
      if (traced[static_cast<std::size_t>(s)]) {
        tr = tr * d + dig[static_cast<std::size_t>(s)];
      } else {
        kept = kept * d + dig[static_cast<std::size_t>(s)];
      }
    }
    groups[static_cast<std::size_t>(tr)][static_cast<std::size_t>(kept)] = full;
  }
  ComplexMatrix out = ComplexMatrix::Zero(kept_dim, kept_dim);
  for (const auto& g : groups) out += x(g, g);
  return out;
}

/// Partial trace keeping only `kept_sites` (1-based, any order is accepted
/// but the result keeps ascending site order).
inline ComplexMatrix reduce_to_sites(const ComplexMatrix& x, int d, int n_sites, const std::vector<int>& kept_sites) {
  std::vector<bool> keep(static_cast<std::size_t>(n_sites), false);
  for (int s : kept_sites) {
    if (s < 1 || s > n_sites) throw ArgumentError("reduce_to_sites: site out of range");
    keep[static_cast<std::size_t>(s - 1)] = true;
  }
  std::vector<int> traced;
  for (int s = 1; s <= n_sites; ++s) {
    if (!keep[static_cast<std::size_t>(s - 1)]) traced.push_back(s);
  }
  return partial_trace(x, d, n_sites, traced);
}

/// Reorders tensor factors: site j (0-based) of the result is site order[j]
/// of x.
inline ComplexMatrix permute_sites(const ComplexMatrix& x, int d, int n_sites, const std::vector<int>& order) {
  detail::require_site_layout(x, d, n_sites, "permute_sites");
  if (static_cast<int>(order.size()) != n_sites) throw ArgumentError("permute_sites: order has wrong length");
  std::vector<bool> seen(static_cast<std::size_t>(n_sites), false);
  for (int s : order) {
    if (s < 0 || s >= n_sites || seen[static_cast<std::size_t>(s)]) {
      throw ArgumentError("permute_sites: order is not a permutation");
    }
    seen[static_cast<std::size_t>(s)] = true;
  }
  std::vector<Index> map(static_cast<std::size_t>(x.rows()));
  std::vector<int> dig(static_cast<std::size_t>(n_sites));
  std::vector<Index> stride(static_cast<std::size_t>(n_sites));
  Index st = 1;
  for (int s = n_sites - 1; s >= 0; --s) {
    stride[static_cast<std::size_t>(s)] = st;
    st *= d;
  }
  for (Index i = 0; i < x.rows(); ++i) {
    detail::digits(i, d, dig);
    Index src = 0;
    for (int j = 0; j < n_sites; ++j) {
      src += dig[static_cast<std::size_t>(j)] * stride[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
    }
    map[static_cast<std::size_t>(i)] = src;
  }
  return x(map, map);
}

/// Embeds a two-site operator into n_sites sites; its first tensor factor
/// acts on site `first` and its second on site `second` (0-based).
inline ComplexMatrix embed_pair(const ComplexMatrix& op, int d, int n_sites, int first, int second) {
  if (op.rows() != static_cast<Index>(d) * d || op.cols() != op.rows()) {
    throw ArgumentError("embed_pair: operator must be d^2 x d^2");
  }
  if (first == second || first < 0 || second < 0 || first >= n_sites || second >= n_sites) {
    throw ArgumentError("embed_pair: invalid site pair");
  }
  const Index rest = detail::site_dim(d, n_sites - 2);
  const ComplexMatrix product = kron(op, identity(rest));
  // Current factor order: first, second, then the others ascending.
  std::vector<int> current{first, second};
  for (int s = 0; s < n_sites; ++s) {
    if (s != first && s != second) current.push_back(s);
  }
  std::vector<int> order(static_cast<std::size_t>(n_sites));
  for (int pos = 0; pos < n_sites; ++pos) order[static_cast<std::size_t>(current[static_cast<std::size_t>(pos)])] = pos;
  return permute_sites(product, d, n_sites, order);
}

/// exp(scale * H) for Hermitian H via eigendecomposition.
inline ComplexMatrix herm_expm(const HermitianOperator& h, double scale) {
  return HermitianSpectrum::of(h.matrix()).exp(scale);
}

inline ComplexMatrix herm_expm(const ComplexMatrix& h, double scale) {
  require_hermitian(h, "herm_expm");
  return HermitianSpectrum::of(hermitian_part(h)).exp(scale);
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
inline double trace_norm_hermitian(const ComplexMatrix& x) {
  return hermitian_eigenvalues(hermitian_part(x)).cwiseAbs().sum();
}

/// ||x - y||_1 for Hermitian x, y.
inline double trace_distance(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ArgumentError("trace_distance: dimension mismatch (" + std::to_string(x.rows()) + " vs " +
                        std::to_string(y.rows()) + ")");
  }
  const ComplexMatrix diff = x - y;
  require_hermitian(diff, "trace_distance");
  return trace_norm_hermitian(diff);
}

/// Hilbert projective metric log(sup(x/y) / inf(x/y)) between positive
/// definite operators, where sup(x/y) = lambda_max(y^-1/2 x y^-1/2).
inline double hilbert_metric(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.rows() != x.cols()) {
    throw ArgumentError("hilbert_metric: dimension mismatch");
  }
  require_hermitian(x, "hilbert_metric");
  require_hermitian(y, "hilbert_metric");
  const HermitianSpectrum ys = HermitianSpectrum::of(hermitian_part(y));
  const RealVector xs = hermitian_eigenvalues(hermitian_part(x));
  const double x_min = xs(0);
  const double y_min = ys.values(0);
  if (!(x_min > psd_tolerance(xs(xs.size() - 1))) || !(y_min > psd_tolerance(ys.values(ys.values.size() - 1)))) {
    throw DomainError("hilbert_metric: arguments must be positive definite (lambda_min = " + std::to_string(x_min) +
                      ", " + std::to_string(y_min) + ")");
  }
  const ComplexMatrix y_inv_sqrt = ys.apply([](double v) { return 1.0 / std::sqrt(v); });
  const RealVector ratio = hermitian_eigenvalues(hermitian_part(y_inv_sqrt * x * y_inv_sqrt));
  const double sup = ratio(ratio.size() - 1);
  const double inf = ratio(0);
  if (!(inf > 0.0)) throw DomainError("hilbert_metric: degenerate ratio spectrum");
  return std::max(0.0, std::log(sup / inf));
}

/// Column-stacking vectorization: vec(Q)[i + n j] = Q(i, j).
inline Eigen::VectorXcd vec(const ComplexMatrix& q) {
  return Eigen::Map<const Eigen::VectorXcd>(q.data(), q.size());
}

inline ComplexMatrix unvec(const Eigen::VectorXcd& v, Index n) {
  if (v.size() != n * n) throw ArgumentError("unvec: length is not n^2");
  return Eigen::Map<const ComplexMatrix>(v.data(), n, n);
}

/// Hilbert-Schmidt inner product tr(a^H b).
inline Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) { return a.conjugate().cwiseProduct(b).sum(); }

}  // namespace transferkit
