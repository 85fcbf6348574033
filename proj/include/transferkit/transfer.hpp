#pragma once

// The finite-window noncommutative transfer map
//
//   L*(Q) = tr_L( E (1 (x) Q) E^H ),   E = exp(-H_[1,L]/2) exp(H_[2,L]/2),
//
// acting on operators over L-1 sites, its adjoint L(X) = tr_1(E^H (X (x) 1) E),
// and power iteration on the positive cone for the spectral radius.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "chain_model.hpp"
#include "density_matrix.hpp"

namespace transferkit {

enum class TransferMode { matrix_free, dense_superoperator };

class TransferMap;
ComplexMatrix dense_superoperator(const TransferMap& map);

class TransferMap {
 public:
  /// Builds E_L for `model` after rescaling it to unit inverse temperature.
  TransferMap(const ChainModel& model, int window, TransferMode mode = TransferMode::matrix_free)
      : model_(rescale_to_unit_beta(model)), window_(window), mode_(mode) {
    if (window < 2) throw ArgumentError("TransferMap: window L must be >= 2, got " + std::to_string(window));
    const int d = model_.local_dim();
    const Index full = detail::site_dim(d, window);
    n_ = detail::site_dim(d, window - 1);
    // E, its Kraus blocks and one eigenvector matrix are alive at the same time.
    require_dense_fits(static_cast<std::size_t>(full), "transfer map E_L", 3);

    const HermitianSpectrum outer = HermitianSpectrum::of(interval_hamiltonian(model_.term(), d, window));
    // H_[2,L] = 1 (x) H_[1,L-1] by translation invariance.
    const HermitianSpectrum inner = HermitianSpectrum::of(interval_hamiltonian(model_.term(), d, window - 1));

    // sigma_min(E) >= exp((lambda_min(H_[2,L]) - lambda_max(H_[1,L])) / 2).
    sigma_min_bound_ = std::exp(0.5 * (inner.values(0) - outer.values(outer.values.size() - 1)));
    if (!(sigma_min_bound_ > tol::kPsd)) {
      throw DomainError("TransferMap: E_L is numerically singular (sigma_min bound " + std::to_string(sigma_min_bound_) +
                        ")");
    }

    const ComplexMatrix left = outer.exp(-0.5);
    const ComplexMatrix right = inner.exp(0.5);
    e_.resize(full, full);
    if (outer.real && inner.real) {
      const RealMatrix left_r = left.real();
      const RealMatrix right_r = right.real();
      for (int t = 0; t < d; ++t) e_.middleCols(t * n_, n_) = (left_r.middleCols(t * n_, n_) * right_r).cast<Complex>();
    } else {
      for (int t = 0; t < d; ++t) e_.middleCols(t * n_, n_).noalias() = left.middleCols(t * n_, n_) * right;
    }

    // K_{s,t}(r, c) = E(r d + s, t n + c): L*(Q) = sum_{s,t} K Q K^H.
    kraus_.reserve(static_cast<std::size_t>(d) * d);
    for (int s = 0; s < d; ++s) {
      const ComplexMatrix rows = e_(Eigen::seq(s, full - 1, d), Eigen::all);
      for (int t = 0; t < d; ++t) kraus_.push_back(rows.middleCols(t * n_, n_));
    }
    // Real E (real h) keeps real operands real; a real product costs a
    // quarter of a complex one.
    if (is_real(e_)) {
      for (const auto& k : kraus_) real_kraus_.push_back(k.real());
    }
    if (mode_ == TransferMode::dense_superoperator) superoperator_ = dense_superoperator(*this);
  }

  const ChainModel& model() const noexcept { return model_; }
  int local_dim() const noexcept { return model_.local_dim(); }
  int window() const noexcept { return window_; }
  /// Dimension d^(L-1) of the operators the map acts on.
  Index operator_dim() const noexcept { return n_; }
  TransferMode mode() const noexcept { return mode_; }
  const ComplexMatrix& E() const noexcept { return e_; }
  const std::vector<ComplexMatrix>& kraus() const noexcept { return kraus_; }
  /// Real parts of the Kraus blocks when E is real; empty otherwise.
  const std::vector<RealMatrix>& real_kraus() const noexcept { return real_kraus_; }
  double sigma_min_bound() const noexcept { return sigma_min_bound_; }
  const std::optional<ComplexMatrix>& stored_superoperator() const noexcept { return superoperator_; }

 private:
  ChainModel model_;
  int window_;
  TransferMode mode_;
  Index n_ = 0;
  ComplexMatrix e_;
  std::vector<ComplexMatrix> kraus_;
  std::vector<RealMatrix> real_kraus_;
  double sigma_min_bound_ = 0.0;
  std::optional<ComplexMatrix> superoperator_;
};

inline TransferMap build_E(const ChainModel& model, int window, TransferMode mode = TransferMode::matrix_free) {
  return TransferMap(model, window, mode);
}

namespace detail {
inline void require_operand(const TransferMap& map, const ComplexMatrix& q, std::string_view what) {
  if (q.rows() != map.operator_dim() || q.cols() != map.operator_dim()) {
    throw ArgumentError(std::string(what) + ": operand dimension " + std::to_string(q.rows()) + " != d^(L-1) = " +
                        std::to_string(map.operator_dim()));
  }
}
}  // namespace detail

/// L*(Q) = tr_L(E (1 (x) Q) E^H).
inline ComplexMatrix apply_transfer(const TransferMap& map, const ComplexMatrix& q) {
  detail::require_operand(map, q, "apply_transfer");
  if (map.stored_superoperator()) return unvec(*map.stored_superoperator() * vec(q), map.operator_dim());
  if (!map.real_kraus().empty() && is_real(q)) {
    const RealMatrix qr = q.real();
    RealMatrix out = RealMatrix::Zero(q.rows(), q.cols());
    RealMatrix tmp(q.rows(), q.cols());
    for (const auto& k : map.real_kraus()) {
      tmp.noalias() = k * qr;
      out.noalias() += tmp * k.transpose();
    }
    return out.cast<Complex>();
  }
  ComplexMatrix out = ComplexMatrix::Zero(q.rows(), q.cols());
  ComplexMatrix tmp(q.rows(), q.cols());
  for (const auto& k : map.kraus()) {
    tmp.noalias() = k * q;
    out.noalias() += tmp * k.adjoint();
  }
  return out;
}

/// L(X) = tr_1(E^H (X (x) 1) E), the Hilbert-Schmidt adjoint of L*.
inline ComplexMatrix apply_adjoint(const TransferMap& map, const ComplexMatrix& x) {
  detail::require_operand(map, x, "apply_adjoint");
  if (map.stored_superoperator()) {
    return unvec(map.stored_superoperator()->adjoint() * vec(x), map.operator_dim());
  }
  if (!map.real_kraus().empty() && is_real(x)) {
    const RealMatrix xr = x.real();
    RealMatrix out = RealMatrix::Zero(x.rows(), x.cols());
    RealMatrix tmp(x.rows(), x.cols());
    for (const auto& k : map.real_kraus()) {
      tmp.noalias() = k.transpose() * xr;
      out.noalias() += tmp * k;
    }
    return out.cast<Complex>();
  }
  ComplexMatrix out = ComplexMatrix::Zero(x.rows(), x.cols());
  ComplexMatrix tmp(x.rows(), x.cols());
  for (const auto& k : map.kraus()) {
    tmp.noalias() = k.adjoint() * x;
    out.noalias() += tmp * k;
  }
  return out;
}

/// Matrix M with M vec(Q) = vec(L*(Q)) under column stacking.
inline ComplexMatrix dense_superoperator(const TransferMap& map) {
  const Index n = map.operator_dim();
  require_dense_fits(static_cast<std::size_t>(n * n), "dense superoperator", 2);
  ComplexMatrix m = ComplexMatrix::Zero(n * n, n * n);
  // vec(K Q K^H) = (conj(K) (x) K) vec(Q).
  for (const auto& k : map.kraus()) m += kron(k.conjugate(), k);
  return m;
}

/// L* restricted to Hermitian operators, as a real matrix in the orthonormal
/// basis {E_ii, (E_ij + E_ji)/sqrt2, i(E_ij - E_ji)/sqrt2 : i < j}. Because
/// L* preserves Hermiticity, M is the complexification of this map and both
/// have the same spectrum; the real form is about twice as fast to
/// diagonalize.
inline RealMatrix hermitian_superoperator(const TransferMap& map) {
  const Index n = map.operator_dim();
  require_dense_fits(static_cast<std::size_t>(n * n), "Hermitian superoperator");
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<ComplexMatrix> basis;
  basis.reserve(static_cast<std::size_t>(n * n));
  for (Index i = 0; i < n; ++i) {
    ComplexMatrix b = ComplexMatrix::Zero(n, n);
    b(i, i) = 1.0;
    basis.push_back(std::move(b));
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      ComplexMatrix sym = ComplexMatrix::Zero(n, n);
      sym(i, j) = sym(j, i) = r;
      ComplexMatrix anti = ComplexMatrix::Zero(n, n);
      anti(i, j) = Complex(0.0, r);
      anti(j, i) = Complex(0.0, -r);
      basis.push_back(std::move(sym));
      basis.push_back(std::move(anti));
    }
  }
  RealMatrix out(n * n, n * n);
  for (Index b = 0; b < n * n; ++b) {
    const ComplexMatrix image = hermitian_part(apply_transfer(map, basis[static_cast<std::size_t>(b)]));
    // Coordinates in the same basis: X_ii, sqrt2 Re X_ij, sqrt2 Im X_ij.
    Index a = 0;
    for (Index i = 0; i < n; ++i) out(a++, b) = image(i, i).real();
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        out(a++, b) = 2.0 * r * image(i, j).real();
        out(a++, b) = 2.0 * r * image(i, j).imag();
      }
    }
  }
  return out;
}

/// Spectral radius from a full nonsymmetric eigendecomposition of L* on
/// Hermitian operators. Intended as a cross-check for small windows.
inline double dense_spectral_radius(const TransferMap& map) {
  Eigen::EigenSolver<RealMatrix> solver(hermitian_superoperator(map), false);
  if (solver.info() != Eigen::Success) throw NumericalBreakdown("dense_spectral_radius: eigensolver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

struct SolverOptions {
  double tol = 1e-12;
  /// 0 selects ceil(100 L log d).
  int max_iter = 0;
  /// When positive, run exactly this many iterations (no early stop).
  int fixed_iterations = 0;
  /// Record the Hilbert-metric gap of every step (costs one eigensolve per step).
  bool record_history = false;
};

struct SpectralResult {
  double radius = 0.0;
  DensityMatrix eigenvector;
  int iterations = 0;
  /// ||L*(x) - r x||_1 at the final iterate x.
  double residual = std::numeric_limits<double>::infinity();
  /// d_H between the last two iterates; +inf when either is singular to
  /// working precision.
  double hilbert_gap = std::numeric_limits<double>::infinity();
  /// Smallest gap the metric can resolve at the eigenvector's conditioning.
  double hilbert_floor = 0.0;
  bool hilbert_resolved = false;
  bool converged = false;
  double min_eigenvalue = 0.0;
  std::vector<double> hilbert_history;
};

inline int default_max_iterations(int window, int local_dim) {
  return static_cast<int>(std::ceil(100.0 * window * std::log(static_cast<double>(local_dim))));
}

namespace detail {

struct IterateSpectrum {
  double min = 0.0;
  double max = 0.0;
};

inline IterateSpectrum extreme_eigenvalues(const ComplexMatrix& x) {
  const RealVector ev = hermitian_eigenvalues(x);
  return {ev(0), ev(ev.size() - 1)};
}

inline bool positive_definite(const IterateSpectrum& s) { return s.min > psd_tolerance(s.max); }

}  // namespace detail

/// Power iteration x <- L*(x) / tr L*(x) from x0 = 1/d^(L-1).
///
/// Stops when ||L*(x) - r x||_1 <= tol r and the Hilbert-metric gap between
/// consecutive iterates is <= max(tol, resolvable floor). When the iterates
/// are singular to working precision the gap is undefined and the residual
/// alone decides. Non-convergence is reported through `converged`; loss of
/// positivity throws NumericalBreakdown.
inline SpectralResult spectral_radius(const TransferMap& map, const SolverOptions& options = {}) {
  const Index n = map.operator_dim();
  const int max_iter = options.fixed_iterations > 0 ? options.fixed_iterations
                       : options.max_iter > 0       ? options.max_iter
                                                    : default_max_iterations(map.window(), map.local_dim());
  constexpr double kFloorFactor = 64.0 * std::numeric_limits<double>::epsilon();

  ComplexMatrix x = identity(n) / static_cast<double>(n);
  std::optional<detail::IterateSpectrum> x_spectrum = detail::IterateSpectrum{1.0 / n, 1.0 / n};
  SpectralResult result{.eigenvector = DensityMatrix::maximally_mixed(map.window() - 1, map.local_dim()),
                        .hilbert_history = {}};

  auto hilbert_gap = [&](const ComplexMatrix& next, const detail::IterateSpectrum& ns,
                         const detail::IterateSpectrum& xs) -> double {
    if (!detail::positive_definite(ns) || !detail::positive_definite(xs)) {
      return std::numeric_limits<double>::infinity();
    }
    return hilbert_metric(next, x);
  };

  ComplexMatrix next;
  for (int k = 1; k <= max_iter; ++k) {
    ComplexMatrix y = hermitian_part(apply_transfer(map, x));
    const double r = y.trace().real();
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw NumericalBreakdown("spectral_radius: trace of L*(x) is " + std::to_string(r) + " at iteration " +
                               std::to_string(k));
    }
    next = y / r;
    if (next.diagonal().real().minCoeff() < -psd_tolerance(1.0)) {
      throw NumericalBreakdown("spectral_radius: iterate lost positivity at iteration " + std::to_string(k));
    }
    result.radius = r;
    result.iterations = k;

    const bool last = k == max_iter;
    const double frob = (y - r * x).norm();  // ||.||_F <= ||.||_1
    const bool check = options.record_history || last ||
                       (options.fixed_iterations == 0 && frob <= options.tol * r);
    if (!check) {
      x.swap(next);
      x_spectrum.reset();
      continue;
    }

    result.residual = trace_norm_hermitian(y - r * x);
    const detail::IterateSpectrum ns = detail::extreme_eigenvalues(next);
    if (ns.min < -psd_tolerance(ns.max)) {
      throw NumericalBreakdown("spectral_radius: iterate has eigenvalue " + std::to_string(ns.min) +
                               " below -psd_tol at iteration " + std::to_string(k));
    }
    const detail::IterateSpectrum xs = x_spectrum ? *x_spectrum : detail::extreme_eigenvalues(x);
    const double gap = hilbert_gap(next, ns, xs);
    if (options.record_history) result.hilbert_history.push_back(gap);

    result.min_eigenvalue = ns.min;
    result.hilbert_gap = gap;
    result.hilbert_resolved = std::isfinite(gap);
    result.hilbert_floor = result.hilbert_resolved ? kFloorFactor * ns.max / ns.min : 0.0;

    const bool residual_ok = result.residual <= options.tol * r;
    const bool gap_ok = !result.hilbert_resolved || gap <= std::max(options.tol, result.hilbert_floor);
    result.converged = residual_ok && gap_ok;

    x.swap(next);
    x_spectrum = ns;
    if (result.converged && options.fixed_iterations == 0) break;
  }
  if (options.fixed_iterations > 0) {
    // Fixed-count runs report convergence of the final step only.
    result.converged = result.residual <= options.tol * result.radius &&
                       (!result.hilbert_resolved || result.hilbert_gap <= std::max(options.tol, result.hilbert_floor));
  }
  result.eigenvector = DensityMatrix(hermitian_part(x) / x.trace().real(), map.window() - 1, map.local_dim());
  return result;
}

/// Collatz-Wielandt bounds for a positive definite v:
/// sup{l : L*(v) >= l v} <= r <= inf{l : L*(v) <= l v}.
struct CollatzWielandtBounds {
  double lower = 0.0;
  double upper = 0.0;
};

inline CollatzWielandtBounds collatz_wielandt_bounds(const TransferMap& map, const ComplexMatrix& v) {
  const HermitianSpectrum vs = HermitianSpectrum::of(hermitian_part(v));
  if (!(vs.values(0) > psd_tolerance(vs.values(vs.values.size() - 1)))) {
    throw DomainError("collatz_wielandt_bounds: v must be positive definite");
  }
  const ComplexMatrix v_inv_sqrt = vs.apply([](double e) { return 1.0 / std::sqrt(e); });
  const RealVector ratio =
      hermitian_eigenvalues(hermitian_part(v_inv_sqrt * apply_transfer(map, v) * v_inv_sqrt));
  return {ratio(0), ratio(ratio.size() - 1)};
}

}  // namespace transferkit
