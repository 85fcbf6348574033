#pragma once

// Independent reference computations: exact diagonalization of open chains,
// brute-force finite-chain marginals, the classical d x d transfer matrix and
// the free-fermion solution of the dimerized XY chain.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "chain_model.hpp"
#include "density_matrix.hpp"

namespace transferkit {

struct FiniteChainResult {
  int N;
  double beta;
  double log_Z;
  /// -log Z / (beta N).
  double f_per_site;
  std::optional<DensityMatrix> marginal;
};

namespace detail {

/// H_[1,N] split into the connected components of its sparsity graph. Each
/// block is an invariant subspace, so its spectrum is part of the spectrum
/// of H; for number-conserving models the blocks are the charge sectors.
struct BlockedHamiltonian {
  std::vector<std::vector<Index>> blocks;  // basis states of each block, ascending
  std::vector<ComplexMatrix> matrices;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

inline BlockedHamiltonian blocked_chain_hamiltonian(const ChainModel& model, int n_sites) {
  const int d = model.local_dim();
  const ComplexMatrix& h = model.term();
  const Index dim = site_dim(d, n_sites);
  const Index pair = static_cast<Index>(d) * d;
  constexpr double kZero = 0.0;

  // Bond i couples digits (i, i+1); stride of the pair's low digit.
  auto visit = [&](Index state, auto&& emit) {
    Index stride = 1;
    for (int i = n_sites - 2; i >= 0; --i) {
      const Index pair_state = (state / stride) % pair;
      const Index base = state - pair_state * stride;
      for (Index out = 0; out < pair; ++out) {
        const Complex v = h(out, pair_state);
        if (std::abs(v) > kZero) emit(base + out * stride, v);
      }
      stride *= d;
    }
  };

  DisjointSets sets(static_cast<std::size_t>(dim));
  for (Index s = 0; s < dim; ++s) {
    visit(s, [&](Index t, Complex) { sets.unite(static_cast<std::size_t>(s), static_cast<std::size_t>(t)); });
  }
  BlockedHamiltonian out;
  std::vector<Index> block_of(static_cast<std::size_t>(dim), -1);
  std::vector<Index> position(static_cast<std::size_t>(dim), 0);
  for (Index s = 0; s < dim; ++s) {
    const auto root = static_cast<Index>(sets.find(static_cast<std::size_t>(s)));
    if (block_of[static_cast<std::size_t>(root)] < 0) {
      block_of[static_cast<std::size_t>(root)] = static_cast<Index>(out.blocks.size());
      out.blocks.emplace_back();
    }
    auto& block = out.blocks[static_cast<std::size_t>(block_of[static_cast<std::size_t>(root)])];
    position[static_cast<std::size_t>(s)] = static_cast<Index>(block.size());
    block.push_back(s);
  }
  std::size_t largest = 0;
  for (const auto& b : out.blocks) largest = std::max(largest, b.size());
  require_dense_fits(largest, "exact diagonalization block", 2);

  out.matrices.reserve(out.blocks.size());
  for (const auto& block : out.blocks) {
    ComplexMatrix m = ComplexMatrix::Zero(static_cast<Index>(block.size()), static_cast<Index>(block.size()));
    for (std::size_t col = 0; col < block.size(); ++col) {
      visit(block[col], [&](Index t, Complex v) { m(position[static_cast<std::size_t>(t)], static_cast<Index>(col)) += v; });
    }
    out.matrices.push_back(std::move(m));
  }
  return out;
}

inline double log_sum_exp(const std::vector<double>& xs) {
  const double top = *std::max_element(xs.begin(), xs.end());
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - top);
  return top + std::log(acc);
}

}  // namespace detail

/// Z_N = tr exp(-beta H_[1,N]) for the open N-site chain by full
/// diagonalization (block by block), log Z via log-sum-exp.
inline FiniteChainResult exact_diag_free_energy(const ChainModel& model, int N) {
  if (N < 2) throw ArgumentError("exact_diag_free_energy: need N >= 2");
  const detail::BlockedHamiltonian blocked = detail::blocked_chain_hamiltonian(model, N);
  std::vector<double> exponents;
  for (const auto& m : blocked.matrices) {
    const RealVector ev = hermitian_eigenvalues(hermitian_part(m));
    for (Index i = 0; i < ev.size(); ++i) exponents.push_back(-model.beta() * ev(i));
  }
  const double log_z = detail::log_sum_exp(exponents);
  return {N, model.beta(), log_z, -log_z / (model.beta() * N), std::nullopt};
}

/// rho_{L,m}: normalized partial trace over sites [L, m] of exp(-beta H_[1,m]),
/// a state on sites [1, L-1].
inline DensityMatrix gibbs_marginal_bruteforce(const ChainModel& model, int window, int m) {
  if (window < 2 || m <= window) throw ArgumentError("gibbs_marginal_bruteforce: need m > L >= 2");
  const int d = model.local_dim();
  const detail::BlockedHamiltonian blocked = detail::blocked_chain_hamiltonian(model, m);
  const Index kept_dim = detail::site_dim(d, window - 1);
  const Index traced_dim = detail::site_dim(d, m - window + 1);

  std::vector<HermitianSpectrum> spectra;
  double e_min = std::numeric_limits<double>::infinity();
  for (const auto& mat : blocked.matrices) {
    spectra.push_back(HermitianSpectrum::of(hermitian_part(mat)));
    e_min = std::min(e_min, spectra.back().values(0));
  }
  ComplexMatrix rho = ComplexMatrix::Zero(kept_dim, kept_dim);
  for (std::size_t b = 0; b < spectra.size(); ++b) {
    const auto& block = blocked.blocks[b];
    const RealVector weights =
        spectra[b].values.unaryExpr([&](double e) { return std::exp(-0.5 * model.beta() * (e - e_min)); });
    const ComplexMatrix scaled = spectra[b].vectors * weights.asDiagonal();
    // Group block rows by their traced configuration.
    std::vector<std::vector<Index>> rows_by_trace(static_cast<std::size_t>(traced_dim));
    for (std::size_t r = 0; r < block.size(); ++r) {
      rows_by_trace[static_cast<std::size_t>(block[r] % traced_dim)].push_back(static_cast<Index>(r));
    }
    for (const auto& rows : rows_by_trace) {
      if (rows.empty()) continue;
      std::vector<Index> kept(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) kept[i] = block[static_cast<std::size_t>(rows[i])] / traced_dim;
      const ComplexMatrix w = scaled(rows, Eigen::all);
      rho(kept, kept) += w * w.adjoint();
    }
  }
  return DensityMatrix::normalized(rho, window - 1, d);
}

/// Free energy per site of a classical chain: h diagonal in the product
/// basis, f = -(1/beta) log lambda_max(T), T[s,s'] = exp(-beta h(ss',ss')).
inline double classical_transfer_free_energy(const ComplexMatrix& h, int d, double beta) {
  const Index pair = static_cast<Index>(d) * d;
  if (h.rows() != pair || h.cols() != pair) throw ArgumentError("classical_transfer_free_energy: h must be d^2 x d^2");
  if (!(beta > 0.0)) throw ArgumentError("classical_transfer_free_energy: beta must be positive");
  const double scale = 1.0 + h.cwiseAbs().maxCoeff();
  ComplexMatrix off = h;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() > 1e-14 * scale || h.diagonal().imag().cwiseAbs().maxCoeff() > 1e-14 * scale) {
    throw ArgumentError("classical_transfer_free_energy: h must be real diagonal in the computational basis");
  }
  RealMatrix t(d, d);
  for (int s = 0; s < d; ++s) {
    for (int sp = 0; sp < d; ++sp) t(s, sp) = std::exp(-beta * h(s * d + sp, s * d + sp).real());
  }
  Eigen::EigenSolver<RealMatrix> solver(t, false);
  const double lambda = solver.eigenvalues().real().maxCoeff();  // Perron root of a positive matrix
  return -std::log(lambda) / beta;
}

inline double classical_transfer_free_energy(const ChainModel& model) {
  return classical_transfer_free_energy(model.term(), model.local_dim(), model.beta());
}

// ---------------------------------------------------------------------------
// Dimerized XY chain  H = -beta sum_i [(S^x S^x + S^y S^y)_{2i-1,2i} + gamma (...)_{2i,2i+1}]
//
// Jordan-Wigner maps it to free fermions hopping with amplitudes beta/2 and
// beta gamma/2. With a two-site unit cell the single-particle energies are
// +-eps(k), eps(k) = (beta/2)|1 + gamma e^{ik}|, so per spin
//   beta f = -(1/2) <log(2 + 2 cosh eps(k))>_k.

namespace detail {
inline double log_two_plus_two_cosh(double x) {
  const double a = std::abs(x);
  return a + 2.0 * std::log1p(std::exp(-a));
}
}  // namespace detail

inline constexpr int kXyQuadraturePoints = 10000;

/// beta f per spin of the infinite dimerized XY chain (trapezoidal rule in k).
inline double xy_exact(double beta, double gamma, int points = kXyQuadraturePoints) {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw ArgumentError("xy_exact: need beta >= 0 and gamma >= 0");
  // long double keeps the summation error of 1e4 terms below 1e-16
  long double acc = 0.0L;
  for (int j = 0; j < points; ++j) {
    const double k = 2.0 * std::numbers::pi * j / points;
    const double eps = 0.5 * beta * std::abs(Complex(1.0, 0.0) + gamma * std::polar(1.0, k));
    acc += detail::log_two_plus_two_cosh(eps);
  }
  return static_cast<double>(-0.5L * acc / points);
}

/// d(beta f)/d(beta) per spin: the mean of -(S^x S^x + S^y S^y) per spin for
/// the coupling pattern (1, gamma). At gamma = 1 this is the energy per bond
/// of h = -(1/4)(sigma^x sigma^x + sigma^y sigma^y).
inline double xy_exact_energy(double beta, double gamma, int points = kXyQuadraturePoints) {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw ArgumentError("xy_exact_energy: need beta >= 0 and gamma >= 0");
  long double acc = 0.0L;
  for (int j = 0; j < points; ++j) {
    const double k = 2.0 * std::numbers::pi * j / points;
    const double band = 0.5 * std::abs(Complex(1.0, 0.0) + gamma * std::polar(1.0, k));
    // d/dbeta log(2 + 2 cosh(beta band)) = band tanh(beta band / 2)
    acc += band * std::tanh(0.5 * beta * band);
  }
  return static_cast<double>(-0.5L * acc / points);
}

/// log Z of the open chain with n spins and bonds alternating 1, gamma
/// (starting with 1), from the single-particle spectrum.
inline double xy_finite_log_z(double beta, double gamma, int n_spins) {
  if (n_spins < 2) throw ArgumentError("xy_finite_log_z: need at least two spins");
  RealMatrix a = RealMatrix::Zero(n_spins, n_spins);
  for (int i = 0; i + 1 < n_spins; ++i) {
    const double t = (i % 2 == 0 ? 1.0 : gamma) * 0.5 * beta;
    a(i, i + 1) = a(i + 1, i) = -t;
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(a, Eigen::EigenvaluesOnly);
  double log_z = 0.0;
  for (Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double e = solver.eigenvalues()(i);
    log_z += e > 0.0 ? std::log1p(std::exp(-e)) : -e + std::log1p(std::exp(e));
  }
  return log_z;
}

/// Fits f_N = f + a/N + b/N^2 through three points and returns f.
inline double richardson_extrapolate(const std::vector<int>& sizes, const std::vector<double>& values) {
  if (sizes.size() != 3 || values.size() != 3) throw ArgumentError("richardson_extrapolate: need three points");
  Eigen::Matrix3d m;
  Eigen::Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    const double inv = 1.0 / sizes[static_cast<std::size_t>(i)];
    m.row(i) << 1.0, inv, inv * inv;
    rhs(i) = values[static_cast<std::size_t>(i)];
  }
  return m.fullPivLu().solve(rhs)(0);
}

struct XyValidation {
  double quadrature;    // xy_exact
  double extrapolated;  // exact diagonalization + Richardson
  double discrepancy;
};

inline constexpr double kXyValidationTolerance = 1e-6;

/// Cross-checks xy_exact against exact diagonalization of finite open chains
/// extrapolated in 1/N. Throws OracleMismatch above 1e-6. For gamma = 1 the
/// sizes count spins; otherwise they count two-spin cells of the blocked
/// chain.
inline XyValidation validate_xy_exact(double beta, double gamma, std::vector<int> sizes = {}) {
  const bool uniform = gamma == 1.0;
  if (sizes.empty()) sizes = uniform ? std::vector<int>{8, 10, 12} : std::vector<int>{4, 5, 6};
  if (!(beta > 0.0)) {
    const double q = xy_exact(beta, gamma);
    return {q, -std::log(2.0), std::abs(q + std::log(2.0))};
  }
  const ChainModel model = uniform ? xy_model(beta) : dimerized_xy_model(gamma, beta);
  const double spins_per_site = uniform ? 1.0 : 2.0;
  std::vector<double> values;
  for (int n : sizes) values.push_back(beta * exact_diag_free_energy(model, n).f_per_site / spins_per_site);
  const double extrapolated = richardson_extrapolate(sizes, values);
  const double quadrature = xy_exact(beta, gamma);
  const XyValidation v{quadrature, extrapolated, std::abs(quadrature - extrapolated)};
  if (v.discrepancy > kXyValidationTolerance) {
    throw OracleMismatch("validate_xy_exact: quadrature " + std::to_string(quadrature) +
                         " and extrapolated exact diagonalization " + std::to_string(extrapolated) + " differ by " +
                         std::to_string(v.discrepancy));
  }
  return v;
}

}  // namespace transferkit
