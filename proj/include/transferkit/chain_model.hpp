#pragma once

// Translation-invariant nearest-neighbour chains: the local term h on
// C^d (x) C^d, the inverse temperature, and finite-interval Hamiltonians.

#include <cmath>
#include <string>
#include <vector>

#include "operator_core.hpp"

namespace transferkit {

class ChainModel {
 public:
  ChainModel(int local_dim, ComplexMatrix h, double beta)
      : local_dim_(local_dim), h_(make_term(local_dim, std::move(h))), beta_(beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
      throw ArgumentError("ChainModel: inverse temperature must be finite and > 0, got " + std::to_string(beta));
    }
    h_norm_ = HermitianSpectrum::of(h_.matrix()).norm();
  }

  int local_dim() const noexcept { return local_dim_; }
  const HermitianOperator& h() const noexcept { return h_; }
  const ComplexMatrix& term() const noexcept { return h_.matrix(); }
  double beta() const noexcept { return beta_; }
  double h_norm() const noexcept { return h_norm_; }

  ChainModel with_beta(double beta) const { return ChainModel(local_dim_, h_.matrix(), beta); }
  ChainModel with_term(ComplexMatrix h) const { return ChainModel(local_dim_, std::move(h), beta_); }

 private:
  static HermitianOperator make_term(int d, ComplexMatrix h) {
    if (d < 2) throw ArgumentError("ChainModel: local dimension must be >= 2, got " + std::to_string(d));
    const Index dim = static_cast<Index>(d) * d;
    if (h.rows() != dim || h.cols() != dim) {
      throw ArgumentError("ChainModel: local term must be " + std::to_string(dim) + "x" + std::to_string(dim) +
                          ", got " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()));
    }
    return HermitianOperator(std::move(h), SiteInterval{1, 2}, d);
  }

  int local_dim_;
  HermitianOperator h_;
  double beta_;
  double h_norm_ = 0.0;
};

namespace pauli {
inline ComplexMatrix x() { return (ComplexMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline ComplexMatrix y() { return (ComplexMatrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished(); }
inline ComplexMatrix z() { return (ComplexMatrix(2, 2) << 1, 0, 0, -1).finished(); }
}  // namespace pauli

/// sum_{i=1}^{n-1} h_{i,i+1} on n sites (n = 1 gives the zero matrix).
inline ComplexMatrix interval_hamiltonian(const ComplexMatrix& h, int d, int n_sites) {
  if (n_sites < 1) throw ArgumentError("interval_hamiltonian: need at least one site");
  const Index dim = detail::site_dim(d, n_sites);
  require_dense_fits(static_cast<std::size_t>(dim), "interval Hamiltonian");
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  const Index pair = static_cast<Index>(d) * d;
  for (int i = 0; i + 1 < n_sites; ++i) {
    const Index left = detail::site_dim(d, i);
    const Index right = detail::site_dim(d, n_sites - 2 - i);
    // 1_left (x) h (x) 1_right: one copy of h (x) 1_right per left index.
    for (Index l = 0; l < left; ++l) {
      for (Index c = 0; c < pair; ++c) {
        for (Index r = 0; r < pair; ++r) {
          const Complex v = h(r, c);
          if (v == Complex(0.0)) continue;
          for (Index k = 0; k < right; ++k) {
            out((l * pair + r) * right + k, (l * pair + c) * right + k) += v;
          }
        }
      }
    }
  }
  return out;
}

/// H_[a,b] = sum_{i=a}^{b-1} h_{i,i+1}. Depends only on b - a by translation
/// invariance.
inline HermitianOperator build_interval_hamiltonian(const ChainModel& model, int a, int b) {
  if (b < a + 1) {
    throw ArgumentError("build_interval_hamiltonian: need b >= a + 1, got [" + std::to_string(a) + "," +
                        std::to_string(b) + "]");
  }
  return HermitianOperator::trusted(interval_hamiltonian(model.term(), model.local_dim(), b - a + 1),
                                    SiteInterval{a, b}, model.local_dim());
}

/// Returns the model at beta = 1 with h replaced by beta h, so that
/// f_beta(h) = f_1(beta h) / beta.
inline ChainModel rescale_to_unit_beta(const ChainModel& model) {
  if (model.beta() == 1.0) return model;
  return ChainModel(model.local_dim(), model.beta() * model.term(), 1.0);
}

/// Blocks an r-periodic nearest-neighbour chain into cells of r/2 sites.
///
/// `cell_terms[j]` (each d^2 x d^2) is the bond between sites j+1 and j+2 of
/// a cell; the last entry is the bond crossing into the next cell. The
/// blocked local term on two cells (r sites) collects the intra-cell bonds of
/// the left cell plus the crossing bond. The blocked H_[1,n] therefore equals
/// the unblocked Hamiltonian on n r/2 sites minus the intra-cell bonds of the
/// last cell.
inline ChainModel block_sites(const std::vector<ComplexMatrix>& cell_terms, int cell_size, double beta = 1.0) {
  if (cell_size < 2 || cell_size % 2 != 0) {
    throw ArgumentError("block_sites: cell size r must be even and >= 2, got " + std::to_string(cell_size));
  }
  const int sites_per_cell = cell_size / 2;
  if (static_cast<int>(cell_terms.size()) != sites_per_cell) {
    throw ArgumentError("block_sites: expected " + std::to_string(sites_per_cell) + " bond terms per cell, got " +
                        std::to_string(cell_terms.size()));
  }
  const Index pair = cell_terms.front().rows();
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pair))));
  if (static_cast<Index>(d) * d != pair) throw ArgumentError("block_sites: bond terms must be d^2 x d^2");
  for (const auto& t : cell_terms) {
    if (t.rows() != pair || t.cols() != pair) throw ArgumentError("block_sites: bond terms differ in dimension");
    require_hermitian(t, "block_sites");
  }
  const Index dim = detail::site_dim(d, cell_size);
  require_dense_fits(static_cast<std::size_t>(dim), "block_sites");
  ComplexMatrix blocked = ComplexMatrix::Zero(dim, dim);
  for (int j = 0; j < sites_per_cell; ++j) {
    blocked += embed_pair(cell_terms[static_cast<std::size_t>(j)], d, cell_size, j, j + 1);
  }
  return ChainModel(static_cast<int>(detail::site_dim(d, sites_per_cell)), std::move(blocked), beta);
}

// Reference models.

inline ChainModel zero_model(int d, double beta) {
  const Index dim = static_cast<Index>(d) * d;
  return ChainModel(d, ComplexMatrix::Zero(dim, dim), beta);
}

/// h = -J sigma^z (x) sigma^z.
inline ChainModel ising_model(double coupling, double beta) {
  return ChainModel(2, -coupling * kron(pauli::z(), pauli::z()), beta);
}

/// XY exchange term -(1/4)(sigma^x sigma^x + sigma^y sigma^y) = -(S^x S^x + S^y S^y).
inline ComplexMatrix xy_bond() { return -0.25 * (kron(pauli::x(), pauli::x()) + kron(pauli::y(), pauli::y())); }

/// Uniform XY chain (gamma = 1), d = 2.
inline ChainModel xy_model(double beta) { return ChainModel(2, xy_bond(), beta); }

/// Dimerized XY chain with alternating couplings 1 and gamma, blocked into
/// cells of two spins (d = 4). Free energies are per cell (two spins).
inline ChainModel dimerized_xy_model(double gamma, double beta) {
  return block_sites({xy_bond(), gamma * xy_bond()}, 4, beta);
}

}  // namespace transferkit
