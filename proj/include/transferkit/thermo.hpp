#pragma once

// Free energy per site, Gibbs marginals and derived observables of the
// infinite chain, computed from the leading eigenpair of the transfer map.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "transfer.hpp"

namespace transferkit {

// ---------------------------------------------------------------------------
// Window selection

enum class LSelection { theoretical, practical };

struct ChooseLOptions {
  LSelection mode = LSelection::practical;
  /// Theoretical mode: exponent constant C and prefactor constant G.
  double C = 1.0;
  double G = 1.0;
  /// Practical mode: L = ceil(c1 + c2 log10(1/eps)).
  double c1 = 2.0;
  double c2 = 0.75;
  /// Upper cap on L (e.g. from max_window_for_budget).
  int max_L = 12;
};

/// Largest L whose transfer map (E_L, its Kraus blocks and an eigenvector
/// matrix) fits in `budget_bytes`.
inline int max_window_for_budget(int local_dim, std::size_t budget_bytes) {
  int best = 2;
  for (int L = 2; L < 64; ++L) {
    const long double dim = std::pow(static_cast<long double>(local_dim), L);
    if (3.0L * 16.0L * dim * dim > static_cast<long double>(budget_bytes)) break;
    best = L;
  }
  return best;
}

namespace detail {

/// (a x + b) / log x, the sufficient window as a function of x = log(1/eps).
inline double theoretical_window(double x, double C, double G) {
  return (x * (2.0 + 2.0 * std::exp(2.0 * C - 1.0)) + 2.0 * std::log(G)) / std::log(x);
}

}  // namespace detail

/// Window size L for target accuracy eps in (0, 1/e).
///
/// Theoretical mode evaluates the sufficient window
///   ceil( (log(1/eps)(2 + 2 e^(2C-1)) + 2 log G) / log log(1/eps) ).
/// That expression is not monotone close to eps = 1/e; since a window valid
/// for eps' <= eps is also valid for eps, the minimum over eps' in (0, eps]
/// is returned, which is non-increasing in eps.
inline int choose_L(double epsilon, const ChooseLOptions& options = {}) {
  if (!(epsilon > 0.0) || !(epsilon < std::exp(-1.0))) {
    throw ArgumentError("choose_L: epsilon must lie in (0, 1/e), got " + std::to_string(epsilon));
  }
  if (options.max_L < 2) throw ArgumentError("choose_L: max_L must be >= 2");
  if (options.mode == LSelection::practical) {
    const double raw = std::ceil(options.c1 + options.c2 * std::log10(1.0 / epsilon));
    return std::clamp(static_cast<int>(raw), 2, options.max_L);
  }
  if (!(options.G > 0.0)) throw ArgumentError("choose_L: constant G must be positive");
  const double a = 2.0 + 2.0 * std::exp(2.0 * options.C - 1.0);
  const double b = 2.0 * std::log(options.G);
  const double x0 = std::log(1.0 / epsilon);
  // d/dx of (a x + b)/log x has the sign of a log x - a - b/x, which is
  // increasing in x for x > 1; the minimiser on [x0, inf) is x0 or its root.
  auto slope_sign = [&](double x) { return a * std::log(x) - a - b / x; };
  double x_best = x0;
  if (slope_sign(x0) < 0.0) {
    double lo = x0;
    double hi = std::max(2.0 * x0, std::exp(1.0));
    while (slope_sign(hi) < 0.0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (slope_sign(mid) < 0.0 ? lo : hi) = mid;
    }
    x_best = hi;
  }
  const double value = std::ceil(detail::theoretical_window(x_best, options.C, options.G));
  return std::max(2, static_cast<int>(value));
}

// ---------------------------------------------------------------------------
// Free energy

struct FreeEnergyEstimate {
  /// -log(r_L) / beta, per site of the model.
  double value;
  int L;
  double beta;
  SpectralResult spectral;
  double wall_time;
  /// ||h|| + log(d) / beta. The true free energy lies within +-envelope; an
  /// estimate outside it means the window is far too small for this beta ||h||.
  double envelope;

  bool within_envelope() const { return std::abs(value) <= envelope * (1.0 + 1e-12); }
};

inline FreeEnergyEstimate free_energy(const ChainModel& model, int window, const SolverOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  const TransferMap map(model, window);
  SpectralResult spectral = spectral_radius(map, options);
  const double value = -std::log(spectral.radius) / model.beta();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double envelope = model.h_norm() + std::log(static_cast<double>(model.local_dim())) / model.beta();
  return {value, window, model.beta(), std::move(spectral), elapsed, envelope};
}

// ---------------------------------------------------------------------------
// Gibbs marginals

struct MarginalResult {
  DensityMatrix state;
  SpectralResult spectral;
  /// Trace distance moved by the projection onto the density-matrix set.
  double projection_distance;
};

/// k-site marginal (first k sites) of an eigenvector on L-1 sites.
inline ProjectedState marginal_from_eigenvector(const DensityMatrix& eigenvector, int k) {
  if (k < 1 || k > eigenvector.n_sites()) {
    throw ArgumentError("marginal: k must satisfy 1 <= k <= L-1 = " + std::to_string(eigenvector.n_sites()) +
                        ", got " + std::to_string(k));
  }
  std::vector<int> traced;
  for (int s = k + 1; s <= eigenvector.n_sites(); ++s) traced.push_back(s);
  const ComplexMatrix reduced =
      partial_trace(eigenvector.matrix(), eigenvector.local_dim(), eigenvector.n_sites(), traced);
  return project_to_density_matrix(reduced, k, eigenvector.local_dim());
}

inline MarginalResult gibbs_marginal_with_diagnostics(const ChainModel& model, int window, int k,
                                                      const SolverOptions& options = {}) {
  if (k < 1 || k >= window) {
    throw ArgumentError("gibbs_marginal: need 1 <= k < L, got k = " + std::to_string(k) + ", L = " +
                        std::to_string(window));
  }
  const TransferMap map(model, window);
  SpectralResult spectral = spectral_radius(map, options);
  ProjectedState projected = marginal_from_eigenvector(spectral.eigenvector, k);
  return {std::move(projected.state), std::move(spectral), projected.projection_distance};
}

/// One-sided Gibbs marginal on the first k sites of the half-infinite chain.
inline DensityMatrix gibbs_marginal(const ChainModel& model, int window, int k, const SolverOptions& options = {}) {
  return gibbs_marginal_with_diagnostics(model, window, k, options).state;
}

// ---------------------------------------------------------------------------
// Two-sided chain via the folded one-sided chain

/// Folds the two-sided chain at site 1: each new site carries an "up" copy
/// (sites 1,2,... going left) and a "down" copy (going right), local space
/// C^d_up (x) C^d_down. The local term on sites (1u,1d,2u,2d) is
///   h_{2u,1u} + h_{1d,2d} + h_{1u,1d} - h_{2u,2d};
/// the rung terms telescope so only the 1u-1d rung survives at the fold.
inline ChainModel two_sided_model(const ChainModel& model) {
  const int d = model.local_dim();
  const ComplexMatrix& h = model.term();
  constexpr int up1 = 0, down1 = 1, up2 = 2, down2 = 3;
  ComplexMatrix folded = embed_pair(h, d, 4, up2, up1) + embed_pair(h, d, 4, down1, down2) +
                         embed_pair(h, d, 4, up1, down1) - embed_pair(h, d, 4, up2, down2);
  return ChainModel(d * d, hermitian_part(folded), model.beta());
}

/// Site order taking the folded marginal on k sites (1u,1d,...,ku,kd) to
/// chain order ku,...,1u,1d,...,kd. Entry j is the folded position of chain
/// site j (both 0-based).
inline std::vector<int> unfold_order(int k) {
  std::vector<int> order;
  for (int i = k - 1; i >= 0; --i) order.push_back(2 * i);
  for (int i = 0; i < k; ++i) order.push_back(2 * i + 1);
  return order;
}

struct TwoSidedMarginal {
  /// 2k consecutive sites of the two-sided chain; sites k and k+1 (1-based)
  /// are the two sites adjacent to the fold.
  DensityMatrix state;
  SpectralResult spectral;
  double projection_distance;
};

/// Two-sided marginal on 2k sites from the folded chain with window L
/// (L counts folded sites, each holding two original sites).
inline TwoSidedMarginal two_sided_marginal(const ChainModel& model, int window, int k,
                                           const SolverOptions& options = {}) {
  const ChainModel folded = two_sided_model(model);
  MarginalResult m = gibbs_marginal_with_diagnostics(folded, window, k, options);
  const int d = model.local_dim();
  const ComplexMatrix chain = permute_sites(m.state.matrix(), d, 2 * k, unfold_order(k));
  return {DensityMatrix(chain, 2 * k, d), std::move(m.spectral), m.projection_distance};
}

/// tr(h rho) for a two-site state.
inline double bond_expectation(const DensityMatrix& pair, const ComplexMatrix& h) {
  if (pair.n_sites() != 2 || pair.dim() != h.rows()) throw ArgumentError("bond_expectation: need a two-site state");
  return hs_inner(h.adjoint(), pair.matrix()).real();
}

/// Two-sided energy per bond <h_{1,2}> from the folded chain's one-site
/// marginal (the 1u-1d bond).
inline double two_sided_energy_per_bond(const ChainModel& model, int window, const SolverOptions& options = {}) {
  const TwoSidedMarginal m = two_sided_marginal(model, window, 1, options);
  return bond_expectation(m.state, model.term());
}

// ---------------------------------------------------------------------------
// Observables as derivatives of the free energy

struct DerivativeOptions {
  /// Target accuracy for the estimate.
  double epsilon = 1e-6;
  /// Bound M2 on |d^2 f / d eps^2|.
  double second_derivative_bound = 10.0;
  SolverOptions solver{};
};

struct ObservableEstimate {
  double value;
  double step;
  /// step M2 / 2 + 2 tol / step.
  double error_bound;
  bool meets_target;
  FreeEnergyEstimate base;
  FreeEnergyEstimate perturbed;
};

/// Forward difference (f(h + s P) - f(h)) / s of the free energy, which
/// approximates <P_{1,2}> in the infinite-chain Gibbs state. The step is
/// s = min(1, sqrt(2 tol / M2)). Both solves run the same number of power
/// iterations so their truncation errors are correlated.
inline ObservableEstimate expectation_by_derivative(const ChainModel& model, const ComplexMatrix& observable, int window,
                                                    const DerivativeOptions& options = {}) {
  if (observable.rows() != model.term().rows() || observable.cols() != model.term().cols()) {
    throw ArgumentError("expectation_by_derivative: observable must act on two sites");
  }
  require_hermitian(observable, "expectation_by_derivative");
  const ComplexMatrix p = hermitian_part(observable);
  if (operator_norm(p) > 1.0 + 1e-12) {
    throw ArgumentError("expectation_by_derivative: ||P|| must be <= 1; rescale the observable");
  }
  if (!(options.epsilon > 0.0)) throw ArgumentError("expectation_by_derivative: epsilon must be positive");
  if (!(options.second_derivative_bound > 0.0)) {
    throw ArgumentError("expectation_by_derivative: second derivative bound must be positive");
  }
  const double tol = options.solver.tol;
  const double step = std::min(1.0, std::sqrt(2.0 * tol / options.second_derivative_bound));
  const ChainModel shifted = model.with_term(model.term() + step * p);

  FreeEnergyEstimate base = free_energy(model, window, options.solver);
  FreeEnergyEstimate pert = free_energy(shifted, window, options.solver);
  const int iterations = std::max(base.spectral.iterations, pert.spectral.iterations);
  SolverOptions pinned = options.solver;
  pinned.fixed_iterations = iterations;
  if (base.spectral.iterations != iterations) base = free_energy(model, window, pinned);
  if (pert.spectral.iterations != iterations) pert = free_energy(shifted, window, pinned);

  const double value = (pert.value - base.value) / step;
  const double bound = 0.5 * step * options.second_derivative_bound + 2.0 * tol / step;
  return {value, step, bound, bound <= options.epsilon, std::move(base), std::move(pert)};
}

// ---------------------------------------------------------------------------
// Entropies

enum class LogBase { natural, two };

inline constexpr double kEntropyCutoff = 1e-14;

/// -sum_i l_i log l_i over eigenvalues, dropping l_i < 1e-14.
inline double entropy(const DensityMatrix& rho, LogBase base = LogBase::natural) {
  const RealVector ev = hermitian_eigenvalues(rho.matrix());
  double s = 0.0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) >= kEntropyCutoff) s -= ev(i) * std::log(ev(i));
  }
  if (base == LogBase::two) s /= std::log(2.0);
  return s;
}

namespace detail {

using SiteGroup = std::vector<int>;

inline void require_groups(const DensityMatrix& rho, const std::vector<const SiteGroup*>& groups, std::string_view what) {
  std::set<int> seen;
  for (const SiteGroup* g : groups) {
    if (g->empty()) throw ArgumentError(std::string(what) + ": site groups must be nonempty");
    for (int s : *g) {
      if (s < 1 || s > rho.n_sites()) {
        throw ArgumentError(std::string(what) + ": site " + std::to_string(s) + " outside [1," +
                            std::to_string(rho.n_sites()) + "]");
      }
      if (!seen.insert(s).second) {
        throw ArgumentError(std::string(what) + ": site groups must be disjoint (site " + std::to_string(s) +
                            " repeated)");
      }
    }
  }
}

inline SiteGroup merge(std::initializer_list<const SiteGroup*> groups) {
  SiteGroup out;
  for (const SiteGroup* g : groups) out.insert(out.end(), g->begin(), g->end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// I(A:B) = S(A) + S(B) - S(AB); sites outside A and B are traced out.
inline double mutual_information(const DensityMatrix& rho, const std::vector<int>& a, const std::vector<int>& b,
                                 LogBase base = LogBase::natural) {
  detail::require_groups(rho, {&a, &b}, "mutual_information");
  const double s_a = entropy(rho.reduced(detail::merge({&a})), base);
  const double s_b = entropy(rho.reduced(detail::merge({&b})), base);
  const double s_ab = entropy(rho.reduced(detail::merge({&a, &b})), base);
  return s_a + s_b - s_ab;
}

/// Mutual information between sites [1, split] and [split+1, n].
inline double mutual_information(const DensityMatrix& rho, int split, LogBase base = LogBase::natural) {
  if (split < 1 || split >= rho.n_sites()) {
    throw ArgumentError("mutual_information: split must leave both parts nonempty");
  }
  std::vector<int> a(static_cast<std::size_t>(split));
  std::vector<int> b(static_cast<std::size_t>(rho.n_sites() - split));
  std::iota(a.begin(), a.end(), 1);
  std::iota(b.begin(), b.end(), split + 1);
  return mutual_information(rho, a, b, base);
}

/// I(A:C|B) = S(AB) + S(BC) - S(ABC) - S(B); sites outside A, B, C are
/// traced out.
inline double conditional_mutual_information(const DensityMatrix& rho, const std::vector<int>& a,
                                             const std::vector<int>& b, const std::vector<int>& c,
                                             LogBase base = LogBase::natural) {
  detail::require_groups(rho, {&a, &b, &c}, "conditional_mutual_information");
  const double s_ab = entropy(rho.reduced(detail::merge({&a, &b})), base);
  const double s_bc = entropy(rho.reduced(detail::merge({&b, &c})), base);
  const double s_abc = entropy(rho.reduced(detail::merge({&a, &b, &c})), base);
  const double s_b = entropy(rho.reduced(detail::merge({&b})), base);
  return s_ab + s_bc - s_abc - s_b;
}

/// I(A:C|B) with B the remaining sites of the marginal.
inline double conditional_mutual_information(const DensityMatrix& rho, const std::vector<int>& a,
                                             const std::vector<int>& c, LogBase base = LogBase::natural) {
  detail::require_groups(rho, {&a, &c}, "conditional_mutual_information");
  std::vector<int> b;
  for (int s = 1; s <= rho.n_sites(); ++s) {
    if (std::find(a.begin(), a.end(), s) == a.end() && std::find(c.begin(), c.end(), s) == c.end()) b.push_back(s);
  }
  if (b.empty()) throw ArgumentError("conditional_mutual_information: conditioning set is empty");
  return conditional_mutual_information(rho, a, b, c, base);
}

/// Sites (first, first + distance) of an n-site marginal, 1-based. The
/// default keeps one site between the pair and the marginal's left edge.
inline std::pair<int, int> pair_at_distance(int n_sites, int distance, int first = 2) {
  if (first < 1 || distance < 1 || first + distance > n_sites) {
    throw ArgumentError("pair_at_distance: sites " + std::to_string(first) + " and " +
                        std::to_string(first + distance) + " do not fit in " + std::to_string(n_sites) + " sites");
  }
  return {first, first + distance};
}

}  // namespace transferkit
