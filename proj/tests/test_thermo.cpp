#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"

using namespace transferkit;
using tk_test::max_abs;
using tk_test::Rng;

namespace {

const double kLog2 = std::log(2.0);

// XY at beta = 1 with an L = 10 window is reused by several tests.
const MarginalResult& xy_window10() {
  static const MarginalResult m = gibbs_marginal_with_diagnostics(xy_model(1.0), 10, 9);
  return m;
}

// Eight consecutive sites of the two-sided XY chain (fold window 5).
const DensityMatrix& xy_two_sided8() {
  static const DensityMatrix m = two_sided_marginal(xy_model(1.0), 5, 4).state;
  return m;
}

DensityMatrix random_state(Rng& rng, int n_sites, int d = 2) {
  const Index dim = static_cast<Index>(std::pow(d, n_sites));
  return DensityMatrix(tk_test::random_psd(rng, dim, 1 + static_cast<Index>(rng() % dim)), n_sites, d);
}

DensityMatrix bell_state() {
  ComplexMatrix psi = ComplexMatrix::Zero(4, 1);
  psi(0, 0) = psi(3, 0) = 1.0 / std::sqrt(2.0);
  return DensityMatrix(psi * psi.adjoint(), 2, 2);
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(ChooseL, RejectsEpsilonOutsideRange) {
  EXPECT_THROW(choose_L(0.0), ArgumentError);
  EXPECT_THROW(choose_L(-1e-3), ArgumentError);
  EXPECT_THROW(choose_L(std::exp(-1.0)), ArgumentError);
  EXPECT_THROW(choose_L(0.5), ArgumentError);
  ChooseLOptions t{.mode = LSelection::theoretical};
  EXPECT_THROW(choose_L(1.0, t), ArgumentError);
}

TEST(ChooseL, MonotoneInEpsilon) {
  for (LSelection mode : {LSelection::practical, LSelection::theoretical}) {
    for (double g : {0.5, 1.0, 40.0}) {
      ChooseLOptions opt{.mode = mode, .C = 1.0, .G = g, .max_L = 1000};
      int prev = std::numeric_limits<int>::max();
      for (double e = 1e-300; e < std::exp(-1.0); e *= 1.3) {
        const int L = choose_L(e, opt);
        EXPECT_LE(L, prev) << "eps " << e << " G " << g;
        prev = L;
      }
    }
  }
}

TEST(ChooseL, TheoreticalModeEvaluatesFormula) {
  const double eps = 1e-6;
  const double x = std::log(1e6);
  const double expected = std::ceil(x * (2.0 + 2.0 * std::exp(1.0)) / std::log(x));
  EXPECT_EQ(expected, 40.0);
  EXPECT_EQ(choose_L(eps, {.mode = LSelection::theoretical, .C = 1.0, .G = 1.0}), 40);
}

TEST(ChooseL, PracticalModeCapsAtBudget) {
  EXPECT_EQ(choose_L(1e-12, {.max_L = 11}), 11);
  EXPECT_EQ(choose_L(1e-12, {.max_L = 7}), 7);
  EXPECT_EQ(choose_L(1e-8, {.max_L = 64}), 8);
  EXPECT_GE(max_window_for_budget(2, std::size_t{2} << 30), 11);
}

// ---------------------------------------------------------------------------

TEST(FreeEnergy, ZeroTermIsMinusLogD) {
  for (int L : {2, 3, 5, 8}) EXPECT_NEAR(free_energy(zero_model(2, 1.0), L).value, -kLog2, 1e-12) << L;
  EXPECT_NEAR(free_energy(zero_model(3, 2.0), 3).value, -std::log(3.0) / 2.0, 1e-12);
}

TEST(FreeEnergy, ClassicalIsing) {
  const FreeEnergyEstimate f = free_energy(ising_model(1.0, 1.0), 4);
  EXPECT_NEAR(f.value, -std::log(2.0 * std::cosh(1.0)), 1e-8);
  EXPECT_TRUE(f.spectral.converged);
  EXPECT_EQ(f.L, 4);
}

TEST(FreeEnergy, XyMatchesFreeFermions) {
  const FreeEnergyEstimate f = free_energy(xy_model(1.0), 10);
  EXPECT_NEAR(f.value, xy_exact(1.0, 1.0), 1e-8);
  EXPECT_EQ(f.value, -std::log(f.spectral.radius));
}

TEST(FreeEnergy, XyErrorDecreasesWithWindow) {
  const double exact = xy_exact(1.0, 1.0);
  double prev = INFINITY;
  for (int L : {4, 6, 8, 10}) {
    const double err = std::abs(free_energy(xy_model(1.0), L).value - exact);
    std::printf("[note] L = %d  |f - f_exact| = %.3e\n", L, err);
    EXPECT_LT(err, prev) << "L = " << L;
    prev = err;
  }
  EXPECT_LE(prev, 1e-8);
}

TEST(FreeEnergy, BetaRescalingExact) {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const double beta = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
    const ChainModel m(2, tk_test::random_hermitian_with_norm(rng, 4, 1.0), beta);
    const ChainModel unit(2, beta * m.term(), 1.0);
    const double a = free_energy(m, 3).value;
    const double b = free_energy(unit, 3).value / beta;
    EXPECT_NEAR(a, b, 1e-12) << "trial " << trial;
  }
}

TEST(FreeEnergy, IsingAtBetaTwoViaRescaling) {
  EXPECT_NEAR(free_energy(ising_model(1.0, 2.0), 4).value, -std::log(2.0 * std::cosh(2.0)) / 2.0, 1e-8);
}

TEST(FreeEnergy, WithinVariationalEnvelope) {
  Rng rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = trial % 3 == 0 ? 3 : 2;
    const double beta = std::uniform_real_distribution<double>(0.2, 3.0)(rng);
    const double norm = std::uniform_real_distribution<double>(0.1, 3.0 / beta)(rng);
    const ChainModel m(d, tk_test::random_hermitian_with_norm(rng, d * d, norm), beta);
    const FreeEnergyEstimate f = free_energy(m, d == 3 ? 3 : 4);
    EXPECT_NEAR(f.envelope, norm + std::log(d) / beta, 1e-12);
    EXPECT_LE(std::abs(f.value), f.envelope) << "trial " << trial;
    EXPECT_TRUE(f.within_envelope());
    EXPECT_EQ(f.value, -std::log(f.spectral.radius) / beta);
  }
}

// beta ||h|| = 8 with a window of 3 is far from the asymptotic regime; the
// estimate leaves the envelope and says so.
TEST(FreeEnergy, FlagsEstimateOutsideEnvelope) {
  Rng rng(7);
  for (double bn : {1.0, 2.0, 4.0}) tk_test::random_hermitian_with_norm(rng, 4, bn);
  const ChainModel m(2, tk_test::random_hermitian_with_norm(rng, 4, 8.0), 1.0);
  const FreeEnergyEstimate f = free_energy(m, 3);
  EXPECT_FALSE(f.within_envelope()) << f.value << " vs " << f.envelope;
}

TEST(FreeEnergy, RejectsSmallWindow) { EXPECT_THROW(free_energy(xy_model(1.0), 1), ArgumentError); }

// ---------------------------------------------------------------------------

TEST(GibbsMarginal, ZeroTermMaximallyMixed) {
  for (int k = 1; k <= 3; ++k) {
    const DensityMatrix rho = gibbs_marginal(zero_model(2, 1.0), 4, k);
    EXPECT_EQ(rho.n_sites(), k);
    EXPECT_LT(max_abs(rho.matrix() - DensityMatrix::maximally_mixed(k, 2).matrix()), 1e-13);
  }
}

TEST(GibbsMarginal, RejectsKAtLeastL) {
  EXPECT_THROW(gibbs_marginal(xy_model(1.0), 4, 4), ArgumentError);
  EXPECT_THROW(gibbs_marginal(xy_model(1.0), 4, 7), ArgumentError);
  EXPECT_THROW(gibbs_marginal(xy_model(1.0), 4, 0), ArgumentError);
}

TEST(GibbsMarginal, ChainConsistency) {
  const MarginalResult& m = xy_window10();
  EXPECT_TRUE(m.spectral.converged);
  for (int k = 1; k <= 6; ++k) {
    const DensityMatrix small = marginal_from_eigenvector(m.spectral.eigenvector, k).state;
    const DensityMatrix large = marginal_from_eigenvector(m.spectral.eigenvector, k + 1).state;
    EXPECT_LE(trace_distance(large.first_sites(k).matrix(), small.matrix()), 1e-6) << "k = " << k;
  }
}

TEST(GibbsMarginal, MatchesBruteForceFiniteChain) {
  const DensityMatrix transfer = gibbs_marginal(xy_model(1.0), 10, 3);
  const DensityMatrix brute = gibbs_marginal_bruteforce(xy_model(1.0), 4, 12);
  const double dist = trace_distance(transfer.matrix(), brute.matrix());
  std::printf("[note] ||v - rho_{4,12}||_tr = %.3e\n", dist);
  EXPECT_LE(dist, 1e-4);
}

TEST(GibbsMarginal, IsDensityMatrix) {
  Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const ChainModel m(2, tk_test::random_hermitian(rng, 4), 1.0);
    const MarginalResult r = gibbs_marginal_with_diagnostics(m, 4, 1 + trial % 3);
    EXPECT_NEAR(r.state.matrix().trace().real(), 1.0, 1e-12);
    EXPECT_GE(hermitian_eigenvalues(r.state.matrix())(0), -1e-12);
    EXPECT_LE(r.projection_distance, 1e-8);
  }
}

// ---------------------------------------------------------------------------

TEST(TwoSidedModel, ZeroTerm) {
  const ChainModel folded = two_sided_model(zero_model(2, 1.0));
  EXPECT_EQ(folded.local_dim(), 4);
  EXPECT_EQ(folded.term().rows(), 16);
  EXPECT_EQ(max_abs(folded.term()), 0.0);
}

TEST(TwoSidedModel, Dimensions) {
  const ChainModel folded = two_sided_model(zero_model(3, 1.0));
  EXPECT_EQ(folded.local_dim(), 9);
  EXPECT_EQ(folded.term().rows(), 81);
}

// Folded sites 1..k hold the chain k u ... 1 u 1 d ... k d; summing the
// folded terms reproduces the open chain on those 2k sites up to the
// boundary term h_{k u, k d} of the last fold.
TEST(TwoSidedModel, FoldedHamiltonianIsUnfoldedChain) {
  Rng rng(54);
  const ChainModel m(2, tk_test::random_hermitian(rng, 4), 1.0);
  const int k = 3;
  const ChainModel folded = two_sided_model(m);
  const ComplexMatrix hf = build_interval_hamiltonian(folded, 1, k).matrix();
  const ComplexMatrix chain = permute_sites(hf, 2, 2 * k, unfold_order(k));
  ComplexMatrix expected = interval_hamiltonian(m.term(), 2, 2 * k);
  // rung between the outermost copies: chain sites 1 and 2k
  ComplexMatrix ends = embed_pair(m.term(), 2, 2 * k, 0, 2 * k - 1);
  // -h_{ku, kd} acts as h(u, d) with u the left end, d the right end
  expected -= ends;
  EXPECT_LT(max_abs(chain - expected), 1e-12);
}

// ---------------------------------------------------------------------------

TEST(Derivative, IdentityObservableGivesOne) {
  const ObservableEstimate e = expectation_by_derivative(xy_model(1.0), identity(4), 6);
  EXPECT_NEAR(e.value, 1.0, 1e-8);
}

TEST(Derivative, XyEnergyMatchesTwoSidedRecast) {
  const ChainModel m = xy_model(1.0);
  const double norm = m.h_norm();
  const ObservableEstimate e = expectation_by_derivative(m, m.term() / norm, 10);
  const double derivative_energy = norm * e.value;
  const double recast_energy = two_sided_energy_per_bond(m, 5);
  std::printf("[note] derivative %.12f  recast %.12f  exact %.12f\n", derivative_energy, recast_energy,
              xy_exact_energy(1.0, 1.0));
  EXPECT_NEAR(derivative_energy, recast_energy, 1e-6);
}

// f(s) is even in s, so the forward difference is c s + (round-off)/s with
// c = f''(0)/2 ~ -0.44 here.
TEST(Derivative, SigmaZVanishesBySymmetry) {
  DerivativeOptions opt;
  opt.second_derivative_bound = 1e3;
  const ObservableEstimate e = expectation_by_derivative(xy_model(1.0), kron(pauli::z(), identity(2)), 6, opt);
  std::printf("[note] <sz> ~ %.3e (step %.2e)\n", e.value, e.step);
  EXPECT_NEAR(e.value, 0.0, 1e-8);
}

TEST(Derivative, StepFollowsTolerance) {
  DerivativeOptions opt;
  opt.solver.tol = 1e-10;
  opt.second_derivative_bound = 10.0;
  const ObservableEstimate e = expectation_by_derivative(ising_model(1.0, 1.0), identity(4), 3, opt);
  EXPECT_DOUBLE_EQ(e.step, std::sqrt(2e-10 / 10.0));
  EXPECT_DOUBLE_EQ(e.error_bound, 0.5 * e.step * 10.0 + 2e-10 / e.step);
  EXPECT_EQ(e.base.spectral.iterations, e.perturbed.spectral.iterations);
}

TEST(Derivative, Preconditions) {
  EXPECT_THROW(expectation_by_derivative(xy_model(1.0), 2.0 * identity(4), 4), ArgumentError);
  EXPECT_THROW(expectation_by_derivative(xy_model(1.0), identity(2), 4), ArgumentError);
  DerivativeOptions opt;
  opt.epsilon = 0.0;
  EXPECT_THROW(expectation_by_derivative(xy_model(1.0), identity(4), 4, opt), ArgumentError);
  ComplexMatrix skew = ComplexMatrix::Zero(4, 4);
  skew(0, 1) = 0.5;
  EXPECT_THROW(expectation_by_derivative(xy_model(1.0), skew, 4), NotHermitianError);
}

// ---------------------------------------------------------------------------

TEST(Entropy, Examples) {
  ComplexMatrix pure = ComplexMatrix::Zero(2, 2);
  pure(0, 0) = 1.0;
  EXPECT_NEAR(entropy(DensityMatrix(pure, 1, 2)), 0.0, 1e-15);
  EXPECT_NEAR(entropy(DensityMatrix::maximally_mixed(1, 2), LogBase::two), 1.0, 1e-14);
  EXPECT_NEAR(entropy(DensityMatrix::maximally_mixed(2, 2), LogBase::two), 2.0, 1e-14);
  EXPECT_NEAR(entropy(DensityMatrix::maximally_mixed(2, 2)), 2.0 * kLog2, 1e-14);
  EXPECT_NEAR(entropy(bell_state()), 0.0, 1e-13);
}

TEST(MutualInformation, ProductStateIsZero) {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const DensityMatrix a = random_state(rng, 1);
    const DensityMatrix b = random_state(rng, 2);
    const DensityMatrix ab(kron(a.matrix(), b.matrix()), 3, 2);
    EXPECT_NEAR(mutual_information(ab, 1), 0.0, 1e-10);
    EXPECT_NEAR(mutual_information(ab, {1}, {2, 3}), 0.0, 1e-10);
  }
}

TEST(MutualInformation, BellStateIsTwoBits) {
  EXPECT_NEAR(mutual_information(bell_state(), 1, LogBase::two), 2.0, 1e-12);
}

TEST(MutualInformation, InvalidPartition) {
  const DensityMatrix rho = DensityMatrix::maximally_mixed(3, 2);
  EXPECT_THROW(mutual_information(rho, 0), ArgumentError);
  EXPECT_THROW(mutual_information(rho, 3), ArgumentError);
  EXPECT_THROW(mutual_information(rho, {1}, {1, 2}), ArgumentError);
  EXPECT_THROW(mutual_information(rho, {}, {2}), ArgumentError);
  EXPECT_THROW(mutual_information(rho, {1}, {4}), ArgumentError);
}

TEST(MutualInformation, XyDecaysWithDistance) {
  const DensityMatrix& rho = xy_two_sided8();
  double prev = INFINITY;
  for (int dist = 1; dist <= 5; ++dist) {
    const auto [a, c] = pair_at_distance(rho.n_sites(), dist);
    const double mi = mutual_information(rho, {a}, {c});
    std::printf("[note] I(%d:%d) = %.6e\n", a, c, mi);
    EXPECT_LT(mi, prev) << "distance " << dist;
    prev = mi;
  }
}

TEST(ConditionalMutualInformation, ProductStateIsZero) {
  Rng rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    const DensityMatrix a = random_state(rng, 1);
    const DensityMatrix b = random_state(rng, 1);
    const DensityMatrix c = random_state(rng, 1);
    const DensityMatrix abc(kron(kron(a.matrix(), b.matrix()), c.matrix()), 3, 2);
    EXPECT_NEAR(conditional_mutual_information(abc, {1}, {2}, {3}), 0.0, 1e-10);
    EXPECT_NEAR(conditional_mutual_information(abc, {1}, {3}), 0.0, 1e-10);
  }
}

TEST(ConditionalMutualInformation, InvalidPartition) {
  const DensityMatrix rho = DensityMatrix::maximally_mixed(3, 2);
  EXPECT_THROW(conditional_mutual_information(rho, {1}, {1}, {3}), ArgumentError);
  EXPECT_THROW(conditional_mutual_information(rho, {2}, {2}), ArgumentError);
  EXPECT_THROW(conditional_mutual_information(rho, {1, 2}, {3}), ArgumentError);
  EXPECT_THROW(conditional_mutual_information(rho, {1}, {}, {3}), ArgumentError);
}

TEST(ConditionalMutualInformation, XyDecaysWithDistance) {
  const DensityMatrix& rho = xy_two_sided8();
  double prev = INFINITY;
  for (int dist = 1; dist <= 5; ++dist) {
    const auto [a, c] = pair_at_distance(rho.n_sites(), dist);
    const double cmi = conditional_mutual_information(rho, {a}, {c});
    std::printf("[note] I(%d:%d|rest) = %.6e\n", a, c, cmi);
    EXPECT_LT(cmi, prev) << "distance " << dist;
    prev = cmi;
  }
}

TEST(Entropic, PositivityOnRandomStates) {
  Rng rng(57);
  for (int trial = 0; trial < 100; ++trial) {
    const DensityMatrix rho = random_state(rng, 3);
    EXPECT_GE(mutual_information(rho, 1), -1e-10);
    EXPECT_GE(mutual_information(rho, {1}, {3}), -1e-10);
    EXPECT_GE(conditional_mutual_information(rho, {1}, {2}, {3}), -1e-8);
  }
}

TEST(Entropic, PositivityOnComputedMarginals) {
  const DensityMatrix& two = xy_two_sided8();
  const DensityMatrix one = xy_window10().state.first_sites(6);
  for (const DensityMatrix* rho : {&two, &one}) {
    for (int a = 1; a <= rho->n_sites(); ++a) {
      for (int c = a + 1; c <= rho->n_sites(); ++c) {
        EXPECT_GE(mutual_information(*rho, {a}, {c}), -1e-10);
        if (rho->n_sites() > 2) {
          EXPECT_GE(conditional_mutual_information(*rho, {a}, {c}), -1e-8);
        }
      }
    }
  }
}

TEST(PairAtDistance, Bounds) {
  EXPECT_EQ(pair_at_distance(8, 1), std::make_pair(2, 3));
  EXPECT_EQ(pair_at_distance(8, 6), std::make_pair(2, 8));
  EXPECT_THROW(pair_at_distance(8, 7), ArgumentError);
  EXPECT_THROW(pair_at_distance(8, 0), ArgumentError);
}

// ---------------------------------------------------------------------------

// log(Z_{N+1}/Z_N) approaches -beta f as N grows. At beta = 1 the XY
// sequence is at round-off by N = 9, so the colder chain is used.
TEST(RatioProperty, ConvergesToFreeEnergy) {
  const double beta = 3.0;
  const ChainModel m = xy_model(beta);
  const double f = xy_exact(beta, 1.0);
  double prev_log_z = exact_diag_free_energy(m, 4).log_Z;
  double prev_err = INFINITY;
  double last_ratio = 0.0;
  for (int n = 4; n <= 12; ++n) {
    const double log_z = exact_diag_free_energy(m, n + 1).log_Z;
    last_ratio = log_z - prev_log_z;
    const double err = std::abs(last_ratio + f);
    std::printf("[note] N = %d  |log(Z_{N+1}/Z_N) + f| = %.3e\n", n, err);
    EXPECT_LT(err, prev_err) << "N = " << n;
    prev_err = err;
    prev_log_z = log_z;
  }
  EXPECT_NEAR(-last_ratio / beta, free_energy(m, 10).value, 1e-3);
}
