#include <gtest/gtest.h>

#include "ethtrade/measures.hpp"
#include "ethtrade/spectral.hpp"
#include "oracles.hpp"

using namespace ethtrade;

namespace {

void expect_quality(int n, double g, double h) {
  const auto ham = build_hamiltonian(ChainSpec{n, g, h});
  const Spectrum s = diagonalize(ham);
  const auto q = assess(ham, s);
  EXPECT_LE(q.max_residual, 1e-9 * q.spectral_norm);
  EXPECT_LE(q.orthonormality, 1e-10);
  for (Eigen::Index k = 1; k < s.energies.size(); ++k) EXPECT_LE(s.energies[k - 1], s.energies[k]);
}

}  // namespace

TEST(Diagonalize, TwoSiteField) {
  const Spectrum s = diagonalize(ChainSpec{2, 0.0, 1.0});
  const double expect[] = {-4, 0, 2, 2};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(s.energy(k), expect[k], 1e-14);
}

TEST(Diagonalize, InvariantsHold) {
  expect_quality(2, 1.05, 0.1);
  expect_quality(6, 1.05, 0.1);
  expect_quality(9, 1.05, 0.0);
  expect_quality(10, 0.3, 0.7);
}

TEST(Diagonalize, TraceAndReconstruction) {
  const auto ham = build_hamiltonian(ChainSpec{6, 1.05, 0.1});
  const Spectrum s = diagonalize(ham);
  EXPECT_NEAR(s.energies.sum(), ham.entries.trace(), 1e-9 * std::max(1.0, ham.entries.cwiseAbs().sum()));
  const Matrix rebuilt = s.vectors * s.energies.asDiagonal() * s.vectors.transpose();
  EXPECT_LE(max_abs(rebuilt - ham.entries), 1e-9);
}

TEST(Ensemble, CanonicalLimits) {
  const Spectrum& s = oracle::spectrum(6, 1.05, 0.1);
  const auto hot = make_ensemble(Canonical{0.0}, s);
  for (std::size_t i = 0; i < s.dim(); ++i) EXPECT_DOUBLE_EQ(hot.weight(i), 1.0 / 64);
  const auto cold = make_ensemble(Canonical{1e6}, s);
  EXPECT_DOUBLE_EQ(cold.weight(0), 1.0);
  EXPECT_EQ(cold.weights.tail(63).maxCoeff(), 0.0);
  const auto neg = make_ensemble(Canonical{-1e6}, s);
  EXPECT_DOUBLE_EQ(neg.weight(63), 1.0);
}

TEST(Ensemble, CanonicalShiftInvariant) {
  const Spectrum& s = oracle::spectrum(6, 1.05, 0.1);
  const Vector base = canonical_weights(s.energies, 0.7);
  const Vector shifted = canonical_weights((s.energies.array() + 123.456).matrix(), 0.7);
  EXPECT_LE((base - shifted).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(base.sum(), 1.0, 1e-12);
}

TEST(Ensemble, MicrocanonicalSupportAndNormalization) {
  const Spectrum& s = oracle::spectrum(8, 1.05, 0.1);
  const auto shell = energy_shell(s, 0.0, 1.6);
  const auto mc = make_ensemble(Microcanonical{shell}, s);
  EXPECT_NEAR(mc.weights.sum(), 1.0, 1e-12);
  for (std::size_t i = 0; i < s.dim(); ++i) EXPECT_EQ(mc.weight(i) > 0.0, shell.contains(i));
  EXPECT_THROW(make_ensemble(Microcanonical{EnergyShell{}}, s), Error);
}

TEST(Ensemble, UniformAndPure) {
  const Spectrum& s = oracle::spectrum(6, 1.05, 0.1);
  const auto u = make_ensemble(Uniform{}, s);
  EXPECT_NEAR(u.weights.sum(), 1.0, 1e-12);
  const auto p = make_ensemble(Pure{5}, s);
  EXPECT_EQ(p.weights.sum(), 1.0);
  EXPECT_EQ(p.weight(5), 1.0);
  EXPECT_THROW(make_ensemble(Pure{64}, s), Error);
}

TEST(Shell, ClosedIntervalMembership) {
  const Spectrum& s = oracle::spectrum(6, 1.05, 0.1);
  const double span = s.max_energy() - s.min_energy();
  const auto all = energy_shell(s, 0.5 * (s.max_energy() + s.min_energy()), span);
  EXPECT_EQ(all.size(), s.dim());
  const double gap = s.energy(1) - s.energy(0);
  const auto ground = energy_shell(s, s.energy(0), gap);
  EXPECT_EQ(ground.members, std::vector<std::size_t>{0});
  // both endpoints round onto E_3: an open interval would be empty
  const auto edge = energy_shell(s, s.energy(3), 1e-300);
  EXPECT_TRUE(edge.contains(3));
  try {
    energy_shell(s, s.max_energy() + 10.0, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShellEmpty);
  }
  EXPECT_THROW(energy_shell(s, 0.0, 0.0), Error);
}

TEST(Shell, MatchesLinearScanAtN12) {
  const Spectrum& s = oracle::spectrum(12, 1.05, 0.1);
  const double w = 0.2 * 12;
  const auto shell = energy_shell(s, 0.0, w);
  std::vector<std::size_t> scan;
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (std::abs(s.energy(i)) <= w / 2) scan.push_back(i);
  EXPECT_EQ(shell.members, scan);
}

TEST(Beta, RoundTrips) {
  const Spectrum& s10 = oracle::spectrum(10, 1.05, 0.1);
  EXPECT_NEAR(solve_beta_for_energy(s10, canonical_energy(s10, 0.1)), 0.1, 1e-8);
  EXPECT_NEAR(solve_beta_for_energy(s10, s10.energies.mean()), 0.0, 1e-9);
  EXPECT_GT(solve_beta_for_energy(s10, s10.energies.mean() - 0.5), 0.0);
  EXPECT_LT(solve_beta_for_energy(s10, s10.energies.mean() + 0.5), 0.0);

  const Spectrum& s12 = oracle::spectrum(12, 1.05, 0.1);
  const auto can = make_ensemble(Canonical{0.1}, s12);
  const double e = mean_energy(s12, can);
  const double beta = solve_beta_for_energy(s12, e);
  EXPECT_NEAR(canonical_energy(s12, beta), e, 1e-8);
  EXPECT_NEAR(beta, 0.1, 1e-8);
}

TEST(Beta, BracketFailure) {
  const Spectrum& s = oracle::spectrum(6, 1.05, 0.1);
  // just above the ground state needs beta far beyond a tiny bracket
  try {
    solve_beta_for_energy(s, s.min_energy() + 1e-3, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConvergenceFailure);
  }
  EXPECT_THROW(solve_beta_for_energy(s, s.max_energy() + 1.0), Error);
}

TEST(Beta, EnergyStrictlyDecreasing) {
  const Spectrum& s = oracle::spectrum(10, 1.05, 0.1);
  double prev = canonical_energy(s, -5.0);
  for (int k = -99; k <= 100; ++k) {
    const double e = canonical_energy(s, 0.05 * k);
    EXPECT_LT(e, prev) << "beta=" << 0.05 * k;
    prev = e;
  }
}

TEST(Histogram, CountsAndMass) {
  const Spectrum& s = oracle::spectrum(6, 1.05, 0.1);
  const auto one = spectral_histogram(s, nullptr, 1);
  ASSERT_EQ(one.values.size(), 1u);
  EXPECT_EQ(one.values[0], 64.0);
  const auto u = make_ensemble(Uniform{}, s);
  EXPECT_NEAR(spectral_histogram(s, &u, 1).values[0], 1.0, 1e-14);
  const auto many = spectral_histogram(s, nullptr, 17);
  double total = 0;
  for (double v : many.values) total += v;
  EXPECT_EQ(total, 64.0);
  EXPECT_THROW(spectral_histogram(s, nullptr, 0), Error);
}

TEST(Histogram, WeightedMeanMatchesEnsembleAtN12) {
  const Spectrum& s = oracle::spectrum(12, 1.05, 0.1);
  const auto can = make_ensemble(Canonical{0.1}, s);
  const auto hist = spectral_histogram(s, &can, 60);
  double mass = 0, energy = 0;
  for (std::size_t b = 0; b < hist.values.size(); ++b) {
    mass += hist.values[b];
    energy += hist.energy_sums[b];
  }
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_NEAR(energy, mean_energy(s, can), 1e-9);
}
