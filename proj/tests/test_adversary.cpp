#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qbc/adversary.hpp"

using namespace qbc;

namespace {

std::vector<SpinLabel> random_labels(RandomStream& r, std::size_t n) {
  std::vector<SpinLabel> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(kAllSpinLabels[r.uniform_index(4)]);
  return out;
}

std::array<double, 2> real_state(SpinLabel s) {
  const auto v = spin_state(s).amplitudes();
  return {v(0).real(), v(1).real()};
}

}  // namespace

TEST(FlipDeclarations, ExactlyKFalseForTargetAndMMinusKForOther) {
  RandomStream r(1);
  const std::vector<SpinLabel> labels = random_labels(r, 20);
  std::vector<std::size_t> untested;
  for (std::size_t i = 0; i < 20; i += 2) untested.push_back(i);
  for (int k = 0; k <= 10; ++k) {
    for (Bit target = 0; target < 2; ++target) {
      const auto decls = flip_declarations(target, k, untested, labels, r);
      EXPECT_EQ(false_declarations(target, decls, labels), k);
      EXPECT_EQ(false_declarations(static_cast<Bit>(1 - target), decls, labels), 10 - k);
    }
  }
  EXPECT_THROW(flip_declarations(0, 11, untested, labels, r), std::invalid_argument);
}

TEST(FlipAttack, ExactPassProbabilityMatchesProductOracle) {
  RandomStream r(2);
  const std::vector<SpinLabel> labels = random_labels(r, 12);
  std::vector<std::size_t> untested{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  for (int k = 0; k <= 6; ++k) {
    const auto decls = flip_declarations(1, k, untested, labels, r);
    // Oracle: for each particle, B measures in the declared basis for bit 1.
    // The attack claims the truth where that basis is right and a uniform
    // eigenstate of the declared basis otherwise.
    std::vector<std::array<double, 2>> states;
    std::vector<std::vector<std::pair<double, std::array<double, 2>>>> claims;
    for (const Declaration& d : decls) {
      states.push_back(real_state(labels[d.particle]));
      const MeasurementBasis b = d.basis_for(1);
      if (b == basis_of(labels[d.particle])) {
        claims.push_back({{1.0, real_state(labels[d.particle])}});
      } else {
        claims.push_back({{0.5, real_state(label_for(b, 0))}, {0.5, real_state(label_for(b, 1))}});
      }
    }
    const double expected = oracle::reveal_pass_product(states, claims);
    EXPECT_NEAR(expected, std::ldexp(1.0, -k), 1e-13);
    const auto claim = classical_flip_attack(decls, labels, 1, GuessRule::UniformRandom, r);
    EXPECT_NEAR(reveal_pass_probability(1, claim, decls, labels), expected, 1e-13);
  }
}

TEST(FlipAttack, ClaimOutsideDeclaredBasisNeverPasses) {
  const std::vector<SpinLabel> labels{SpinLabel::Up};
  const std::vector<Declaration> decls{{0, MeasurementBasis::Z}};
  EXPECT_EQ(reveal_pass_probability(0, std::vector<SpinLabel>{SpinLabel::Left}, decls, labels), 0.0);
  EXPECT_EQ(reveal_pass_probability(0, std::vector<SpinLabel>{}, decls, labels), 0.0);
}

TEST(Entangled, CommitStateAndAncillaStatistics) {
  const Complex a(std::sqrt(0.3), 0.0), b(0.0, std::sqrt(0.7));
  const StateVector joint = entangled_commit(a, b);
  const auto p = born_probabilities(joint, MeasurementBasis::Z, 1);
  EXPECT_NEAR(p[0], 0.3, 1e-15);
  // The committed qubit alone is a classical mixture, so its reduced state has purity < 1.
  EXPECT_NEAR(partial_trace(joint, {0}).purity(), 0.3 * 0.3 + 0.7 * 0.7, 1e-12);
  RandomStream r(3);
  const auto rev = reveal_entangled(joint, r);
  const auto after = born_probabilities(rev.post_state, MeasurementBasis::Z, 0);
  EXPECT_NEAR(after[rev.bit], 1.0, 1e-12);
  EXPECT_THROW(entangled_commit(1.0, 1.0), std::invalid_argument);
}

TEST(ToyProtocol, HonestOpeningsAreAccepted) {
  CVector plus(2);
  plus << 1, 1;
  const auto toy = ToyBCProtocol::from_pure(StateVector::basis(1, 0), StateVector::normalized(plus));
  for (Bit b = 0; b < 2; ++b) EXPECT_NEAR(toy.accept_probability(b, toy.honest_opening(b)), 1.0, 1e-12);
  EXPECT_NEAR(toy.accept_probability(1, toy.honest_opening(0)), 0.5, 1e-12);
  EXPECT_THROW(ToyBCProtocol(DensityMatrix::maximally_mixed(1), DensityMatrix::maximally_mixed(2)),
               std::invalid_argument);
}

TEST(Purification, ZeroVersusPlusMatchesBruteForceOracle) {
  CVector plus(2);
  plus << 1, 1;
  const auto toy = ToyBCProtocol::from_pure(StateVector::basis(1, 0), StateVector::normalized(plus));
  const auto attack = purification_attack(toy);
  const double s = 1.0 / std::sqrt(2.0);
  const double brute = oracle::brute_force_cheat_sum({1.0, 0.0}, {s, s});
  EXPECT_NEAR(attack.p_sum(), 1.0 + s, 1e-12);
  EXPECT_NEAR(brute, 1.0 + s, 1e-6);
  EXPECT_NEAR(attack.p_sum(), brute, 1e-6);
  EXPECT_NEAR(attack.p0, attack.p1, 1e-12);
  EXPECT_TRUE(is_unitary(attack.steering));
}

TEST(Purification, RandomQubitPairsMatchBruteForceOracle) {
  RandomStream r(4);
  for (int trial = 0; trial < 3; ++trial) {
    const double th = r.uniform() * std::acos(-1.0) / 2, ph = r.uniform() * 6.28;
    std::vector<oracle::cd> s1{std::cos(th), std::polar(std::sin(th), ph)};
    CVector v(2);
    v << s1[0], s1[1];
    const auto toy = ToyBCProtocol::from_pure(StateVector::basis(1, 0), StateVector(v));
    const double brute = oracle::brute_force_cheat_sum({1.0, 0.0}, s1, 12);
    EXPECT_NEAR(purification_attack(toy).p_sum(), brute, 1e-6);
    EXPECT_NEAR(numeric_cheat_sum(toy).p_sum, brute, 1e-6);
  }
}

TEST(Purification, MixedCommitStatesReachOnePlusRootFidelity) {
  RandomStream r(5);
  for (int trial = 0; trial < 5; ++trial) {
    CMatrix m0 = CMatrix::Zero(4, 4), m1 = CMatrix::Zero(4, 4);
    for (int k = 0; k < 2; ++k) {
      CVector a(4), b(4);
      for (int i = 0; i < 4; ++i) {
        a(i) = Complex(r.uniform() - 0.5, r.uniform() - 0.5);
        b(i) = Complex(r.uniform() - 0.5, r.uniform() - 0.5);
      }
      m0 += a * a.adjoint();
      m1 += b * b.adjoint();
    }
    const ToyBCProtocol toy(DensityMatrix(m0 / m0.trace().real()), DensityMatrix(m1 / m1.trace().real()));
    const auto res = purification_attack(toy);
    EXPECT_NEAR(res.p_sum(), 1.0 + std::sqrt(res.fidelity), 1e-9);
    EXPECT_NEAR(numeric_cheat_sum(toy).p_sum, res.p_sum(), 1e-6);
  }
}

TEST(Purification, EndpointsOrthogonalAndIdentical) {
  const auto ortho = ToyBCProtocol::from_pure(StateVector::basis(1, 0), StateVector::basis(1, 1));
  EXPECT_NEAR(purification_attack(ortho).p_sum(), 1.0, 1e-12);
  const auto same = ToyBCProtocol::from_pure(StateVector::basis(1, 0), StateVector::basis(1, 0));
  EXPECT_NEAR(purification_attack(same).p_sum(), 2.0, 1e-12);
}

TEST(Strategy, Validation) {
  ProtocolParams p;
  EXPECT_THROW(validate_strategy(ClassicalFlipStrategy{17, 1}, p), std::invalid_argument);
  EXPECT_THROW(validate_strategy(EntangledCommitStrategy{1.0, 1.0}, p), std::invalid_argument);
  EXPECT_NO_THROW(validate_strategy(ClassicalFlipStrategy{16, 0}, p));
  EXPECT_EQ(strategy_name(Strategy{EntangledCommitStrategy{}}), "entangled-commit");
}
