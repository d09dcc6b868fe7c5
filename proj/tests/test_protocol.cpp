#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qbc/session.hpp"

using namespace qbc;

namespace {

ProtocolParams small_params() {
  ProtocolParams p;
  p.m = 2;
  p.n0 = 8;
  return p;
}

}  // namespace

TEST(Params, ValidationNamesTheField) {
  ProtocolParams p;
  p.n0 = 63;
  try {
    p.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("protocol.N0"), std::string::npos);
  }
  p = {};
  p.knobs.flip_probability = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.commit_mode = CommitBitMode::Fixed;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.fixed_bits.assign(128, 0);
  EXPECT_NO_THROW(p.validate());
}

TEST(Oracle, IdealOpenReturnsCommittedBit) {
  IdealBCCCOracle o;
  RandomStream r(1);
  o.commit(0, 1);
  o.commit(1, 0);
  EXPECT_TRUE(o.ideal());
  EXPECT_EQ(o.open(0, r), 1);
  EXPECT_EQ(o.open(1, r), 0);
  EXPECT_FALSE(o.leak(0, r).has_value());
  EXPECT_EQ(o.opened_count(), 2u);
  EXPECT_THROW(o.commit(0, 1), std::logic_error);
  EXPECT_THROW(o.commit(2, 2), std::invalid_argument);
  EXPECT_THROW(o.open(5, r), std::out_of_range);
}

TEST(Oracle, KnobsFlipAndLeak) {
  IdealBCCCOracle o({1.0, 1.0});
  RandomStream r(1);
  o.commit(0, 1);
  EXPECT_EQ(o.open(0, r), 0);
  EXPECT_EQ(o.leak(0, r), Bit{1});
}

TEST(Encoding, DefaultTableAndBijection) {
  const EncodingRule rule;
  EXPECT_EQ(rule.encode(0, 0), SpinLabel::Up);
  EXPECT_EQ(rule.encode(0, 1), SpinLabel::Down);
  EXPECT_EQ(rule.encode(1, 0), SpinLabel::Left);
  EXPECT_EQ(rule.encode(1, 1), SpinLabel::Right);
  for (SpinLabel s : kAllSpinLabels) EXPECT_EQ(rule.encode(rule.decode(s)), s);
  EXPECT_THROW(EncodingRule({SpinLabel::Up, SpinLabel::Up, SpinLabel::Left, SpinLabel::Right}), std::invalid_argument);
}

TEST(Challenge, SizeSortedAndUniform) {
  ProtocolParams p = small_params();
  RandomStream r(5);
  std::vector<std::size_t> hits(8, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto c = challenge(p, r);
    ASSERT_EQ(c.size(), 6u);
    ASSERT_TRUE(std::is_sorted(c.begin(), c.end()));
    ASSERT_EQ(std::adjacent_find(c.begin(), c.end()), c.end());
    for (auto i2 : c) ++hits[i2];
  }
  // Each particle is tested with probability 6/8.
  std::vector<std::size_t> untested(8);
  for (int i = 0; i < 8; ++i) untested[i] = n - hits[i];
  EXPECT_LT(oracle::chi_square(untested, std::vector<double>(8, 1.0 / 8.0)), 24.3);  // 7 dof, 99.9%
}

TEST(CommitPhase, SetsTcFromConfirmations) {
  ProtocolParams p = small_params();
  Schedule s;
  s.sites = default_layout(2);
  s.add("A1", "B1", s.find_site("A1")->at(0), s.find_site("B1")->at(1), std::string(kCommitPayload));
  s.add("A2", "B2", s.find_site("A2")->at(0), s.find_site("B2")->at(1), std::string(kCommitPayload));
  IdealBCCCOracle o;
  const std::vector<Bit> bits(16, 1);
  const auto res = commit_phase(bits, o, p, s);
  EXPECT_EQ(res.stage, SessionStage::AwaitingSpins);
  EXPECT_NEAR(res.t_c, 5.0, 1e-12);
  EXPECT_EQ(o.size(), 16u);
  EXPECT_THROW(commit_phase(std::vector<Bit>(3, 0), o, p, s), std::invalid_argument);
}

TEST(CommitPhase, AbortsOnCausalViolation) {
  ProtocolParams p = small_params();
  Schedule s;
  s.sites = default_layout(1);
  s.add("B1", "B0", s.find_site("B1")->at(0), s.find_site("B0")->at(0.5), "fast");
  IdealBCCCOracle o;
  const auto res = commit_phase(std::vector<Bit>(16, 0), o, p, s);
  EXPECT_EQ(res.stage, SessionStage::Aborted);
  EXPECT_EQ(res.violations.size(), 1u);
  EXPECT_EQ(o.size(), 0u);
}

TEST(Spins, EmissionMustFollowTc) {
  const std::vector<Bit> bits{0, 1, 1, 0};
  EXPECT_THROW(send_spin_sequence(bits, EncodingRule{}, Event(1.0, Vec3::Zero()), 1.0), CausalError);
  const auto states = send_spin_sequence(bits, EncodingRule{}, Event(1.5, Vec3::Zero()), 1.0);
  ASSERT_EQ(states.size(), 2u);
  EXPECT_NEAR(std::norm(states[1].inner(spin_state(SpinLabel::Left))), 1.0, 1e-15);
}

TEST(Verify, TestedRevealsAndMissingReveal) {
  RandomStream r(2);
  const std::vector<Bit> bits{0, 0, 1, 1, 1, 0};
  const auto stored = send_spin_sequence(bits, EncodingRule{});
  std::map<std::size_t, BitPair> rev{{0, {0, 0}}, {2, {1, 0}}};
  const std::vector<std::size_t> subset{0, 2};
  EXPECT_TRUE(verify_tested(subset, rev, stored, EncodingRule{}, r).accepted());
  rev[2] = {1, 1};  // wrong outcome in the right basis: always caught
  const auto bad = verify_tested(subset, rev, stored, EncodingRule{}, r);
  EXPECT_EQ(bad.outcome, CheckResult::Outcome::Reject);
  EXPECT_EQ(*bad.index, 2u);
  rev.erase(0);
  EXPECT_EQ(verify_tested(subset, rev, stored, EncodingRule{}, r).outcome, CheckResult::Outcome::Abort);
}

TEST(Verify, HonestRevealPassesAndWrongLengthRejects) {
  RandomStream r(3);
  const std::vector<SpinLabel> labels{SpinLabel::Up, SpinLabel::Right, SpinLabel::Left};
  std::vector<StateVector> stored;
  for (SpinLabel s : labels) stored.push_back(spin_state(s));
  const std::vector<std::size_t> untested{0, 1, 2};
  for (Bit a = 0; a < 2; ++a) {
    const auto decls = make_declarations(a, untested, labels);
    EXPECT_EQ(false_declarations(a, decls, labels), 0);
    EXPECT_EQ(false_declarations(static_cast<Bit>(1 - a), decls, labels), 3);
    EXPECT_TRUE(verify_reveal(a, labels, decls, stored, r).accepted());
    const std::vector<SpinLabel> short_claim(labels.begin(), labels.begin() + 2);
    EXPECT_EQ(verify_reveal(a, short_claim, decls, stored, r).reason, "claim length differs from declarations");
    // Claiming the other bit with the true labels names labels outside the declared basis.
    EXPECT_FALSE(verify_reveal(static_cast<Bit>(1 - a), labels, decls, stored, r).accepted());
  }
}

TEST(Session, HonestSessionAcceptsAndRecordsStages) {
  RandomStream r(10);
  const SessionTranscript tr = run_session(HonestStrategy{Bit{1}}, ProtocolParams{}, SessionScenario{}, r);
  EXPECT_TRUE(tr.accepted());
  EXPECT_EQ(tr.revealed_bit, Bit{1});
  EXPECT_EQ(tr.committed_bit, Bit{1});
  EXPECT_EQ(tr.challenge.size(), 48u);
  EXPECT_EQ(tr.declarations.size(), 16u);
  EXPECT_EQ(tr.oracle_openings, 96u);
  EXPECT_EQ(tr.suspended_commitments, 32u);
  EXPECT_TRUE(tr.violations.empty());
  EXPECT_GT(tr.t_r, tr.t_c);
  ASSERT_TRUE(tr.schedule.commitment_point.has_value());
  std::vector<std::string> names;
  for (const auto& s : tr.stages) names.push_back(s.stage);
  EXPECT_EQ(names, (std::vector<std::string>{"commit", "spins", "challenge", "tested-verify", "declarations",
                                             "reveal-verify"}));
}

TEST(Session, SpinsLeaveAfterTc) {
  RandomStream r(11);
  const SessionTranscript tr = run_session(HonestStrategy{}, ProtocolParams{}, SessionScenario{}, r);
  for (const auto& m : tr.schedule.messages) {
    if (m.payload.rfind("spins", 0) == 0) EXPECT_GT(m.emit.t, tr.t_c);
  }
  // Commitments reach B1 (x=2) and B2 (x=4) at t = 1; light from there reaches B0 by 1+2 and 1+4.
  EXPECT_NEAR(tr.t_c, 5.0, 1e-12);
}

TEST(Session, SameStreamSameTranscript) {
  RandomStream a(12), b(12);
  const auto ta = run_session(HonestStrategy{}, ProtocolParams{}, SessionScenario{}, a);
  const auto tb = run_session(HonestStrategy{}, ProtocolParams{}, SessionScenario{}, b);
  EXPECT_EQ(ta.commitment_bits, tb.commitment_bits);
  EXPECT_EQ(ta.challenge, tb.challenge);
  EXPECT_EQ(ta.revealed_bit, tb.revealed_bit);
}

TEST(Session, InjectedSuperluminalRelayAborts) {
  SessionScenario sc;
  sc.inject_superluminal = true;
  RandomStream r(13);
  const SessionTranscript tr = run_session(HonestStrategy{}, ProtocolParams{}, sc, r);
  EXPECT_EQ(tr.verdict, Verdict::Abort);
  EXPECT_EQ(tr.failed_stage, "commit");
  ASSERT_EQ(tr.violations.size(), 1u);
  EXPECT_EQ(tr.violations[0].kind, Violation::Kind::Superluminal);
  EXPECT_EQ(tr.schedule.messages[*tr.violations[0].message_id].payload, "confirm[pair 1]");
}

TEST(Session, SuspensionRoundsDelayReveal) {
  ProtocolParams p;
  p.suspension_rounds = 3;
  RandomStream r(14);
  const SessionTranscript tr = run_session(HonestStrategy{}, p, SessionScenario{}, r);
  EXPECT_TRUE(tr.accepted());
  const Message& reveal = tr.schedule.messages[*tr.reveal_message];
  EXPECT_NEAR(reveal.emit.t - tr.schedule.commitment_point->t, 4.0, 1e-12);
}

TEST(Session, FlippingOracleBreaksCompleteness) {
  ProtocolParams p;
  p.knobs.flip_probability = 1.0;
  RandomStream r(15);
  const SessionTranscript tr = run_session(HonestStrategy{}, p, SessionScenario{}, r);
  EXPECT_EQ(tr.verdict, Verdict::Reject);
  EXPECT_EQ(tr.failed_stage, "tested-verify");
}

TEST(Session, FixedCommitBits) {
  ProtocolParams p = small_params();
  p.commit_mode = CommitBitMode::Fixed;
  p.fixed_bits = {0, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1, 1};
  RandomStream r(16);
  const SessionTranscript tr = run_session(HonestStrategy{}, p, SessionScenario{}, r);
  EXPECT_EQ(tr.commitment_bits, p.fixed_bits);
  EXPECT_EQ(tr.sent_labels[1], SpinLabel::Down);
  EXPECT_TRUE(tr.accepted());
}
