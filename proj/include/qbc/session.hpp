#pragma once

// End-to-end execution of one reduction session on the default site layout.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qbc/adversary.hpp"
#include "qbc/protocol.hpp"
#include "qbc/spacetime.hpp"

namespace qbc {

struct SessionScenario {
  int pairs = 2;
  double separation = 1.0;
  Vec3 b0_velocity = Vec3::Zero();
  double stage_gap = 1.0;
  bool inject_superluminal = false;  // first confirmation relay travels at 2c
  EncodingRule rule;
};

enum class Verdict { Accept, Reject, Abort };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Accept: return "accept";
    case Verdict::Reject: return "reject";
    case Verdict::Abort: return "abort";
  }
  return "?";
}

struct StageRecord {
  std::string stage;
  Event at;
  std::string detail;
};

struct LeakRecord {
  std::size_t commitment = 0;
  Bit bit = 0;
};

struct SessionTranscript {
  std::string strategy;
  std::vector<Bit> commitment_bits;
  std::vector<SpinLabel> sent_labels;
  std::vector<std::size_t> challenge;
  std::map<std::size_t, BitPair> tested_reveals;
  std::optional<CheckResult> tested_check;
  std::vector<Declaration> declarations;
  std::optional<Bit> committed_bit;  // bit every declaration is true for, if any
  std::optional<Bit> revealed_bit;
  std::vector<SpinLabel> reveal_claim;
  std::optional<CheckResult> reveal_check;
  std::optional<Verdict> verdict;
  std::string failed_stage;
  std::vector<LeakRecord> leaks;
  std::optional<int> ancilla_outcome;
  std::size_t suspended_commitments = 0;
  std::size_t oracle_openings = 0;

  Schedule schedule;
  std::vector<Violation> violations;
  std::vector<StageRecord> stages;
  double t_c = 0.0;
  double t_r = 0.0;
  std::optional<std::size_t> reveal_message;

  bool accepted() const { return verdict == Verdict::Accept; }
};

namespace detail {

inline std::string bob_site(int j) { return "B" + std::to_string(j); }

}  // namespace detail

/// commit -> spins -> challenge -> tested verify -> declarations -> suspension -> reveal -> verdict.
inline SessionTranscript run_session(const Strategy& alice, const ProtocolParams& params,
                                     const SessionScenario& scenario, RandomStream& rng) {
  params.validate();
  validate_strategy(alice, params);
  if (std::holds_alternative<PurificationAttackStrategy>(alice)) {
    throw std::invalid_argument("run_session: the purification attack targets ToyBCProtocol, not the reduction");
  }

  SessionTranscript tr;
  tr.strategy = strategy_name(alice);
  Schedule& sched = tr.schedule;
  sched.sites = default_layout(scenario.pairs, scenario.separation, scenario.b0_velocity);
  const double gap = scenario.stage_gap;
  const std::size_t n0 = static_cast<std::size_t>(params.n0);

  auto stage = [&](std::string name, const Event& at, std::string detail = {}) {
    tr.stages.push_back({std::move(name), at, std::move(detail)});
  };
  auto fail = [&](Verdict v, std::string where) {
    tr.verdict = v;
    tr.failed_stage = std::move(where);
    return tr;
  };

  // Commitments: every pair (A_j, B_j) runs its share of the 2*N0 oracle
  // commitments at t = 0 and B_j relays the confirmation to B0.
  for (int j = 1; j <= scenario.pairs; ++j) {
    const Message& c = sched.send("A" + std::to_string(j), detail::bob_site(j), 0.0,
                                  std::string(kCommitPayload) + "[pair " + std::to_string(j) + "]");
    const Event confirmed = c.receive;
    const Site& b0 = *sched.find_site("B0");
    double arrival = light_arrival_time(confirmed, b0);
    if (scenario.inject_superluminal && j == 1) {
      arrival = confirmed.t + 0.5 * (arrival - confirmed.t);
    }
    sched.add(detail::bob_site(j), "B0", confirmed, b0.at(arrival), "confirm[pair " + std::to_string(j) + "]");
  }

  if (params.commit_mode == CommitBitMode::Fixed) {
    tr.commitment_bits = params.fixed_bits;
  } else {
    tr.commitment_bits.resize(2 * n0);
    for (Bit& b : tr.commitment_bits) b = static_cast<Bit>(rng.next_u64() & 1);
  }

  IdealBCCCOracle oracle(params.knobs);
  const CommitPhaseResult committed = commit_phase(tr.commitment_bits, oracle, params, sched);
  if (committed.stage == SessionStage::Aborted) {
    tr.violations = committed.violations;
    stage("commit", sched.find_site("B0")->at(0.0), "schedule causally invalid");
    return fail(Verdict::Abort, "commit");
  }
  tr.t_c = committed.t_c;
  sched.t_c = tr.t_c;
  stage("commit", sched.find_site("B0")->at(tr.t_c), "t_c fixed");

  for (std::size_t i = 0; i < oracle.size(); ++i) {
    if (auto b = oracle.leak(i, rng)) tr.leaks.push_back({i, *b});
  }

  // Spins leave A1 strictly after t_c.
  tr.sent_labels = encode_pairs(tr.commitment_bits, scenario.rule);
  const Message& spins_msg = sched.send("A1", "B0", tr.t_c + gap, "spins[" + std::to_string(n0) + "]");
  const std::vector<StateVector> stored =
      send_spin_sequence(tr.commitment_bits, scenario.rule, spins_msg.emit, tr.t_c);
  const Event spins_received = spins_msg.receive;
  stage("spins", spins_received);

  tr.challenge = challenge(params, rng);
  const std::vector<std::size_t> untested = untested_indices(n0, tr.challenge);
  std::map<std::string, double> challenge_arrival;
  for (int j = 1; j <= scenario.pairs; ++j) {
    const std::string a = "A" + std::to_string(j);
    challenge_arrival[a] = sched.send("B0", a, spins_received.t, "challenge").receive.t;
  }
  stage("challenge", spins_received, std::to_string(tr.challenge.size()) + " particles tested");

  // Each A_j opens its tested commitments to B_j, which relays to B0 by t_r.
  double t_r = spins_received.t;
  for (int j = 1; j <= scenario.pairs; ++j) {
    const std::string a = "A" + std::to_string(j);
    const Message& open = sched.send(a, detail::bob_site(j), challenge_arrival[a], "bccc-open");
    const Message& relay = sched.send(detail::bob_site(j), "B0", open.receive.t, "open-relay");
    t_r = std::max(t_r, relay.receive.t);
  }
  for (std::size_t i : tr.challenge) {
    tr.tested_reveals[i] = {oracle.open(2 * i, rng), oracle.open(2 * i + 1, rng)};
  }
  tr.t_r = t_r;
  sched.t_r = t_r;
  const Event verify_at = sched.find_site("B0")->at(t_r);
  tr.tested_check = verify_tested(tr.challenge, tr.tested_reveals, stored, scenario.rule, rng);
  stage("tested-verify", verify_at, tr.tested_check->accepted() ? "accept" : tr.tested_check->reason);
  if (!tr.tested_check->accepted()) {
    return fail(tr.tested_check->outcome == CheckResult::Outcome::Abort ? Verdict::Abort : Verdict::Reject,
                "tested-verify");
  }

  // Declarations fix the committed bit of the composed protocol.
  Bit reveal_bit = 0;
  std::vector<SpinLabel> untested_labels;
  for (std::size_t i : untested) untested_labels.push_back(tr.sent_labels[i]);
  if (const auto* h = std::get_if<HonestStrategy>(&alice)) {
    const Bit a = h->bit ? *h->bit : static_cast<Bit>(rng.next_u64() & 1);
    tr.declarations = make_declarations(a, untested, tr.sent_labels);
    tr.committed_bit = a;
    reveal_bit = a;
  } else if (const auto* e = std::get_if<EntangledCommitStrategy>(&alice)) {
    const EntangledReveal r = reveal_entangled(entangled_commit(e->alpha, e->beta), rng);
    tr.ancilla_outcome = r.bit;
    tr.declarations = make_declarations(r.bit, untested, tr.sent_labels);
    tr.committed_bit = r.bit;
    reveal_bit = r.bit;
  } else if (const auto* f = std::get_if<ClassicalFlipStrategy>(&alice)) {
    tr.declarations = flip_declarations(f->target, f->k, untested, tr.sent_labels, rng);
    if (f->k == 0) tr.committed_bit = f->target;
    if (f->k == params.m) tr.committed_bit = static_cast<Bit>(1 - f->target);
    reveal_bit = f->target;
  }
  const Event committed_at =
      sched.send("A1", "B0", t_r, "declarations[" + std::to_string(tr.declarations.size()) + "]").receive;
  sched.commitment_point = committed_at;
  tr.suspended_commitments = 2 * untested.size();
  stage("declarations", committed_at, "commitment point");

  for (int r = 1; r <= params.suspension_rounds; ++r) {
    sched.send("A1", "B0", committed_at.t + r * gap, "heartbeat[" + std::to_string(r) + "]");
  }

  if (const auto* f = std::get_if<ClassicalFlipStrategy>(&alice)) {
    tr.reveal_claim = classical_flip_attack(tr.declarations, tr.sent_labels, f->target, f->guess, rng);
  } else {
    tr.reveal_claim = untested_labels;
  }
  tr.revealed_bit = reveal_bit;
  const Message& reveal = sched.send("A1", "B0", committed_at.t + (params.suspension_rounds + 1) * gap,
                                     "reveal[a=" + std::to_string(reveal_bit) + "]");
  tr.reveal_message = reveal.id;
  tr.reveal_check = verify_reveal(reveal_bit, tr.reveal_claim, tr.declarations, stored, rng);
  tr.oracle_openings = oracle.opened_count();
  stage("reveal-verify", reveal.receive, tr.reveal_check->accepted() ? "accept" : tr.reveal_check->reason);

  tr.violations = validate_schedule(sched);
  if (!tr.violations.empty()) return fail(Verdict::Abort, "schedule");
  if (!tr.reveal_check->accepted()) {
    return fail(tr.reveal_check->outcome == CheckResult::Outcome::Abort ? Verdict::Abort : Verdict::Reject,
                "reveal-verify");
  }
  tr.verdict = Verdict::Accept;
  return tr;
}

}  // namespace qbc
