#pragma once

// Stages of the certified-commitment reduction: 2*N0 commitments to an ideal
// oracle, N0 BB84 spins encoding consecutive bit pairs, a random challenge on
// N0 - M of them, per-particle basis declarations binding the final bit, and
// the final reveal check.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbc/quantum.hpp"
#include "qbc/random.hpp"
#include "qbc/spacetime.hpp"

namespace qbc {

using Bit = std::uint8_t;
using BitPair = std::array<Bit, 2>;

inline constexpr std::string_view kCommitPayload = "bccc-commit";

/// Security bounds an oracle implementation is supposed to meet.
struct OracleEpsilons {
  double failure = 0.0;          // probability the fidelity guarantee fails
  double fidelity_defect = 0.0;  // 1 - fidelity of the input state to |a>
  double information = 0.0;      // information available to B before reveal
};

struct OracleKnobs {
  double flip_probability = 0.0;  // opened bit differs from committed bit
  double leak_probability = 0.0;  // committed bit disclosed to B before reveal
};

enum class CommitBitMode { Random, Fixed };

struct ProtocolParams {
  int m = 16;
  int n0 = 64;
  int n1 = 32;
  OracleEpsilons epsilons;
  OracleKnobs knobs;
  std::uint64_t seed = 1;
  double min_ratio = 4.0;  // N0 >= min_ratio * M
  int suspension_rounds = 0;
  CommitBitMode commit_mode = CommitBitMode::Random;
  std::vector<Bit> fixed_bits;  // used when commit_mode == Fixed

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw std::invalid_argument("protocol." + field + ": " + why);
    };
    if (m < 1) fail("M", "must be >= 1");
    if (n0 < 1) fail("N0", "must be >= 1");
    if (n1 < 1) fail("N1", "must be >= 1");
    if (!(min_ratio >= 1.0)) fail("min_ratio", "must be >= 1");
    if (static_cast<double>(n0) < min_ratio * m) fail("N0", "must be >= min_ratio * M");
    if (n0 > 4096) fail("N0", "must be <= 4096");
    if (suspension_rounds < 0) fail("suspension_rounds", "must be >= 0");
    auto unit = [&](double v, const std::string& f) {
      if (!(v >= 0.0 && v < 1.0)) fail(f, "must lie in [0, 1)");
    };
    unit(epsilons.failure, "epsilon");
    unit(epsilons.fidelity_defect, "epsilon_fidelity");
    unit(epsilons.information, "epsilon_information");
    if (!(knobs.flip_probability >= 0.0 && knobs.flip_probability <= 1.0)) fail("flip_probability", "must lie in [0, 1]");
    if (!(knobs.leak_probability >= 0.0 && knobs.leak_probability <= 1.0)) fail("leak_probability", "must lie in [0, 1]");
    if (commit_mode == CommitBitMode::Fixed) {
      if (fixed_bits.size() != static_cast<std::size_t>(2 * n0)) fail("commit_bits", "fixed pattern must hold 2*N0 bits");
      for (Bit b : fixed_bits) {
        if (b > 1) fail("commit_bits", "bits must be 0 or 1");
      }
    }
  }
};

// ---------------------------------------------------------------------------

/// Ideal certified-commitment functionality. Accepts classical bits only.
class IdealBCCCOracle {
 public:
  explicit IdealBCCCOracle(OracleKnobs knobs = {}) : knobs_(knobs) {}

  const OracleKnobs& knobs() const noexcept { return knobs_; }
  bool ideal() const noexcept { return knobs_.flip_probability == 0.0 && knobs_.leak_probability == 0.0; }

  void commit(std::size_t index, Bit bit) {
    if (bit > 1) throw std::invalid_argument("oracle: committed value must be a bit");
    if (index >= bits_.size()) {
      bits_.resize(index + 1);
      opened_.resize(index + 1, false);
    }
    if (bits_[index]) throw std::logic_error("oracle: index already committed");
    bits_[index] = bit;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool committed(std::size_t index) const { return index < bits_.size() && bits_[index].has_value(); }
  bool opened(std::size_t index) const { return index < opened_.size() && opened_[index]; }
  std::size_t opened_count() const { return static_cast<std::size_t>(std::count(opened_.begin(), opened_.end(), true)); }

  /// Reveal to B. With flip_probability > 0 the reported bit may be wrong.
  Bit open(std::size_t index, RandomStream& rng) {
    if (!committed(index)) throw std::out_of_range("oracle: nothing committed at index");
    opened_[index] = true;
    const Bit b = *bits_[index];
    return rng.bernoulli(knobs_.flip_probability) ? static_cast<Bit>(1 - b) : b;
  }

  /// Pre-reveal disclosure to B, happening with leak_probability.
  std::optional<Bit> leak(std::size_t index, RandomStream& rng) const {
    if (!committed(index)) throw std::out_of_range("oracle: nothing committed at index");
    if (!rng.bernoulli(knobs_.leak_probability)) return std::nullopt;
    return *bits_[index];
  }

 private:
  OracleKnobs knobs_;
  std::vector<std::optional<Bit>> bits_;
  std::vector<bool> opened_;
};

/// Bit pair -> BB84 label. Default table: 00 Up, 01 Down, 10 Left, 11 Right.
class EncodingRule {
 public:
  EncodingRule() = default;
  explicit EncodingRule(std::array<SpinLabel, 4> table) : table_(table) {
    std::array<bool, 4> seen{};
    for (SpinLabel s : table_) seen[static_cast<std::size_t>(s)] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw std::invalid_argument("EncodingRule: table must be a bijection");
    }
  }

  SpinLabel encode(Bit first, Bit second) const { return table_[static_cast<std::size_t>(2 * first + second)]; }
  SpinLabel encode(const BitPair& p) const { return encode(p[0], p[1]); }

  BitPair decode(SpinLabel s) const {
    for (std::size_t i = 0; i < table_.size(); ++i) {
      if (table_[i] == s) return {static_cast<Bit>(i >> 1), static_cast<Bit>(i & 1)};
    }
    throw std::logic_error("EncodingRule: label missing");
  }

 private:
  std::array<SpinLabel, 4> table_{SpinLabel::Up, SpinLabel::Down, SpinLabel::Left, SpinLabel::Right};
};

/// Basis bound to bit 0 for one untested particle; bit 1 gets the conjugate.
struct Declaration {
  std::size_t particle = 0;
  MeasurementBasis basis_for_zero = MeasurementBasis::Z;

  MeasurementBasis basis_for(Bit a) const { return a == 0 ? basis_for_zero : conjugate(basis_for_zero); }
};

struct CheckResult {
  enum class Outcome { Accept, Reject, Abort };
  Outcome outcome = Outcome::Accept;
  std::optional<std::size_t> index;
  std::string reason;

  bool accepted() const noexcept { return outcome == Outcome::Accept; }

  static CheckResult accept() { return {}; }
  static CheckResult reject(std::optional<std::size_t> at, std::string why) {
    return {Outcome::Reject, at, std::move(why)};
  }
  static CheckResult abort(std::optional<std::size_t> at, std::string why) {
    return {Outcome::Abort, at, std::move(why)};
  }
};

class CausalError : public std::runtime_error {
 public:
  CausalError(const std::string& what, std::vector<Violation> v)
      : std::runtime_error(what), violations_(std::move(v)) {}
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// ---------------------------------------------------------------------------
// Stages

enum class SessionStage {
  AwaitingCommitments,
  AwaitingSpins,
  AwaitingChallenge,
  AwaitingTestedReveals,
  AwaitingDeclarations,
  Suspended,
  AwaitingReveal,
  Done,
  Aborted,
};

struct CommitPhaseResult {
  SessionStage stage = SessionStage::AwaitingCommitments;
  double t_c = 0.0;
  std::vector<Violation> violations;
};

/// Stores the 2*N0 bits in the oracle and fixes t_c from the commitment
/// confirmations recorded in `schedule` (messages tagged kCommitPayload).
inline CommitPhaseResult commit_phase(std::span<const Bit> bits, IdealBCCCOracle& oracle,
                                      const ProtocolParams& params, const Schedule& schedule,
                                      const std::string& observer = "B0") {
  if (bits.size() != static_cast<std::size_t>(2 * params.n0)) {
    throw std::invalid_argument("commit_phase: expected 2*N0 = " + std::to_string(2 * params.n0) + " bits, got " +
                                std::to_string(bits.size()));
  }
  CommitPhaseResult out;
  out.violations = validate_schedule(schedule);
  if (!out.violations.empty()) {
    out.stage = SessionStage::Aborted;
    return out;
  }
  for (std::size_t i = 0; i < bits.size(); ++i) oracle.commit(i, bits[i]);

  const Site* b0 = schedule.find_site(observer);
  if (b0 == nullptr) throw std::invalid_argument("commit_phase: observer site missing");
  std::vector<Event> confirmations;
  for (const Message& m : schedule.messages) {
    if (m.payload.starts_with(kCommitPayload)) confirmations.push_back(m.receive);
  }
  out.t_c = confirmations.empty() ? 0.0 : earliest_commitment_time(*b0, confirmations);
  out.stage = SessionStage::AwaitingSpins;
  return out;
}

inline std::vector<SpinLabel> encode_pairs(std::span<const Bit> bits, const EncodingRule& rule) {
  if (bits.size() % 2 != 0) throw std::invalid_argument("encode_pairs: odd number of bits");
  std::vector<SpinLabel> out;
  out.reserve(bits.size() / 2);
  for (std::size_t i = 0; i + 1 < bits.size(); i += 2) out.push_back(rule.encode(bits[i], bits[i + 1]));
  return out;
}

/// Particle i encodes commitments (2i, 2i+1).
inline std::vector<StateVector> send_spin_sequence(std::span<const Bit> bits, const EncodingRule& rule) {
  std::vector<StateVector> out;
  for (SpinLabel s : encode_pairs(bits, rule)) out.push_back(spin_state(s));
  return out;
}

/// Timed variant: the emission must lie strictly after t_c.
inline std::vector<StateVector> send_spin_sequence(std::span<const Bit> bits, const EncodingRule& rule,
                                                   const Event& emission, double t_c) {
  if (!(emission.t > t_c)) {
    throw CausalError("spins emitted at t=" + std::to_string(emission.t) + " not after t_c=" + std::to_string(t_c),
                      {Violation{Violation::Kind::Ordering, std::nullopt, "spin emission not after t_c"}});
  }
  return send_spin_sequence(bits, rule);
}

/// Uniform (N0 - M)-subset of particle indices, ascending.
inline std::vector<std::size_t> challenge(const ProtocolParams& params, RandomStream& rng) {
  const std::size_t n = static_cast<std::size_t>(params.n0);
  const std::size_t take = static_cast<std::size_t>(params.n0 - params.m);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<std::size_t> untested_indices(std::size_t n0, std::span<const std::size_t> tested) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n0; ++i) {
    if (!std::binary_search(tested.begin(), tested.end(), i)) out.push_back(i);
  }
  return out;
}

/// Measures each tested particle in the basis its revealed pair names; first failure rejects.
inline CheckResult verify_tested(std::span<const std::size_t> subset, const std::map<std::size_t, BitPair>& revealed,
                                 std::span<const StateVector> stored, const EncodingRule& rule, RandomStream& rng) {
  for (std::size_t i : subset) {
    if (revealed.find(i) == revealed.end()) return CheckResult::abort(i, "missing reveal for tested particle");
    if (i >= stored.size()) return CheckResult::abort(i, "tested particle was never received");
  }
  for (std::size_t i : subset) {
    const SpinLabel expected = rule.encode(revealed.at(i));
    const auto m = measure(stored[i], basis_of(expected), 0, rng);
    if (m.outcome != eigen_outcome(expected)) return CheckResult::reject(i, "tested particle failed its basis check");
  }
  return CheckResult::accept();
}

/// Honest declarations: the true basis of each untested particle is bound to `a`.
inline std::vector<Declaration> make_declarations(Bit a, std::span<const std::size_t> untested,
                                                  std::span<const SpinLabel> labels) {
  std::vector<Declaration> out;
  out.reserve(untested.size());
  for (std::size_t i : untested) {
    const MeasurementBasis b = basis_of(labels[i]);
    out.push_back({i, a == 0 ? b : conjugate(b)});
  }
  return out;
}

/// Number of declarations whose basis for `a` differs from the particle's true basis.
inline int false_declarations(Bit a, std::span<const Declaration> decls, std::span<const SpinLabel> labels) {
  int k = 0;
  for (const Declaration& d : decls) k += d.basis_for(a) != basis_of(labels[d.particle]);
  return k;
}

/// B measures every untested particle in the basis the declarations assign to
/// a_claimed and accepts iff each outcome certifies the claimed label.
inline CheckResult verify_reveal(Bit a_claimed, std::span<const SpinLabel> claimed,
                                 std::span<const Declaration> decls, std::span<const StateVector> stored,
                                 RandomStream& rng) {
  if (claimed.size() != decls.size()) return CheckResult::reject(std::nullopt, "claim length differs from declarations");
  for (std::size_t j = 0; j < decls.size(); ++j) {
    const MeasurementBasis b = decls[j].basis_for(a_claimed);
    if (basis_of(claimed[j]) != b) return CheckResult::reject(decls[j].particle, "claimed label outside declared basis");
  }
  for (std::size_t j = 0; j < decls.size(); ++j) {
    const std::size_t i = decls[j].particle;
    if (i >= stored.size()) return CheckResult::abort(i, "declared particle was never received");
    const auto m = measure(stored[i], decls[j].basis_for(a_claimed), 0, rng);
    if (m.outcome != eigen_outcome(claimed[j])) return CheckResult::reject(i, "revealed label failed measurement");
  }
  return CheckResult::accept();
}

}  // namespace qbc
