#pragma once

// Security quantification for the reduction and for finite commitment
// schemes: detection probabilities, B's pre-reveal information, the cheat sum
// p0 + p1 at spacetime evaluation points, and the hiding/binding tradeoff.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qbc/adversary.hpp"
#include "qbc/protocol.hpp"
#include "qbc/quantum.hpp"
#include "qbc/random.hpp"
#include "qbc/session.hpp"
#include "qbc/spacetime.hpp"

namespace qbc {

inline constexpr double kZ99 = 2.5758293035489004;  // two-sided 99% normal quantile

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
  double width() const noexcept { return hi - lo; }
};

inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = kZ99) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct Provenance {
  enum class Kind { Exact, MonteCarlo };
  Kind kind = Kind::Exact;
  std::size_t trials = 0;
  std::optional<Interval> ci;

  static Provenance exact() { return {}; }
  static Provenance monte_carlo(std::size_t n, Interval ci) { return {Kind::MonteCarlo, n, ci}; }
};

inline std::string to_string(Provenance::Kind k) { return k == Provenance::Kind::Exact ? "exact" : "monte-carlo"; }

// ---------------------------------------------------------------------------
// Detection probabilities

/// Pass probability of a reveal with k false declarations: 2^-k.
inline double detection_probability_exact(int k) {
  if (k < 0) throw std::invalid_argument("detection_probability_exact: k must be >= 0");
  return std::ldexp(1.0, -k);
}

struct McEstimate {
  double estimate = 0.0;
  Interval ci;
  std::size_t trials = 0;
  std::size_t successes = 0;

  /// Binomial standard deviation of the estimator under probability p.
  double sigma_at(double p) const { return std::sqrt(p * (1.0 - p) / static_cast<double>(trials)); }
};

inline McEstimate make_estimate(std::size_t successes, std::size_t trials) {
  return {static_cast<double>(successes) / static_cast<double>(trials), wilson_interval(successes, trials), trials,
          successes};
}

/// Fraction of full sessions accepted. Trial t draws from RandomStream(seed).split(t).
inline McEstimate detection_probability_mc(const Strategy& strategy, const ProtocolParams& params,
                                           const SessionScenario& scenario, std::size_t trials, std::uint64_t seed) {
  if (trials < 1000) throw std::invalid_argument("detection_probability_mc: trials must be >= 1000");
  const RandomStream root(seed);
  std::size_t accepted = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    RandomStream rng = root.split(t);
    accepted += run_session(strategy, params, scenario, rng).accepted();
  }
  return make_estimate(accepted, trials);
}

// ---------------------------------------------------------------------------
// B's information about the committed bit before reveal

struct BobInformation {
  double tv_distance = 0.0;
  double mutual_information_bits = 0.0;
  Provenance provenance;
  std::size_t views = 0;  // distinct views (exact) or sessions per bit value (Monte Carlo)
};

inline double mutual_information_bits(const std::vector<std::array<double, 2>>& conditional) {
  double mi = 0.0;
  for (const auto& p : conditional) {
    const double marginal = 0.5 * (p[0] + p[1]);
    for (double pa : p) {
      if (pa > 0.0) mi += 0.5 * pa * std::log2(pa / marginal);
    }
  }
  return std::max(mi, 0.0);
}

namespace detail {

inline void for_each_subset(std::size_t n, std::size_t k, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  while (true) {
    f(pick);
    if (k == 0) return;
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
}

// Basis revealed by a single leaked bit of a pair, when every label consistent with it shares one.
inline std::optional<MeasurementBasis> basis_from_leak(const EncodingRule& rule, std::size_t position, Bit bit) {
  std::optional<MeasurementBasis> basis;
  for (Bit other = 0; other < 2; ++other) {
    const BitPair p = position == 0 ? BitPair{bit, other} : BitPair{other, bit};
    const MeasurementBasis b = basis_of(rule.encode(p));
    if (basis && *basis != b) return std::nullopt;
    basis = b;
  }
  return basis;
}

}  // namespace detail

/// Exact TV distance and mutual information between B's pre-reveal views
/// (challenge, tested reveals with measurement outcomes, declarations) under
/// a = 0 and a = 1, enumerating every commitment string and challenge subset.
inline BobInformation bob_information_exact(const ProtocolParams& params, const EncodingRule& rule = {}) {
  params.validate();
  if (params.knobs.flip_probability > 0.0 || params.knobs.leak_probability > 0.0) {
    throw std::invalid_argument("bob_information_exact: requires ideal oracle knobs");
  }
  if (params.n0 > 6) throw std::invalid_argument("bob_information_exact: enumeration limited to N0 <= 6");
  const std::size_t n0 = static_cast<std::size_t>(params.n0);
  const std::size_t tested = n0 - static_cast<std::size_t>(params.m);

  std::vector<std::vector<Bit>> strings;
  if (params.commit_mode == CommitBitMode::Fixed) {
    strings.push_back(params.fixed_bits);
  } else {
    for (std::uint32_t w = 0; w < (1u << (2 * n0)); ++w) {
      std::vector<Bit> bits(2 * n0);
      for (std::size_t i = 0; i < 2 * n0; ++i) bits[i] = static_cast<Bit>((w >> i) & 1);
      strings.push_back(std::move(bits));
    }
  }

  std::map<std::vector<std::uint8_t>, std::array<double, 2>> views;
  double total = 0.0;
  for (Bit a = 0; a < 2; ++a) {
    for (const auto& bits : strings) {
      const std::vector<SpinLabel> labels = encode_pairs(bits, rule);
      detail::for_each_subset(n0, tested, [&](const std::vector<std::size_t>& subset) {
        const std::vector<std::size_t> untested = untested_indices(n0, subset);
        std::vector<std::uint8_t> key;
        for (std::size_t i : subset) {
          key.push_back(static_cast<std::uint8_t>(i));
          key.push_back(bits[2 * i]);
          key.push_back(bits[2 * i + 1]);
        }
        for (const Declaration& d : make_declarations(a, untested, labels)) {
          key.push_back(static_cast<std::uint8_t>(d.particle));
          key.push_back(static_cast<std::uint8_t>(d.basis_for_zero));
        }
        // Branch over every tested measurement outcome with its Born weight.
        std::function<void(std::size_t, double, std::vector<std::uint8_t>&)> branch =
            [&](std::size_t j, double w, std::vector<std::uint8_t>& k) {
              if (w == 0.0) return;
              if (j == subset.size()) {
                views[k][a] += w;
                return;
              }
              const std::size_t i = subset[j];
              const SpinLabel expected = rule.encode(bits[2 * i], bits[2 * i + 1]);
              const auto born = born_probabilities(spin_state(labels[i]), basis_of(expected), 0);
              for (int o = 0; o < 2; ++o) {
                k.push_back(static_cast<std::uint8_t>(o));
                branch(j + 1, w * born[static_cast<std::size_t>(o)], k);
                k.pop_back();
              }
            };
        branch(0, 1.0, key);
        if (a == 0) total += 1.0;
      });
    }
  }

  std::vector<std::array<double, 2>> conditional;
  conditional.reserve(views.size());
  double tv = 0.0;
  for (const auto& [key, w] : views) {
    const std::array<double, 2> p{w[0] / total, w[1] / total};
    tv += 0.5 * std::abs(p[0] - p[1]);
    conditional.push_back(p);
  }
  BobInformation out;
  out.tv_distance = tv;
  out.mutual_information_bits = mutual_information_bits(conditional);
  out.provenance = Provenance::exact();
  out.views = views.size();
  return out;
}

/// Sampled estimate from full sessions with a = 0 and a = 1. B's view is
/// reduced to the likelihood-ratio statistic {no evidence, evidence for 0,
/// evidence for 1}, which is sufficient because only leaked commitments of
/// untested particles correlate with a. The CI is the Wilson interval on the
/// fraction of informative views.
inline BobInformation bob_information_mc(const ProtocolParams& params, const SessionScenario& scenario,
                                         std::size_t trials, std::uint64_t seed) {
  if (trials < 1000) throw std::invalid_argument("bob_information_mc: trials must be >= 1000");
  const RandomStream root(seed);
  std::array<std::array<std::size_t, 3>, 2> counts{};
  std::size_t informative = 0;
  for (Bit a = 0; a < 2; ++a) {
    for (std::size_t t = 0; t < trials; ++t) {
      RandomStream rng = root.split(2 * t + a);
      const SessionTranscript tr = run_session(HonestStrategy{a}, params, scenario, rng);
      int stat = 0;
      if (!tr.declarations.empty()) {
        std::map<std::size_t, const Declaration*> by_particle;
        for (const Declaration& d : tr.declarations) by_particle[d.particle] = &d;
        for (const LeakRecord& leak : tr.leaks) {
          auto it = by_particle.find(leak.commitment / 2);
          if (it == by_particle.end()) continue;
          const auto basis = detail::basis_from_leak(scenario.rule, leak.commitment % 2, leak.bit);
          if (!basis) continue;
          stat = it->second->basis_for(0) == *basis ? 1 : 2;
          break;
        }
      }
      ++counts[a][static_cast<std::size_t>(stat)];
      informative += stat != 0;
    }
  }
  std::vector<std::array<double, 2>> conditional;
  double tv = 0.0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::array<double, 2> p{static_cast<double>(counts[0][s]) / static_cast<double>(trials),
                                  static_cast<double>(counts[1][s]) / static_cast<double>(trials)};
    tv += 0.5 * std::abs(p[0] - p[1]);
    conditional.push_back(p);
  }
  BobInformation out;
  out.tv_distance = tv;
  out.mutual_information_bits = mutual_information_bits(conditional);
  out.provenance = Provenance::monte_carlo(2 * trials, wilson_interval(informative, 2 * trials));
  out.views = trials;
  return out;
}

struct BobInformationOptions {
  bool force_monte_carlo = false;
  std::size_t trials = 100'000;
  std::uint64_t seed = 1;
  SessionScenario scenario;
};

/// Exact when the oracle is ideal and N0 <= 6; Monte Carlo otherwise.
inline BobInformation bob_information(const ProtocolParams& params, const BobInformationOptions& opt = {}) {
  const bool ideal = params.knobs.flip_probability == 0.0 && params.knobs.leak_probability == 0.0;
  if (ideal && params.n0 <= 6 && !opt.force_monte_carlo) return bob_information_exact(params, opt.scenario.rule);
  return bob_information_mc(params, opt.scenario, opt.trials, opt.seed);
}

// ---------------------------------------------------------------------------
// Cheat sums

struct CheatSum {
  double p0 = 0.0;
  double p1 = 0.0;
  double p_sum = 0.0;
  std::optional<double> numeric_p_sum;
  double fidelity = 0.0;
  std::string strategy_class;
  Provenance provenance;
};

inline CheatSum cheat_sum(const ToyBCProtocol& protocol, bool cross_check = true) {
  const PurificationAttackResult r = purification_attack(protocol);
  CheatSum out;
  out.p0 = r.p0;
  out.p1 = r.p1;
  out.p_sum = r.p_sum();
  out.fidelity = r.fidelity;
  if (cross_check) out.numeric_p_sum = numeric_cheat_sum(protocol).p_sum;
  out.strategy_class = "purification attack (Uhlmann-steered bisector commit); numeric sweep over purifier unitaries";
  return out;
}

enum class StrategyClass { Honest, ClassicalFlip };

struct FlipPatternRow {
  int false_for_zero = 0;  // declarations false for bit 0; M - k are false for bit 1
  double p0_exact = 0.0;
  double p1_exact = 0.0;
  std::optional<McEstimate> p0_mc;
  std::optional<McEstimate> p1_mc;
  double p_sum_exact() const { return p0_exact + p1_exact; }
};

struct ReductionCheatSum {
  StrategyClass strategy_class = StrategyClass::Honest;
  double p0 = 0.0;
  double p1 = 0.0;
  double p_sum = 0.0;
  double bound = 1.0;  // 1 + 2^(1 - M/2)
  std::vector<FlipPatternRow> patterns;
  std::optional<Interval> p_sum_ci;
};

inline double binding_bound(int m) { return 1.0 + std::ldexp(1.0, 1 - m / 2); }

/// Worst case over the implemented strategy class after declarations. For the
/// flip class every pattern with k false declarations for bit 0 has M - k false
/// for bit 1; Monte Carlo rows are computed for `mc_patterns` when trials > 0.
inline ReductionCheatSum cheat_sum_reduction(StrategyClass cls, const ProtocolParams& params,
                                             const SessionScenario& scenario, std::size_t trials = 0,
                                             std::uint64_t seed = 1, std::vector<int> mc_patterns = {}) {
  params.validate();
  ReductionCheatSum out;
  out.strategy_class = cls;
  out.bound = binding_bound(params.m);
  if (cls == StrategyClass::Honest) {
    out.p0 = 1.0;
    out.p1 = 0.0;
    out.p_sum = 1.0;
    if (trials > 0) {
      FlipPatternRow row;
      row.p0_exact = 1.0;
      row.p0_mc = detection_probability_mc(HonestStrategy{Bit{0}}, params, scenario, trials, seed);
      out.p_sum_ci = row.p0_mc->ci;
      out.patterns.push_back(row);
    }
    return out;
  }
  for (int k = 0; k <= params.m; ++k) {
    FlipPatternRow row;
    row.false_for_zero = k;
    row.p0_exact = detection_probability_exact(k);
    row.p1_exact = detection_probability_exact(params.m - k);
    if (trials > 0 && std::find(mc_patterns.begin(), mc_patterns.end(), k) != mc_patterns.end()) {
      row.p0_mc = detection_probability_mc(ClassicalFlipStrategy{k, 0}, params, scenario, trials, seed + 2 * k);
      row.p1_mc =
          detection_probability_mc(ClassicalFlipStrategy{params.m - k, 1}, params, scenario, trials, seed + 2 * k + 1);
      const Interval ci{row.p0_mc->ci.lo + row.p1_mc->ci.lo, row.p0_mc->ci.hi + row.p1_mc->ci.hi};
      if (!out.p_sum_ci || ci.hi > out.p_sum_ci->hi) out.p_sum_ci = ci;
    }
    if (row.p_sum_exact() > out.p_sum) {
      out.p0 = row.p0_exact;
      out.p1 = row.p1_exact;
      out.p_sum = row.p_sum_exact();
    }
    out.patterns.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hiding/binding tradeoff for finite schemes

struct TradeoffRow {
  double theta = 0.0;
  double fidelity = 0.0;
  double epsilon_bob = 0.0;          // (1/2) sqrt(1 - F): Helstrom advantage over guessing
  double epsilon_bob_numeric = 0.0;  // half the trace distance from the eigenvalues of rho0 - rho1
  double p_sum = 0.0;                // purification attack
  double p_sum_closed_form = 0.0;    // 1 + sqrt(F)
  double p_sum_numeric = 0.0;        // unitary sweep
};

/// Commit states |0> and cos(theta)|0> + sin(theta)|1> for each theta in [0, pi/2].
inline std::vector<TradeoffRow> nogo_tradeoff_sweep(std::span<const double> thetas) {
  const double half_pi = 0.5 * std::acos(-1.0);
  std::vector<TradeoffRow> rows;
  for (double theta : thetas) {
    if (theta < -1e-12 || theta > half_pi + 1e-12) throw std::invalid_argument("nogo_tradeoff_sweep: theta outside [0, pi/2]");
    CVector v1(2);
    v1 << std::cos(theta), std::sin(theta);
    const StateVector s0 = StateVector::basis(1, 0);
    const StateVector s1 = StateVector::normalized(v1);
    const ToyBCProtocol protocol = ToyBCProtocol::from_pure(s0, s1);

    TradeoffRow row;
    row.theta = theta;
    row.fidelity = fidelity(protocol.commit_state(0), protocol.commit_state(1));
    row.epsilon_bob = 0.5 * std::sqrt(std::max(0.0, 1.0 - row.fidelity));
    const CMatrix diff = protocol.commit_state(0).matrix() - protocol.commit_state(1).matrix();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(diff, Eigen::EigenvaluesOnly);
    row.epsilon_bob_numeric = 0.25 * es.eigenvalues().cwiseAbs().sum();
    row.p_sum = purification_attack(protocol).p_sum();
    row.p_sum_closed_form = 1.0 + std::sqrt(row.fidelity);
    row.p_sum_numeric = numeric_cheat_sum(protocol).p_sum;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Relativistic evaluation

struct PointReport {
  Event q;
  double p0 = 0.0;
  double p1 = 0.0;
  double p_sum = 0.0;
  double bound = 1.0;
  bool within_bound = true;
  bool vacuous = false;                 // every Alice action already lies in PC(Q) or PC(P)
  bool spacelike_to_remaining = false;  // some free Alice action is spacelike to Q
  std::size_t free_actions = 0;
  Provenance provenance;
};

struct SecurityReport {
  std::string strategy_class;
  OracleEpsilons epsilons;
  std::vector<PointReport> points;
  std::optional<BobInformation> bob;
  std::vector<std::string> notes;
};

inline std::vector<std::string> standard_notes() {
  return {
      "p0/p1 are maxima over the implemented strategy class, not over all strategies",
      "p(Q) is evaluated only at the listed points (message events and the reveal event)",
      "the ideal oracle accepts classical bits only",
      "the probability in the uniform-boundedness condition is read as worst case over the class",
      "actions inside the past cone of the commitment point are held fixed",
  };
}

inline bool same_event(const Event& a, const Event& b) {
  return std::abs(a.t - b.t) <= kCausalTolerance && (a.x - b.x).norm() <= kCausalTolerance;
}

/// p0(Q), p1(Q) when Alice may still choose every action outside PC(Q) and PC(P).
inline SecurityReport evaluate_relativistic(const SessionTranscript& tr, const Strategy& strategy, int m,
                                            std::span<const Event> points) {
  const Schedule& s = tr.schedule;
  if (!s.commitment_point) throw std::invalid_argument("evaluate_relativistic: session never reached its commitment point");
  if (!validate_schedule(s).empty()) throw std::invalid_argument("evaluate_relativistic: schedule is causally invalid");
  const Event& p = *s.commitment_point;
  const bool flip_class = std::holds_alternative<ClassicalFlipStrategy>(strategy);

  SecurityReport report;
  report.strategy_class = flip_class ? "classical-flip" : "honest";
  report.notes = standard_notes();

  for (const Event& q : points) {
    if (in_past_cone(q, p) && !same_event(q, p)) {
      throw std::invalid_argument("evaluate_relativistic: evaluation point precedes the commitment point");
    }
    PointReport r;
    r.q = q;
    r.bound = binding_bound(m);
    bool reveal_free = false;
    for (const Message& msg : s.messages) {
      const Site* from = s.find_site(msg.sender);
      if (from == nullptr || from->party != Party::Alice) continue;
      if (in_past_cone(msg.emit, p) || in_past_cone(msg.emit, q)) continue;
      ++r.free_actions;
      if (!in_past_cone(q, msg.emit)) r.spacelike_to_remaining = true;
      if (tr.reveal_message && msg.id == *tr.reveal_message) reveal_free = true;
    }
    r.vacuous = r.free_actions == 0;
    if (reveal_free) {
      if (flip_class) {
        r.p0 = detection_probability_exact(false_declarations(0, tr.declarations, tr.sent_labels));
        r.p1 = detection_probability_exact(false_declarations(1, tr.declarations, tr.sent_labels));
      } else {
        const Bit a = tr.committed_bit.value_or(0);
        (a == 0 ? r.p0 : r.p1) = 1.0;
      }
    } else if (tr.revealed_bit) {
      const double pass = reveal_pass_probability(*tr.revealed_bit, tr.reveal_claim, tr.declarations, tr.sent_labels);
      (*tr.revealed_bit == 0 ? r.p0 : r.p1) = pass;
    }
    r.p_sum = r.p0 + r.p1;
    r.within_bound = r.p_sum <= r.bound + kStateTolerance;
    report.points.push_back(r);
  }
  return report;
}

/// Evaluation points: every message event at or after P plus P itself.
inline std::vector<Event> default_evaluation_points(const SessionTranscript& tr) {
  std::vector<Event> out;
  if (!tr.schedule.commitment_point) return out;
  const Event& p = *tr.schedule.commitment_point;
  out.push_back(p);
  for (const Message& m : tr.schedule.messages) {
    for (const Event& e : {m.emit, m.receive}) {
      if (!in_past_cone(e, p) && std::none_of(out.begin(), out.end(), [&](const Event& o) { return same_event(o, e); })) {
        out.push_back(e);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle imperfection

struct OracleDegradation {
  OracleKnobs knobs;
  McEstimate honest_accept;
  double completeness_loss = 0.0;  // 1 - honest acceptance
  BobInformation hiding;
  double binding_p_sum = 0.0;  // flip class, exact
};

/// How flip and leak knobs degrade completeness, hiding and binding of the
/// composed protocol relative to the ideal oracle.
inline OracleDegradation flip_attack_on_reduction_with_weak_oracle(const ProtocolParams& params,
                                                                   const SessionScenario& scenario,
                                                                   std::size_t trials, std::uint64_t seed) {
  OracleDegradation out;
  out.knobs = params.knobs;
  out.honest_accept = detection_probability_mc(HonestStrategy{}, params, scenario, trials, seed);
  out.completeness_loss = 1.0 - out.honest_accept.estimate;
  BobInformationOptions opt;
  opt.force_monte_carlo = true;
  opt.trials = trials;
  opt.seed = seed + 1;
  opt.scenario = scenario;
  out.hiding = bob_information(params, opt);
  out.binding_p_sum = cheat_sum_reduction(StrategyClass::ClassicalFlip, params, scenario).p_sum;
  return out;
}

}  // namespace qbc
