#pragma once

// Experiment configuration (INI), the shipped scenario registry, and report
// emission: a JSON Lines transcript log, a JSON Lines machine report and a
// plain-text summary per run.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbc/analysis.hpp"

namespace qbc {

inline constexpr std::string_view kReportSchema = "qbc-report/1";

enum ExitCode : int { kExitOk = 0, kExitInvalidConfig = 1, kExitCausalAbort = 2, kExitExpectationBreach = 3 };

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& why)
      : std::invalid_argument(field + ": " + why), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class OutputFormat { Summary, Machine, Both };

inline OutputFormat parse_format(const std::string& s) {
  if (s == "summary") return OutputFormat::Summary;
  if (s == "machine") return OutputFormat::Machine;
  if (s == "both") return OutputFormat::Both;
  throw ConfigError("output.format", "expected summary, machine or both, got '" + s + "'");
}

struct AnalysisOptions {
  std::vector<int> k_values;
  std::vector<double> alpha_squared;
  std::size_t theta_points = 9;
  std::vector<double> flip_values;
  std::vector<double> leak_values;
  std::size_t bob_trials = 0;  // 0: use experiment trials
};

struct OutputOptions {
  std::string dir = "out";
  OutputFormat format = OutputFormat::Both;
  std::size_t transcript_sessions = 1;
};

struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  std::optional<std::size_t> trials;
  ProtocolParams protocol;
  SessionScenario geometry;
  Strategy strategy = HonestStrategy{};
  AnalysisOptions analysis;
  OutputOptions output;
};

// ---------------------------------------------------------------------------
// Scenario registry

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::size_t default_trials;
  std::string config;  // shipped INI text
};

inline const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> registry = {
      {"honest-default", "honest sessions at N0=64, M=16: every session accepts and p0+p1 = 1", 10'000,
       "[experiment]\nscenario = honest-default\nseed = 1\ntrials = 10000\n\n"
       "[protocol]\nM = 16\nN0 = 64\nN1 = 32\n\n"
       "[adversary]\nstrategy = honest\n\n"
       "[output]\ndir = out\nformat = both\n"},
      {"flip-sweep", "classical flip attack: pass rate against 2^-k for k false declarations", 100'000,
       "[experiment]\nscenario = flip-sweep\nseed = 1\ntrials = 100000\n\n"
       "[protocol]\nM = 16\nN0 = 64\nN1 = 32\n\n"
       "[adversary]\nstrategy = classical-flip\ntarget = 1\nguess = uniform\n\n"
       "[analysis]\nk_values = 0,1,2,3,4,5,6,7,8\n\n"
       "[output]\ndir = out\nformat = both\n"},
      {"entangle-demo", "entangled commit a|00> + b|11>: reveal-bit frequency against |a|^2", 100'000,
       "[experiment]\nscenario = entangle-demo\nseed = 1\ntrials = 100000\n\n"
       "[protocol]\nM = 16\nN0 = 64\nN1 = 32\n\n"
       "[adversary]\nstrategy = entangled-commit\n\n"
       "[analysis]\nalpha_squared = 0,0.25,0.5,1\n\n"
       "[output]\ndir = out\nformat = both\n"},
      {"purification-nogo", "purification attack on |0> vs |+> and the hiding/binding tradeoff sweep", 0,
       "[experiment]\nscenario = purification-nogo\nseed = 1\n\n"
       "[adversary]\nstrategy = purification\ntarget = 1\n\n"
       "[analysis]\ntheta_points = 9\n\n"
       "[output]\ndir = out\nformat = both\n"},
      {"oracle-degradation", "flip and leak knobs: completeness, hiding and binding against the ideal oracle", 20'000,
       "[experiment]\nscenario = oracle-degradation\nseed = 1\ntrials = 20000\n\n"
       "[protocol]\nM = 16\nN0 = 64\nN1 = 32\n\n"
       "[adversary]\nstrategy = honest\n\n"
       "[analysis]\nflip_values = 0,0.001,0.01\nleak_values = 0,0.01,1\n\n"
       "[output]\ndir = out\nformat = both\n"},
      {"causal-violation", "a superluminal confirmation relay: the session aborts with that violation", 1,
       "[experiment]\nscenario = causal-violation\nseed = 1\ntrials = 1\n\n"
       "[protocol]\nM = 16\nN0 = 64\nN1 = 32\n\n"
       "[spacetime]\npairs = 2\nseparation = 1\ninject_superluminal = true\n\n"
       "[adversary]\nstrategy = honest\n\n"
       "[output]\ndir = out\nformat = both\n"},
  };
  return registry;
}

inline std::vector<std::pair<std::string, std::string>> list_scenarios() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const ScenarioInfo& s : scenarios()) out.emplace_back(s.name, s.description);
  return out;
}

inline std::string scenario_names() {
  std::string out;
  for (const ScenarioInfo& s : scenarios()) out += (out.empty() ? "" : ", ") + s.name;
  return out;
}

inline const ScenarioInfo* find_scenario(const std::string& name) {
  for (const ScenarioInfo& s : scenarios()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"scenario", "seed", "trials"}},
      {"protocol",
       {"M", "N0", "N1", "epsilon", "epsilon_fidelity", "epsilon_information", "flip_probability", "leak_probability",
        "min_ratio", "suspension_rounds", "commit_mode", "commit_bits"}},
      {"spacetime", {"pairs", "separation", "b0_velocity", "stage_gap", "inject_superluminal"}},
      {"adversary", {"strategy", "bit", "k", "target", "guess", "alpha", "beta"}},
      {"analysis", {"k_values", "alpha_squared", "theta_points", "flip_values", "leak_values", "bob_trials"}},
      {"output", {"dir", "format", "transcript_sessions"}},
  };
  return keys;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_value(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  std::istringstream in(s);
  T v{};
  if constexpr (std::is_unsigned_v<T>) {
    if (!s.empty() && s[0] == '-') throw ConfigError(field, "must be non-negative, got '" + s + "'");
  }
  if (!(in >> v) || !(in >> std::ws).eof()) throw ConfigError(field, "cannot parse '" + s + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
  }
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + s + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& field, const std::string& raw) {
  std::vector<T> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_value<T>(field, item));
  if (out.empty()) throw ConfigError(field, "list is empty");
  return out;
}

class Section {
 public:
  Section(const ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (tree_ == nullptr) return std::nullopt;
    if (auto v = tree_->get_optional<std::string>(key)) return *v;
    return std::nullopt;
  }
  std::string field(const std::string& key) const { return name_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& target) const {
    if (auto v = raw(key)) target = parse_value<T>(field(key), *v);
  }
  void read_bool(const std::string& key, bool& target) const {
    if (auto v = raw(key)) target = parse_bool(field(key), *v);
  }

 private:
  const ptree* tree_;
  std::string name_;
};

inline Strategy parse_strategy(const Section& s, const ProtocolParams& params) {
  const std::string kind = trim(s.raw("strategy").value_or("honest"));
  auto bit = [&](const std::string& key, Bit fallback) -> Bit {
    int v = fallback;
    s.read(key, v);
    if (v != 0 && v != 1) throw ConfigError(s.field(key), "must be 0 or 1");
    return static_cast<Bit>(v);
  };
  if (kind == "honest") {
    HonestStrategy h;
    if (s.raw("bit")) h.bit = bit("bit", 0);
    return h;
  }
  if (kind == "classical-flip") {
    ClassicalFlipStrategy f;
    s.read("k", f.k);
    f.target = bit("target", 1);
    const std::string guess = trim(s.raw("guess").value_or("uniform"));
    if (guess == "uniform") {
      f.guess = GuessRule::UniformRandom;
    } else if (guess == "first") {
      f.guess = GuessRule::FirstEigenstate;
    } else {
      throw ConfigError(s.field("guess"), "expected uniform or first, got '" + guess + "'");
    }
    if (f.k < 0 || f.k > params.m) throw ConfigError(s.field("k"), "must lie in [0, M]");
    return f;
  }
  if (kind == "entangled-commit") {
    EntangledCommitStrategy e;
    s.read("alpha", e.alpha);
    s.read("beta", e.beta);
    return e;
  }
  if (kind == "purification") {
    PurificationAttackStrategy p;
    p.target = bit("target", 1);
    return p;
  }
  throw ConfigError(s.field("strategy"),
                    "unknown strategy '" + kind + "' (honest, classical-flip, entangled-commit, purification)");
}

}  // namespace detail

/// Parses and validates INI text. Every diagnostic names the offending field.
inline ExperimentConfig parse_config(const std::string& text) {
  using detail::ptree;
  ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto& known = detail::known_keys();
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw ConfigError(section, "unknown section");
    if (!body.data().empty()) throw ConfigError(section, "top-level keys are not allowed");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError(section + "." + key, "unknown key");
    }
  }
  auto section = [&](const std::string& name) {
    auto child = tree.get_child_optional(name);
    return detail::Section(child ? &*child : nullptr, name);
  };

  ExperimentConfig c;
  const auto exp = section("experiment");
  c.scenario = detail::trim(exp.raw("scenario").value_or(""));
  if (c.scenario.empty()) throw ConfigError("experiment.scenario", "required");
  const ScenarioInfo* info = find_scenario(c.scenario);
  if (info == nullptr) {
    throw ConfigError("experiment.scenario", "unknown scenario '" + c.scenario + "'; valid: " + scenario_names());
  }
  if (!exp.raw("seed")) throw ConfigError("experiment.seed", "required (no wall-clock default)");
  exp.read("seed", c.seed);
  if (auto t = exp.raw("trials")) c.trials = detail::parse_value<std::size_t>("experiment.trials", *t);

  const auto proto = section("protocol");
  ProtocolParams& p = c.protocol;
  proto.read("M", p.m);
  proto.read("N0", p.n0);
  proto.read("N1", p.n1);
  proto.read("epsilon", p.epsilons.failure);
  proto.read("epsilon_fidelity", p.epsilons.fidelity_defect);
  proto.read("epsilon_information", p.epsilons.information);
  p.knobs.flip_probability = p.epsilons.fidelity_defect;
  p.knobs.leak_probability = p.epsilons.information;
  proto.read("flip_probability", p.knobs.flip_probability);
  proto.read("leak_probability", p.knobs.leak_probability);
  proto.read("min_ratio", p.min_ratio);
  proto.read("suspension_rounds", p.suspension_rounds);
  const std::string mode = detail::trim(proto.raw("commit_mode").value_or("random"));
  if (mode == "fixed") {
    p.commit_mode = CommitBitMode::Fixed;
    const std::string bits = detail::trim(proto.raw("commit_bits").value_or(""));
    for (char ch : bits) {
      if (ch != '0' && ch != '1') throw ConfigError("protocol.commit_bits", "expected a string of 0 and 1");
      p.fixed_bits.push_back(static_cast<Bit>(ch - '0'));
    }
  } else if (mode != "random") {
    throw ConfigError("protocol.commit_mode", "expected random or fixed, got '" + mode + "'");
  }
  p.seed = c.seed;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    throw ConfigError(what.substr(0, colon), colon == std::string::npos ? what : what.substr(colon + 2));
  }

  const auto st = section("spacetime");
  SessionScenario& g = c.geometry;
  st.read("pairs", g.pairs);
  st.read("separation", g.separation);
  st.read("stage_gap", g.stage_gap);
  st.read_bool("inject_superluminal", g.inject_superluminal);
  if (auto v = st.raw("b0_velocity")) {
    std::istringstream vs(*v);
    for (int i = 0; i < 3; ++i) {
      if (!(vs >> g.b0_velocity[i])) throw ConfigError("spacetime.b0_velocity", "expected three numbers");
    }
  }
  if (g.pairs < 1) throw ConfigError("spacetime.pairs", "must be >= 1");
  if (!(g.separation > 0.0)) throw ConfigError("spacetime.separation", "must be positive");
  if (!(g.stage_gap > 0.0)) throw ConfigError("spacetime.stage_gap", "must be positive");
  if (!(g.b0_velocity.norm() < 1.0)) throw ConfigError("spacetime.b0_velocity", "speed must be < 1");

  const auto adv = section("adversary");
  c.strategy = detail::parse_strategy(adv, p);
  try {
    validate_strategy(c.strategy, p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("adversary", e.what());
  }

  const auto an = section("analysis");
  if (auto v = an.raw("k_values")) {
    c.analysis.k_values = detail::parse_list<int>("analysis.k_values", *v);
    for (int k : c.analysis.k_values) {
      if (k < 0 || k > p.m) throw ConfigError("analysis.k_values", "every k must lie in [0, M]");
    }
  }
  if (auto v = an.raw("alpha_squared")) {
    c.analysis.alpha_squared = detail::parse_list<double>("analysis.alpha_squared", *v);
    for (double a : c.analysis.alpha_squared) {
      if (a < 0.0 || a > 1.0) throw ConfigError("analysis.alpha_squared", "values must lie in [0, 1]");
    }
  }
  auto probabilities = [&](const std::string& key, std::vector<double>& out) {
    if (auto v = an.raw(key)) {
      out = detail::parse_list<double>("analysis." + key, *v);
      for (double x : out) {
        if (x < 0.0 || x > 1.0) throw ConfigError("analysis." + key, "values must lie in [0, 1]");
      }
    }
  };
  probabilities("flip_values", c.analysis.flip_values);
  probabilities("leak_values", c.analysis.leak_values);
  an.read("theta_points", c.analysis.theta_points);
  if (c.analysis.theta_points < 2) throw ConfigError("analysis.theta_points", "must be >= 2");
  an.read("bob_trials", c.analysis.bob_trials);

  const auto out = section("output");
  out.read("dir", c.output.dir);
  if (auto f = out.raw("format")) c.output.format = parse_format(detail::trim(*f));
  out.read("transcript_sessions", c.output.transcript_sessions);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Accepts a path to an INI file or the name of a shipped scenario.
inline ExperimentConfig resolve_config(const std::string& config_or_scenario) {
  if (const ScenarioInfo* s = find_scenario(config_or_scenario)) return parse_config(s->config);
  if (std::filesystem::exists(config_or_scenario)) return load_config(config_or_scenario);
  throw ConfigError("scenario", "'" + config_or_scenario + "' is neither a config file nor a shipped scenario; valid: " +
                                    scenario_names());
}

// ---------------------------------------------------------------------------
// JSON encoding

using json = nlohmann::json;

inline json to_json(const Event& e) { return json{{"t", e.t}, {"x", {e.x[0], e.x[1], e.x[2]}}}; }

inline json to_json(const Interval& i) { return json::array({i.lo, i.hi}); }

inline json to_json(const Provenance& p) {
  json j{{"kind", to_string(p.kind)}};
  if (p.kind == Provenance::Kind::MonteCarlo) {
    j["trials"] = p.trials;
    if (p.ci) j["ci99"] = to_json(*p.ci);
  }
  return j;
}

inline json mc_provenance(const McEstimate& e) { return to_json(Provenance::monte_carlo(e.trials, e.ci)); }

inline json to_json(const CheckResult& c) {
  json j{{"outcome", c.accepted() ? "accept" : c.outcome == CheckResult::Outcome::Reject ? "reject" : "abort"}};
  if (c.index) j["index"] = *c.index;
  if (!c.reason.empty()) j["reason"] = c.reason;
  return j;
}

inline json to_json(const Violation& v) {
  json j{{"kind", to_string(v.kind)}, {"detail", v.detail}};
  if (v.message_id) j["message"] = *v.message_id;
  return j;
}

inline json to_json(const SessionTranscript& tr, std::size_t session) {
  json j;
  j["record"] = "session";
  j["session"] = session;
  j["strategy"] = tr.strategy;
  std::string bits;
  for (Bit b : tr.commitment_bits) bits += static_cast<char>('0' + b);
  j["commitment_bits"] = bits;
  json labels = json::array();
  for (SpinLabel s : tr.sent_labels) labels.push_back(to_string(s));
  j["spins"] = labels;
  j["challenge"] = tr.challenge;
  json decls = json::array();
  for (const Declaration& d : tr.declarations) {
    decls.push_back({{"particle", d.particle}, {"basis_for_zero", to_string(d.basis_for_zero)}});
  }
  j["declarations"] = decls;
  if (tr.tested_check) j["tested_check"] = to_json(*tr.tested_check);
  if (tr.reveal_check) j["reveal_check"] = to_json(*tr.reveal_check);
  if (tr.committed_bit) j["committed_bit"] = *tr.committed_bit;
  if (tr.revealed_bit) j["revealed_bit"] = *tr.revealed_bit;
  if (tr.ancilla_outcome) j["ancilla_outcome"] = *tr.ancilla_outcome;
  j["leaks"] = tr.leaks.size();
  j["oracle_openings"] = tr.oracle_openings;
  j["suspended_commitments"] = tr.suspended_commitments;
  j["verdict"] = tr.verdict ? to_string(*tr.verdict) : "none";
  if (!tr.failed_stage.empty()) j["failed_stage"] = tr.failed_stage;
  j["t_c"] = tr.t_c;
  j["t_r"] = tr.t_r;
  json messages = json::array();
  for (const Message& m : tr.schedule.messages) {
    messages.push_back({{"id", m.id},
                        {"from", m.sender},
                        {"to", m.receiver},
                        {"emit", to_json(m.emit)},
                        {"receive", to_json(m.receive)},
                        {"payload", m.payload}});
  }
  j["messages"] = messages;
  json stages = json::array();
  for (const StageRecord& s : tr.stages) stages.push_back({{"stage", s.stage}, {"at", to_json(s.at)}, {"detail", s.detail}});
  j["stages"] = stages;
  json violations = json::array();
  for (const Violation& v : tr.violations) violations.push_back(to_json(v));
  j["violations"] = violations;
  if (tr.schedule.commitment_point) j["commitment_point"] = to_json(*tr.schedule.commitment_point);
  return j;
}

// ---------------------------------------------------------------------------
// Running

struct Expectation {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::vector<json> records;
  std::vector<json> transcripts;
  std::vector<Expectation> expectations;
  std::vector<std::string> summary;
  bool causal_abort = false;
  int exit_code = kExitOk;
};

namespace detail {

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

inline bool within_sigma(const McEstimate& e, double expected, double sigmas = 4.0) {
  const double sigma = e.sigma_at(expected);
  if (sigma == 0.0) return e.estimate == expected;
  return std::abs(e.estimate - expected) < sigmas * sigma;
}

inline void expect(ExperimentResult& r, std::string name, bool ok, std::string detail) {
  r.expectations.push_back({std::move(name), ok, std::move(detail)});
}

inline json point_record(const PointReport& p, std::size_t session) {
  return {{"record", "point"},          {"session", session},        {"q", to_json(p.q)},
          {"p0", p.p0},                 {"p1", p.p1},                {"p_sum", p.p_sum},
          {"bound", p.bound},           {"within_bound", p.within_bound},
          {"vacuous", p.vacuous},       {"free_actions", p.free_actions},
          {"spacelike_to_remaining", p.spacelike_to_remaining},
          {"provenance", to_json(p.provenance)}};
}

inline json report_record(const SecurityReport& rep) {
  return {{"record", "security_report"},
          {"strategy_class", rep.strategy_class},
          {"points", rep.points.size()},
          {"notes", rep.notes},
          {"provenance", to_json(Provenance::exact())}};
}

inline json bob_record(const BobInformation& b, const OracleKnobs& k) {
  return {{"record", "bob_information"},
          {"tv_distance", b.tv_distance},
          {"mutual_information_bits", b.mutual_information_bits},
          {"flip_probability", k.flip_probability},
          {"leak_probability", k.leak_probability},
          {"provenance", to_json(b.provenance)}};
}

inline std::size_t trials_for(const ExperimentConfig& c) {
  return c.trials.value_or(find_scenario(c.scenario)->default_trials);
}

inline void run_honest_default(const ExperimentConfig& c, ExperimentResult& r) {
  const std::size_t trials = trials_for(c);
  if (trials == 0) throw ConfigError("experiment.trials", "must be >= 1");
  const RandomStream root(c.seed);
  std::size_t accepted = 0;
  std::size_t bit_matches = 0;
  bool points_ok = true;
  for (std::size_t t = 0; t < trials; ++t) {
    RandomStream rng = root.split(t);
    const SessionTranscript tr = run_session(c.strategy, c.protocol, c.geometry, rng);
    if (!tr.violations.empty()) {
      r.causal_abort = true;
      r.transcripts.push_back(to_json(tr, t));
      for (const Violation& v : tr.violations) r.records.push_back({{"record", "violation"}, {"session", t}, {"violation", to_json(v)}});
      r.summary.push_back("session " + std::to_string(t) + " aborted: causal violation");
      return;
    }
    accepted += tr.accepted();
    bit_matches += tr.accepted() && tr.revealed_bit == tr.committed_bit;
    if (t < c.output.transcript_sessions) {
      r.transcripts.push_back(to_json(tr, t));
      if (tr.schedule.commitment_point) {
        const SecurityReport rep =
            evaluate_relativistic(tr, c.strategy, c.protocol.m, default_evaluation_points(tr));
        r.records.push_back(report_record(rep));
        for (const PointReport& p : rep.points) {
          r.records.push_back(point_record(p, t));
          points_ok = points_ok && std::abs(p.p_sum - 1.0) <= kStateTolerance;
        }
      }
    }
  }
  const McEstimate rate = make_estimate(accepted, trials);
  r.records.push_back({{"record", "completeness"},
                       {"trials", trials},
                       {"accepted", accepted},
                       {"revealed_equals_committed", bit_matches},
                       {"acceptance_rate", rate.estimate},
                       {"provenance", mc_provenance(rate)}});
  const ReductionCheatSum cs = cheat_sum_reduction(StrategyClass::Honest, c.protocol, c.geometry);
  r.records.push_back({{"record", "cheat_sum"},
                       {"class", "honest"},
                       {"p0", cs.p0},
                       {"p1", cs.p1},
                       {"p_sum", cs.p_sum},
                       {"provenance", to_json(Provenance::exact())}});
  const std::size_t bob_trials = std::max<std::size_t>(1000, c.analysis.bob_trials ? c.analysis.bob_trials : trials);
  BobInformationOptions opt{false, bob_trials, c.seed + 1, c.geometry};
  const BobInformation bob = bob_information(c.protocol, opt);
  r.records.push_back(bob_record(bob, c.protocol.knobs));

  r.summary.push_back("honest sessions: " + std::to_string(accepted) + "/" + std::to_string(trials) +
                      " accepted, revealed bit = committed bit in " + std::to_string(bit_matches));
  r.summary.push_back("cheat sum (honest class): p0 + p1 = " + fmt(cs.p_sum));
  r.summary.push_back("B information before reveal: TV = " + fmt(bob.tv_distance) +
                      ", MI = " + fmt(bob.mutual_information_bits) + " bits (" + to_string(bob.provenance.kind) + ")");
  expect(r, "all honest sessions accept", accepted == trials, std::to_string(accepted) + "/" + std::to_string(trials));
  expect(r, "revealed bit equals committed bit", bit_matches == trials, std::to_string(bit_matches));
  expect(r, "p0 + p1 = 1 at every evaluation point", points_ok && cs.p_sum == 1.0, "honest class");
  if (c.protocol.knobs.leak_probability == 0.0) {
    expect(r, "no pre-reveal information with an ideal oracle", bob.tv_distance == 0.0, fmt(bob.tv_distance));
  }
}

inline void run_flip_sweep(const ExperimentConfig& c, ExperimentResult& r) {
  const std::size_t trials = trials_for(c);
  std::vector<int> ks = c.analysis.k_values;
  if (ks.empty()) {
    for (int k = 0; k <= std::min(8, c.protocol.m); ++k) ks.push_back(k);
  }
  const auto* base = std::get_if<ClassicalFlipStrategy>(&c.strategy);
  const ClassicalFlipStrategy proto = base ? *base : ClassicalFlipStrategy{};
  r.summary.push_back("k   exact 2^-k     pass rate      99% CI");
  for (std::size_t idx = 0; idx < ks.size(); ++idx) {
    ClassicalFlipStrategy s = proto;
    s.k = ks[idx];
    const double exact = detection_probability_exact(s.k);
    const McEstimate e = detection_probability_mc(s, c.protocol, c.geometry, trials, RandomStream(c.seed).split(idx).next_u64());
    const bool ok = within_sigma(e, exact);
    r.records.push_back({{"record", "detection"},
                         {"k", s.k},
                         {"exact", exact},
                         {"estimate", e.estimate},
                         {"sigma", e.sigma_at(exact)},
                         {"within_4_sigma", ok},
                         {"provenance", mc_provenance(e)}});
    r.summary.push_back(std::to_string(s.k) + "   " + fmt(exact, 8) + "   " + fmt(e.estimate, 8) + "   [" +
                        fmt(e.ci.lo, 6) + ", " + fmt(e.ci.hi, 6) + "]");
    expect(r, "pass rate within 4 sigma of 2^-k at k=" + std::to_string(s.k), ok,
           fmt(e.estimate, 8) + " vs " + fmt(exact, 8));
  }
  const ReductionCheatSum cs = cheat_sum_reduction(StrategyClass::ClassicalFlip, c.protocol, c.geometry);
  r.records.push_back({{"record", "cheat_sum"},
                       {"class", "classical-flip"},
                       {"p0", cs.p0},
                       {"p1", cs.p1},
                       {"p_sum", cs.p_sum},
                       {"bound", cs.bound},
                       {"provenance", to_json(Provenance::exact())}});
  r.summary.push_back("cheat sum (flip class, worst pattern): " + fmt(cs.p_sum, 10) + " <= " + fmt(cs.bound, 10));
  expect(r, "flip-class cheat sum within 1 + 2^(1-M/2)", cs.p_sum <= cs.bound, fmt(cs.p_sum, 10));

  // Relativistic evaluation of one session with the balanced pattern k = M/2.
  ClassicalFlipStrategy half = proto;
  half.k = c.protocol.m / 2;
  RandomStream rng = RandomStream(c.seed).split(ks.size());
  const SessionTranscript tr = run_session(half, c.protocol, c.geometry, rng);
  r.transcripts.push_back(to_json(tr, 0));
  if (tr.schedule.commitment_point) {
    const SecurityReport rep = evaluate_relativistic(tr, half, c.protocol.m, default_evaluation_points(tr));
    r.records.push_back(report_record(rep));
    bool ok = true;
    for (const PointReport& p : rep.points) {
      r.records.push_back(point_record(p, 0));
      ok = ok && p.within_bound;
    }
    expect(r, "p(Q) within 1 + 2^(1-M/2) at every point after P", ok, "k = " + std::to_string(half.k));
  }
}

inline void run_entangle_demo(const ExperimentConfig& c, ExperimentResult& r) {
  const std::size_t trials = trials_for(c);
  if (trials < 1000) throw ConfigError("experiment.trials", "must be >= 1000 for this scenario");
  std::vector<double> grid = c.analysis.alpha_squared;
  if (grid.empty()) grid = {0.0, 0.25, 0.5, 1.0};
  r.summary.push_back("|alpha|^2   frequency of bit 0   accepted");
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const EntangledCommitStrategy s{std::sqrt(grid[idx]), std::sqrt(1.0 - grid[idx])};
    const RandomStream root(RandomStream(c.seed).split(idx).next_u64());
    std::size_t zeros = 0;
    std::size_t accepted = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      RandomStream rng = root.split(t);
      const SessionTranscript tr = run_session(s, c.protocol, c.geometry, rng);
      zeros += tr.revealed_bit == Bit{0};
      accepted += tr.accepted();
      if (idx == 0 && t < c.output.transcript_sessions) r.transcripts.push_back(to_json(tr, t));
    }
    const McEstimate e = make_estimate(zeros, trials);
    const bool ok = within_sigma(e, grid[idx]);
    r.records.push_back({{"record", "entangled_commit"},
                         {"alpha_squared", grid[idx]},
                         {"frequency_bit0", e.estimate},
                         {"sigma", e.sigma_at(grid[idx])},
                         {"accepted", accepted},
                         {"within_4_sigma", ok},
                         {"provenance", mc_provenance(e)}});
    r.summary.push_back(fmt(grid[idx]) + "        " + fmt(e.estimate, 6) + "             " + std::to_string(accepted) +
                        "/" + std::to_string(trials));
    expect(r, "bit-0 frequency within 4 sigma of |alpha|^2 = " + fmt(grid[idx]), ok, fmt(e.estimate, 6));
    expect(r, "every entangled session accepts after the ancilla measurement", accepted == trials,
           std::to_string(accepted));
  }
}

inline void run_purification_nogo(const ExperimentConfig& c, ExperimentResult& r) {
  CVector plus(2);
  plus << 1.0, 1.0;
  const ToyBCProtocol toy = ToyBCProtocol::from_pure(StateVector::basis(1, 0), StateVector::normalized(plus));
  const CheatSum cs = cheat_sum(toy);
  const double expected = 1.0 + 1.0 / std::sqrt(2.0);
  r.records.push_back({{"record", "purification_attack"},
                       {"states", "|0> vs |+>"},
                       {"fidelity", cs.fidelity},
                       {"p0", cs.p0},
                       {"p1", cs.p1},
                       {"p_sum", cs.p_sum},
                       {"p_sum_numeric", *cs.numeric_p_sum},
                       {"class", cs.strategy_class},
                       {"provenance", to_json(Provenance::exact())}});
  r.summary.push_back("purification attack on |0> vs |+>: p0 + p1 = " + fmt(cs.p_sum, 10) + " (numeric sweep " +
                      fmt(*cs.numeric_p_sum, 10) + ")");
  expect(r, "purification attack reaches 1 + 1/sqrt(2)", std::abs(cs.p_sum - expected) < 1e-9, fmt(cs.p_sum, 12));
  expect(r, "closed form agrees with the unitary sweep", std::abs(cs.p_sum - *cs.numeric_p_sum) < kOptimizationTolerance,
         fmt(std::abs(cs.p_sum - *cs.numeric_p_sum), 3));

  const std::size_t n = c.analysis.theta_points;
  std::vector<double> thetas;
  for (std::size_t i = 0; i < n; ++i) thetas.push_back(0.5 * std::acos(-1.0) * static_cast<double>(i) / static_cast<double>(n - 1));
  const std::vector<TradeoffRow> rows = nogo_tradeoff_sweep(thetas);
  r.summary.push_back("theta       F           eps_B       p0 + p1");
  bool agree = true;
  for (const TradeoffRow& row : rows) {
    r.records.push_back({{"record", "tradeoff"},
                         {"theta", row.theta},
                         {"fidelity", row.fidelity},
                         {"epsilon_bob", row.epsilon_bob},
                         {"epsilon_bob_numeric", row.epsilon_bob_numeric},
                         {"p_sum", row.p_sum},
                         {"p_sum_closed_form", row.p_sum_closed_form},
                         {"p_sum_numeric", row.p_sum_numeric},
                         {"provenance", to_json(Provenance::exact())}});
    r.summary.push_back(fmt(row.theta, 6) + "    " + fmt(row.fidelity, 6) + "    " + fmt(row.epsilon_bob, 6) + "    " +
                        fmt(row.p_sum, 8));
    agree = agree && std::abs(row.p_sum - row.p_sum_numeric) < kOptimizationTolerance &&
            std::abs(row.epsilon_bob - row.epsilon_bob_numeric) < 1e-9;
  }
  expect(r, "sweep agrees with numeric cross-checks", agree, std::to_string(rows.size()) + " rows");
  expect(r, "endpoint F = 1 gives p0 + p1 = 2", std::abs(rows.front().p_sum - 2.0) < 1e-12, fmt(rows.front().p_sum, 12));
  expect(r, "endpoint F = 0 gives p0 + p1 = 1", std::abs(rows.back().p_sum - 1.0) < 1e-12, fmt(rows.back().p_sum, 12));
}

inline void run_oracle_degradation(const ExperimentConfig& c, ExperimentResult& r) {
  const std::size_t trials = trials_for(c);
  std::vector<double> flips = c.analysis.flip_values;
  std::vector<double> leaks = c.analysis.leak_values;
  if (flips.empty()) flips = {c.protocol.knobs.flip_probability};
  if (leaks.empty()) leaks = {c.protocol.knobs.leak_probability};
  const std::size_t tested = static_cast<std::size_t>(c.protocol.n0 - c.protocol.m);
  r.summary.push_back("flip     leak     honest accept   expected     TV        expected TV");
  std::size_t idx = 0;
  for (double f : flips) {
    for (double l : leaks) {
      ProtocolParams p = c.protocol;
      p.knobs = {f, l};
      const OracleDegradation d =
          flip_attack_on_reduction_with_weak_oracle(p, c.geometry, trials, RandomStream(c.seed).split(idx++).next_u64());
      // Per tested particle: an opened basis bit that flips passes half the
      // time, an outcome-bit flip alone always fails.
      const double pass = (1.0 - f) * (1.0 - f) + 0.5 * f;
      const double expected_accept = std::pow(pass, static_cast<double>(tested));
      // The first bit of an untested pair names its basis; a leak of it reveals a,
      // but only in sessions that survive the test and reach the declarations.
      const double expected_tv = expected_accept * (1.0 - std::pow(1.0 - l, c.protocol.m));
      r.records.push_back({{"record", "degradation"},
                           {"flip_probability", f},
                           {"leak_probability", l},
                           {"honest_accept", d.honest_accept.estimate},
                           {"honest_accept_expected", expected_accept},
                           {"completeness_loss", d.completeness_loss},
                           {"tv_distance", d.hiding.tv_distance},
                           {"tv_distance_expected", expected_tv},
                           {"mutual_information_bits", d.hiding.mutual_information_bits},
                           {"binding_p_sum", d.binding_p_sum},
                           {"provenance", mc_provenance(d.honest_accept)},
                           {"hiding_provenance", to_json(d.hiding.provenance)}});
      r.summary.push_back(fmt(f, 4) + "    " + fmt(l, 4) + "     " + fmt(d.honest_accept.estimate, 6) + "        " +
                          fmt(expected_accept, 6) + "     " + fmt(d.hiding.tv_distance, 4) + "    " + fmt(expected_tv, 4));
      expect(r, "honest acceptance at flip=" + fmt(f) + ", leak=" + fmt(l), within_sigma(d.honest_accept, expected_accept),
             fmt(d.honest_accept.estimate, 6) + " vs " + fmt(expected_accept, 6));
      const McEstimate tv{d.hiding.tv_distance, {}, d.hiding.views, 0};
      expect(r, "TV distance at flip=" + fmt(f) + ", leak=" + fmt(l), within_sigma(tv, expected_tv),
             fmt(d.hiding.tv_distance, 6) + " vs " + fmt(expected_tv, 6));
      if (f == 0.0 && l == 0.0) {
        expect(r, "ideal knobs give no degradation", d.completeness_loss == 0.0 && d.hiding.tv_distance == 0.0, "");
      }
    }
  }
}

inline void run_causal_violation(const ExperimentConfig& c, ExperimentResult& r) {
  RandomStream rng = RandomStream(c.seed).split(0);
  const SessionTranscript tr = run_session(c.strategy, c.protocol, c.geometry, rng);
  r.transcripts.push_back(to_json(tr, 0));
  for (const Violation& v : tr.violations) r.records.push_back({{"record", "violation"}, {"session", 0}, {"violation", to_json(v)}});
  r.causal_abort = tr.verdict == Verdict::Abort && !tr.violations.empty();
  r.summary.push_back("verdict: " + (tr.verdict ? to_string(*tr.verdict) : std::string("none")) + " at stage " +
                      tr.failed_stage);
  for (const Violation& v : tr.violations) r.summary.push_back("violation: " + v.detail);
  if (c.geometry.inject_superluminal) {
    const bool exactly_one = tr.violations.size() == 1 && tr.violations[0].kind == Violation::Kind::Superluminal &&
                             tr.violations[0].message_id &&
                             tr.schedule.messages[*tr.violations[0].message_id].payload == "confirm[pair 1]";
    expect(r, "session aborts", tr.verdict == Verdict::Abort, tr.failed_stage);
    expect(r, "exactly the injected superluminal relay is reported", exactly_one,
           std::to_string(tr.violations.size()) + " violation(s)");
  } else {
    expect(r, "session without injection is causally valid", tr.violations.empty(), "");
  }
}

}  // namespace detail

/// Runs the configured scenario in memory; no files are written.
inline ExperimentResult execute(const ExperimentConfig& c) {
  ExperimentResult r;
  r.records.push_back({{"record", "header"},
                       {"schema", kReportSchema},
                       {"scenario", c.scenario},
                       {"seed", c.seed},
                       {"trials", detail::trials_for(c)},
                       {"strategy", strategy_name(c.strategy)},
                       {"M", c.protocol.m},
                       {"N0", c.protocol.n0},
                       {"N1", c.protocol.n1},
                       {"epsilon", c.protocol.epsilons.failure},
                       {"epsilon_fidelity", c.protocol.epsilons.fidelity_defect},
                       {"epsilon_information", c.protocol.epsilons.information},
                       {"flip_probability", c.protocol.knobs.flip_probability},
                       {"leak_probability", c.protocol.knobs.leak_probability},
                       {"pairs", c.geometry.pairs}});
  if (c.scenario == "honest-default") {
    detail::run_honest_default(c, r);
  } else if (c.scenario == "flip-sweep") {
    detail::run_flip_sweep(c, r);
  } else if (c.scenario == "entangle-demo") {
    detail::run_entangle_demo(c, r);
  } else if (c.scenario == "purification-nogo") {
    detail::run_purification_nogo(c, r);
  } else if (c.scenario == "oracle-degradation") {
    detail::run_oracle_degradation(c, r);
  } else if (c.scenario == "causal-violation") {
    detail::run_causal_violation(c, r);
  } else {
    throw ConfigError("experiment.scenario", "unknown scenario '" + c.scenario + "'; valid: " + scenario_names());
  }

  const bool all_passed =
      std::all_of(r.expectations.begin(), r.expectations.end(), [](const Expectation& e) { return e.passed; });
  if (r.causal_abort) {
    r.exit_code = kExitCausalAbort;
  } else if (!all_passed) {
    r.exit_code = kExitExpectationBreach;
  }
  for (const Expectation& e : r.expectations) {
    r.records.push_back({{"record", "expectation"}, {"name", e.name}, {"passed", e.passed}, {"detail", e.detail}});
  }
  r.records.push_back({{"record", "status"},
                       {"expectations_passed", all_passed},
                       {"causal_abort", r.causal_abort},
                       {"exit_code", r.exit_code}});
  return r;
}

struct RunArtifacts {
  std::filesystem::path transcript;
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> summary;
};

inline std::string render_summary(const ExperimentConfig& c, const ExperimentResult& r) {
  std::ostringstream s;
  s << "scenario: " << c.scenario << "\nseed: " << c.seed << "\ntrials: " << detail::trials_for(c) << "\n\n";
  for (const std::string& line : r.summary) s << line << "\n";
  s << "\nexpectations:\n";
  for (const Expectation& e : r.expectations) {
    s << "  [" << (e.passed ? "pass" : "FAIL") << "] " << e.name;
    if (!e.detail.empty()) s << " (" << e.detail << ")";
    s << "\n";
  }
  s << "\nexit status: " << r.exit_code << "\n";
  return s.str();
}

inline RunArtifacts write_artifacts(const ExperimentConfig& c, const ExperimentResult& r) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output.dir);
  fs::create_directories(dir);
  RunArtifacts a;
  auto write_lines = [](const fs::path& p, const std::vector<json>& lines) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    for (const json& j : lines) out << j.dump() << "\n";
  };
  a.transcript = dir / (c.scenario + ".transcript.jsonl");
  write_lines(a.transcript, r.transcripts);
  if (c.output.format != OutputFormat::Summary) {
    a.report = dir / (c.scenario + ".report.jsonl");
    write_lines(*a.report, r.records);
  }
  if (c.output.format != OutputFormat::Machine) {
    a.summary = dir / (c.scenario + ".summary.txt");
    std::ofstream out(*a.summary);
    if (!out) throw std::runtime_error("cannot write " + a.summary->string());
    out << render_summary(c, r);
  }
  return a;
}

/// Executes the experiment, writes its artifacts and returns the exit status.
inline int run_experiment(const ExperimentConfig& c, ExperimentResult* result = nullptr) {
  ExperimentResult r = execute(c);
  write_artifacts(c, r);
  const int code = r.exit_code;
  if (result != nullptr) *result = std::move(r);
  return code;
}

}  // namespace qbc
