#pragma once

// Cheating strategies: declaration flipping against the reduction, the
// entangled commit alpha|00> + beta|11>, and the purification attack on a
// finite two-message commitment scheme.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qbc/protocol.hpp"
#include "qbc/quantum.hpp"
#include "qbc/random.hpp"

namespace qbc {

enum class GuessRule { UniformRandom, FirstEigenstate };

struct HonestStrategy {
  std::optional<Bit> bit;  // drawn from the session stream when empty
};

/// Declarations false on exactly k particles with respect to `target`.
struct ClassicalFlipStrategy {
  int k = 0;
  Bit target = 1;
  GuessRule guess = GuessRule::UniformRandom;
};

struct EntangledCommitStrategy {
  Complex alpha{1.0, 0.0};
  Complex beta{0.0, 0.0};
};

struct PurificationAttackStrategy {
  Bit target = 1;
};

using Strategy = std::variant<HonestStrategy, ClassicalFlipStrategy, EntangledCommitStrategy, PurificationAttackStrategy>;

inline std::string strategy_name(const Strategy& s) {
  struct V {
    std::string operator()(const HonestStrategy&) const { return "honest"; }
    std::string operator()(const ClassicalFlipStrategy&) const { return "classical-flip"; }
    std::string operator()(const EntangledCommitStrategy&) const { return "entangled-commit"; }
    std::string operator()(const PurificationAttackStrategy&) const { return "purification"; }
  };
  return std::visit(V{}, s);
}

inline void validate_strategy(const Strategy& s, const ProtocolParams& params) {
  if (const auto* f = std::get_if<ClassicalFlipStrategy>(&s)) {
    if (f->k < 0 || f->k > params.m) throw std::invalid_argument("adversary.k: must lie in [0, M]");
    if (f->target > 1) throw std::invalid_argument("adversary.target_bit: must be 0 or 1");
  }
  if (const auto* e = std::get_if<EntangledCommitStrategy>(&s)) {
    const double n = std::norm(e->alpha) + std::norm(e->beta);
    if (std::abs(n - 1.0) > kStateTolerance) throw std::invalid_argument("adversary.alpha: |alpha|^2 + |beta|^2 must be 1");
  }
  if (const auto* h = std::get_if<HonestStrategy>(&s)) {
    if (h->bit && *h->bit > 1) throw std::invalid_argument("adversary.bit: must be 0 or 1");
  }
}

// ---------------------------------------------------------------------------
// Declaration flipping

/// Declarations for the untested particles such that exactly k of them name,
/// for bit `target`, the basis conjugate to the particle's true basis. The k
/// particles are chosen uniformly.
inline std::vector<Declaration> flip_declarations(Bit target, int k, std::span<const std::size_t> untested,
                                                  std::span<const SpinLabel> labels, RandomStream& rng) {
  if (k < 0 || static_cast<std::size_t>(k) > untested.size()) {
    throw std::invalid_argument("flip_declarations: k must lie in [0, M]");
  }
  std::vector<std::size_t> order(untested.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> falsified(untested.size(), false);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) falsified[order[i]] = true;

  std::vector<Declaration> out;
  out.reserve(untested.size());
  for (std::size_t j = 0; j < untested.size(); ++j) {
    const std::size_t p = untested[j];
    const MeasurementBasis truth = basis_of(labels[p]);
    const MeasurementBasis for_target = falsified[j] ? conjugate(truth) : truth;
    out.push_back({p, target == 0 ? for_target : conjugate(for_target)});
  }
  return out;
}

/// Claimed labels for revealing `a_f`: the true label where the declared
/// basis is right, otherwise a guessed eigenstate of the declared basis.
inline std::vector<SpinLabel> classical_flip_attack(std::span<const Declaration> decls,
                                                    std::span<const SpinLabel> labels, Bit a_f, GuessRule guess,
                                                    RandomStream& rng) {
  std::vector<SpinLabel> claim;
  claim.reserve(decls.size());
  for (const Declaration& d : decls) {
    const MeasurementBasis b = d.basis_for(a_f);
    const SpinLabel truth = labels[d.particle];
    if (basis_of(truth) == b) {
      claim.push_back(truth);
    } else {
      const int outcome = guess == GuessRule::UniformRandom ? static_cast<int>(rng.uniform_index(2)) : 0;
      claim.push_back(label_for(b, outcome));
    }
  }
  return claim;
}

/// Exact probability that `claim` for bit a passes verify_reveal.
inline double reveal_pass_probability(Bit a, std::span<const SpinLabel> claim, std::span<const Declaration> decls,
                                      std::span<const SpinLabel> labels) {
  if (claim.size() != decls.size()) return 0.0;
  double p = 1.0;
  for (std::size_t j = 0; j < decls.size(); ++j) {
    const MeasurementBasis b = decls[j].basis_for(a);
    if (basis_of(claim[j]) != b) return 0.0;
    const auto born = born_probabilities(spin_state(labels[decls[j].particle]), b, 0);
    p *= born[static_cast<std::size_t>(eigen_outcome(claim[j]))];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Entangled commit

/// alpha|0>|0>_A + beta|1>|1>_A; qubit 0 is the committed bit, qubit 1 Alice's ancilla.
inline StateVector entangled_commit(Complex alpha, Complex beta) {
  const double n = std::norm(alpha) + std::norm(beta);
  if (std::abs(n - 1.0) > kStateTolerance) throw std::invalid_argument("entangled_commit: amplitudes not normalized");
  CVector v = CVector::Zero(4);
  v(0) = alpha;
  v(3) = beta;
  return StateVector(std::move(v));
}

struct EntangledReveal {
  Bit bit;
  StateVector post_state;
};

/// Measures the ancilla in {|0>_A, |1>_A} just before revelation; the outcome is the bit revealed.
inline EntangledReveal reveal_entangled(const StateVector& joint, RandomStream& rng) {
  auto m = measure(joint, MeasurementBasis::Z, 1, rng);
  return {static_cast<Bit>(m.outcome), std::move(m.post_state)};
}

// ---------------------------------------------------------------------------
// Finite commitment schemes and the purification attack

inline constexpr int kMaxToySystemQubits = 6;

/// Honest commit of b hands B the system part of a purification |psi_b> of
/// commit_state(b); opening hands over the purifier and B projects onto |psi_b>.
class ToyBCProtocol {
 public:
  ToyBCProtocol(DensityMatrix commit0, DensityMatrix commit1)
      : states_{std::move(commit0), std::move(commit1)} {
    if (states_[0].dimension() != states_[1].dimension()) {
      throw std::invalid_argument("ToyBCProtocol: commit states differ in dimension");
    }
    if (states_[0].qubits() > kMaxToySystemQubits) throw std::invalid_argument("ToyBCProtocol: dimension above 2^6");
    openings_[0] = canonical_purification(states_[0], purifier_dim());
    openings_[1] = canonical_purification(states_[1], purifier_dim());
  }

  static ToyBCProtocol from_pure(const StateVector& s0, const StateVector& s1) {
    return ToyBCProtocol(DensityMatrix::from_pure(s0), DensityMatrix::from_pure(s1));
  }

  int system_qubits() const noexcept { return states_[0].qubits(); }
  Eigen::Index system_dim() const noexcept { return states_[0].dimension(); }
  Eigen::Index purifier_dim() const noexcept { return states_[0].dimension(); }

  const DensityMatrix& commit_state(Bit b) const { return states_.at(b); }
  const StateVector& honest_opening(Bit b) const { return *openings_.at(b); }

  CMatrix accept_projector(Bit b) const {
    const CVector& v = honest_opening(b).amplitudes();
    return v * v.adjoint();
  }

  double accept_probability(Bit b, const StateVector& joint) const { return std::norm(honest_opening(b).inner(joint)); }

 private:
  std::array<DensityMatrix, 2> states_;
  std::array<std::optional<StateVector>, 2> openings_;
};

struct PurificationAttackResult {
  double p0 = 0.0;
  double p1 = 0.0;
  double fidelity = 0.0;
  std::optional<StateVector> committed;  // joint state Alice commits
  CMatrix steering;                      // purifier unitary applied to open as 1

  double p_sum() const noexcept { return p0 + p1; }
};

/// Alice aligns the two honest purifications with the Uhlmann rotation,
/// commits their normalised bisector, opens 0 directly and opens 1 after
/// steering her purifier with the rotation.
inline PurificationAttackResult purification_attack(const ToyBCProtocol& protocol) {
  PurificationAttackResult out;
  const Eigen::Index dp = protocol.purifier_dim();
  // <psi1|(I (x) U)|psi0> = sqrt(F)
  out.steering = uhlmann_rotation(protocol.commit_state(0), protocol.commit_state(1), dp);
  const StateVector& psi0 = protocol.honest_opening(0);
  const StateVector& psi1 = protocol.honest_opening(1);
  const StateVector psi1_in_alice_frame = apply_on_purifier(psi1, out.steering.adjoint());
  const CVector bisector = psi0.amplitudes() + psi1_in_alice_frame.amplitudes();
  out.committed = StateVector::normalized(bisector);
  // Squared overlaps with the raw bisector over its squared norm; dividing once keeps F = 0 exact.
  const double norm2 = bisector.squaredNorm();
  const Eigen::Map<const CMatrix> columns(bisector.data(), dp, bisector.size() / dp);
  const CMatrix rotated = out.steering * columns;
  const Eigen::Map<const CVector> steered(rotated.data(), rotated.size());
  out.p0 = std::norm(psi0.amplitudes().dot(bisector)) / norm2;
  out.p1 = std::norm(psi1.amplitudes().dot(steered)) / norm2;
  out.fidelity = fidelity(protocol.commit_state(0), protocol.commit_state(1));
  return out;
}

// ---------------------------------------------------------------------------
// Numerical sweep over Alice-side purifier unitaries

namespace detail {

/// Compass search maximiser; halves the step when no coordinate move improves.
template <class F>
double compass_maximize(F&& f, std::vector<double>& x, double step, double min_step, std::size_t max_evals = 2'000'000) {
  double best = f(x);
  std::size_t evals = 1;
  while (step > min_step && evals < max_evals) {
    bool improved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (double dir : {+1.0, -1.0}) {
        const double keep = x[i];
        x[i] = keep + dir * step;
        const double v = f(x);
        ++evals;
        if (v > best) {
          best = v;
          improved = true;
          break;
        }
        x[i] = keep;
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

inline CMatrix su2(double theta, double alpha, double beta) {
  const Complex ea = std::polar(1.0, alpha);
  const Complex eb = std::polar(1.0, beta);
  CMatrix u(2, 2);
  u << std::cos(theta) * ea, std::sin(theta) * eb, -std::sin(theta) * std::conj(eb), std::cos(theta) * std::conj(ea);
  return u;
}

/// exp(iH) for the Hermitian H encoded by d*d reals (diagonal, then Re/Im of the upper triangle).
inline CMatrix unitary_from_params(const std::vector<double>& p, Eigen::Index d) {
  CMatrix h = CMatrix::Zero(d, d);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < d; ++i) h(i, i) = p[k++];
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      h(i, j) = Complex(p[k], p[k + 1]);
      h(j, i) = std::conj(h(i, j));
      k += 2;
    }
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  CVector phases(d);
  for (Eigen::Index i = 0; i < d; ++i) phases(i) = std::polar(1.0, es.eigenvalues()(i));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

struct NumericCheatSum {
  double p_sum = 0.0;
  double best_overlap = 0.0;
  std::size_t starts = 0;
};

/// max over purifier unitaries U of 1 + |<psi0|(I (x) U)|psi1>|. For a fixed U
/// the best commit is the top eigenvector of |psi0><psi0| + |psi1'><psi1'|,
/// whose two acceptance probabilities sum to 1 + |<psi0|psi1'>|.
inline NumericCheatSum numeric_cheat_sum(const ToyBCProtocol& protocol, std::uint64_t seed = 7, int restarts = 6) {
  const Eigen::Index dp = protocol.purifier_dim();
  const StateVector& psi0 = protocol.honest_opening(0);
  const StateVector& psi1 = protocol.honest_opening(1);
  const CMatrix a0 = coefficient_matrix(psi0, dp);
  const CMatrix a1 = coefficient_matrix(psi1, dp);
  // <psi0|(I(x)U)|psi1> = sum_{s,p,q} conj(a0[s,p]) U[p,q] a1[s,q]
  const CMatrix g = a0.adjoint() * a1;  // dp x dp, overlap = Tr(U^T g) = sum U[p,q] g[p,q]
  auto overlap = [&](const CMatrix& u) { return std::abs(u.cwiseProduct(g).sum()); };

  NumericCheatSum out;
  if (dp == 2) {
    constexpr int kTheta = 33;
    constexpr int kPhase = 64;
    std::vector<double> best_x{0.0, 0.0, 0.0};
    double best = -1.0;
    const double pi = std::acos(-1.0);
    for (int i = 0; i < kTheta; ++i) {
      for (int j = 0; j < kPhase; ++j) {
        for (int l = 0; l < kPhase; ++l) {
          const double th = 0.5 * pi * i / (kTheta - 1);
          const double al = 2.0 * pi * j / kPhase;
          const double be = 2.0 * pi * l / kPhase;
          const double v = overlap(detail::su2(th, al, be));
          if (v > best) {
            best = v;
            best_x = {th, al, be};
          }
        }
      }
    }
    auto f = [&](const std::vector<double>& x) { return overlap(detail::su2(x[0], x[1], x[2])); };
    out.best_overlap = detail::compass_maximize(f, best_x, 0.05, 1e-10);
    out.starts = 1;
  } else {
    RandomStream rng(seed);
    const std::size_t dim = static_cast<std::size_t>(dp * dp);
    auto f = [&](const std::vector<double>& x) { return overlap(detail::unitary_from_params(x, dp)); };
    for (int r = 0; r <= restarts; ++r) {
      std::vector<double> x(dim, 0.0);
      if (r > 0) {
        for (double& v : x) v = (rng.uniform() * 2.0 - 1.0) * std::acos(-1.0);
      }
      out.best_overlap = std::max(out.best_overlap, detail::compass_maximize(f, x, 0.25, 1e-9));
      ++out.starts;
    }
  }
  out.p_sum = 1.0 + out.best_overlap;
  return out;
}

}  // namespace qbc
