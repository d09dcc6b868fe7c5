#pragma once

// Dense state-vector and density-matrix algebra for small qubit registers.
//
// Qubit 0 is the most significant tensor factor: tensor(a, b) places a on
// qubit 0. Amplitude index bits therefore read left to right in qubit order.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qbc/random.hpp"

namespace qbc {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kStateTolerance = 1e-9;
inline constexpr double kDecompositionTolerance = 1e-10;
inline constexpr double kOptimizationTolerance = 1e-6;
inline constexpr int kMaxQubits = 12;

namespace detail {

inline int qubits_for_dimension(Eigen::Index dim, std::string_view what) {
  if (dim < 1 || (dim & (dim - 1)) != 0) {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(dim) +
                                " is not a power of two");
  }
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if (n > kMaxQubits) {
    throw std::invalid_argument(std::string(what) + ": register exceeds " +
                                std::to_string(kMaxQubits) + " qubits");
  }
  return n;
}

inline int bit_of(Eigen::Index index, int qubit, int qubits) {
  return static_cast<int>((index >> (qubits - 1 - qubit)) & 1);
}

// Sorted, de-duplicated, range-checked qubit list.
inline std::vector<int> checked_qubits(std::vector<int> qubits, int total, std::string_view what) {
  std::sort(qubits.begin(), qubits.end());
  qubits.erase(std::unique(qubits.begin(), qubits.end()), qubits.end());
  for (int q : qubits) {
    if (q < 0 || q >= total) {
      throw std::out_of_range(std::string(what) + ": qubit index " + std::to_string(q) +
                              " out of range");
    }
  }
  return qubits;
}

inline std::vector<int> complement(const std::vector<int>& sorted, int total) {
  std::vector<int> out;
  for (int q = 0; q < total; ++q) {
    if (!std::binary_search(sorted.begin(), sorted.end(), q)) out.push_back(q);
  }
  return out;
}

// Index of the sub-register formed by `qubits` (in listed order) inside `index`.
inline Eigen::Index sub_index(Eigen::Index index, const std::vector<int>& qubits, int total) {
  Eigen::Index out = 0;
  for (int q : qubits) out = (out << 1) | bit_of(index, q, total);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// States

class StateVector {
 public:
  explicit StateVector(CVector amplitudes)
      : amps_(std::move(amplitudes)),
        qubits_(detail::qubits_for_dimension(amps_.size(), "StateVector")) {
    const double norm2 = amps_.squaredNorm();
    if (!std::isfinite(norm2) || std::abs(norm2 - 1.0) > kStateTolerance) {
      throw std::invalid_argument("StateVector: squared norm " + std::to_string(norm2) +
                                  " differs from 1");
    }
  }

  /// Rescales `raw` to unit norm. Throws on the zero vector.
  static StateVector normalized(CVector raw) {
    const double n = raw.norm();
    if (!(n > 1e-300)) throw std::invalid_argument("StateVector: cannot normalize zero vector");
    raw /= n;
    return StateVector(std::move(raw));
  }

  static StateVector basis(int qubits, Eigen::Index index) {
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    if (index < 0 || index >= dim) throw std::out_of_range("StateVector::basis: index");
    CVector v = CVector::Zero(dim);
    v(index) = 1.0;
    return StateVector(std::move(v));
  }

  int qubits() const noexcept { return qubits_; }
  Eigen::Index dimension() const noexcept { return amps_.size(); }
  const CVector& amplitudes() const noexcept { return amps_; }
  Complex operator[](Eigen::Index i) const { return amps_(i); }

  /// <this|other>
  Complex inner(const StateVector& other) const {
    if (other.dimension() != dimension()) throw std::invalid_argument("inner: dimension mismatch");
    return amps_.dot(other.amps_);
  }

 private:
  CVector amps_;
  int qubits_;
};

class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix entries)
      : rho_(std::move(entries)),
        qubits_(detail::qubits_for_dimension(rho_.rows(), "DensityMatrix")) {
    if (rho_.rows() != rho_.cols()) throw std::invalid_argument("DensityMatrix: not square");
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > kStateTolerance) {
      throw std::invalid_argument("DensityMatrix: not Hermitian");
    }
    const double tr = rho_.trace().real();
    if (std::abs(tr - 1.0) > kStateTolerance) {
      throw std::invalid_argument("DensityMatrix: trace " + std::to_string(tr) + " differs from 1");
    }
    if (eigenvalues().minCoeff() < -kStateTolerance) {
      throw std::invalid_argument("DensityMatrix: negative eigenvalue");
    }
  }

  static DensityMatrix from_pure(const StateVector& psi) {
    return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  static DensityMatrix maximally_mixed(int qubits) {
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  const CMatrix& matrix() const noexcept { return rho_; }
  int qubits() const noexcept { return qubits_; }
  Eigen::Index dimension() const noexcept { return rho_.rows(); }

  /// Ascending eigenvalues.
  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  double purity() const { return (rho_ * rho_).trace().real(); }

  Eigen::Index rank(double tol = 1e-12) const {
    const Eigen::VectorXd ev = eigenvalues();
    return (ev.array() > tol).count();
  }

 private:
  CMatrix rho_;
  int qubits_;
};

// ---------------------------------------------------------------------------
// BB84 vocabulary

enum class MeasurementBasis : std::uint8_t { Z, X };

constexpr MeasurementBasis conjugate(MeasurementBasis b) noexcept {
  return b == MeasurementBasis::Z ? MeasurementBasis::X : MeasurementBasis::Z;
}

enum class SpinLabel : std::uint8_t { Up, Down, Left, Right };

inline constexpr std::array<SpinLabel, 4> kAllSpinLabels{SpinLabel::Up, SpinLabel::Down,
                                                         SpinLabel::Left, SpinLabel::Right};

constexpr MeasurementBasis basis_of(SpinLabel s) noexcept {
  return (s == SpinLabel::Up || s == SpinLabel::Down) ? MeasurementBasis::Z : MeasurementBasis::X;
}

// Measurement outcome that certifies the label: Up/Left -> 0, Down/Right -> 1.
constexpr int eigen_outcome(SpinLabel s) noexcept {
  return (s == SpinLabel::Down || s == SpinLabel::Right) ? 1 : 0;
}

constexpr SpinLabel label_for(MeasurementBasis b, int outcome) noexcept {
  if (b == MeasurementBasis::Z) return outcome == 0 ? SpinLabel::Up : SpinLabel::Down;
  return outcome == 0 ? SpinLabel::Left : SpinLabel::Right;
}

constexpr std::string_view to_string(SpinLabel s) noexcept {
  switch (s) {
    case SpinLabel::Up: return "up";
    case SpinLabel::Down: return "down";
    case SpinLabel::Left: return "left";
    case SpinLabel::Right: return "right";
  }
  return "?";
}

constexpr std::string_view to_string(MeasurementBasis b) noexcept {
  return b == MeasurementBasis::Z ? "Z" : "X";
}

// Single-qubit eigenvector for (basis, outcome). X outcomes: 0 -> (1,-1)/sqrt2, 1 -> (1,1)/sqrt2.
inline Eigen::Vector2cd basis_vector(MeasurementBasis b, int outcome) {
  const double h = 1.0 / std::sqrt(2.0);
  if (b == MeasurementBasis::Z) {
    return outcome == 0 ? Eigen::Vector2cd(1.0, 0.0) : Eigen::Vector2cd(0.0, 1.0);
  }
  return outcome == 0 ? Eigen::Vector2cd(h, -h) : Eigen::Vector2cd(h, h);
}

inline StateVector spin_state(SpinLabel label) {
  const Eigen::Vector2cd v = basis_vector(basis_of(label), eigen_outcome(label));
  return StateVector(CVector(v));
}

// ---------------------------------------------------------------------------
// Register operations

inline StateVector tensor(const StateVector& a, const StateVector& b) {
  if (a.qubits() + b.qubits() > kMaxQubits) throw std::invalid_argument("tensor: register too large");
  const CVector& x = a.amplitudes();
  const CVector& y = b.amplitudes();
  CVector out(x.size() * y.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.segment(i * y.size(), y.size()) = x(i) * y;
  return StateVector::normalized(std::move(out));
}

/// Born probabilities of outcomes {0, 1} when measuring `qubit` in `basis`.
inline std::array<double, 2> born_probabilities(const StateVector& state, MeasurementBasis basis,
                                                int qubit) {
  const int n = state.qubits();
  if (qubit < 0 || qubit >= n) throw std::out_of_range("measure: qubit index out of range");
  const Eigen::Vector2cd e0 = basis_vector(basis, 0);
  const Eigen::Vector2cd e1 = basis_vector(basis, 1);
  const Eigen::Index stride = Eigen::Index{1} << (n - 1 - qubit);
  std::array<double, 2> p{0.0, 0.0};
  const CVector& a = state.amplitudes();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (i & stride) continue;
    const Complex lo = a(i);
    const Complex hi = a(i | stride);
    p[0] += std::norm(std::conj(e0(0)) * lo + std::conj(e0(1)) * hi);
    p[1] += std::norm(std::conj(e1(0)) * lo + std::conj(e1(1)) * hi);
  }
  return p;
}

struct MeasurementResult {
  int outcome;
  StateVector post_state;
};

inline MeasurementResult measure(const StateVector& state, MeasurementBasis basis, int qubit,
                                 RandomStream& rng) {
  const auto p = born_probabilities(state, basis, qubit);
  int outcome = rng.uniform() < p[0] ? 0 : 1;
  if (p[outcome] <= 1e-15) outcome = 1 - outcome;

  const int n = state.qubits();
  const Eigen::Index stride = Eigen::Index{1} << (n - 1 - qubit);
  const Eigen::Vector2cd e = basis_vector(basis, outcome);
  const CVector& a = state.amplitudes();
  CVector post = CVector::Zero(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (i & stride) continue;
    const Complex c = std::conj(e(0)) * a(i) + std::conj(e(1)) * a(i | stride);
    post(i) = e(0) * c;
    post(i | stride) = e(1) * c;
  }
  return {outcome, StateVector::normalized(std::move(post))};
}

/// Reduced state on `keep` (returned in ascending qubit order).
inline DensityMatrix partial_trace(const StateVector& state, std::vector<int> keep) {
  const int n = state.qubits();
  keep = detail::checked_qubits(std::move(keep), n, "partial_trace");
  if (keep.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  const std::vector<int> env = detail::complement(keep, n);
  const Eigen::Index dk = Eigen::Index{1} << keep.size();
  const Eigen::Index de = Eigen::Index{1} << env.size();
  CMatrix psi(dk, de);
  const CVector& a = state.amplitudes();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    psi(detail::sub_index(i, keep, n), detail::sub_index(i, env, n)) = a(i);
  }
  CMatrix rho = psi * psi.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix(std::move(rho));
}

inline DensityMatrix partial_trace(const DensityMatrix& state, std::vector<int> keep) {
  const int n = state.qubits();
  keep = detail::checked_qubits(std::move(keep), n, "partial_trace");
  if (keep.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  const std::vector<int> env = detail::complement(keep, n);
  const Eigen::Index dk = Eigen::Index{1} << keep.size();
  const CMatrix& r = state.matrix();
  CMatrix out = CMatrix::Zero(dk, dk);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    const Eigen::Index ei = detail::sub_index(i, env, n);
    const Eigen::Index ki = detail::sub_index(i, keep, n);
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      if (detail::sub_index(j, env, n) != ei) continue;
      out(ki, detail::sub_index(j, keep, n)) += r(i, j);
    }
  }
  return DensityMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// Fidelity

/// Eigenvalues of a unit-trace PSD matrix below this are solver noise.
inline constexpr double kEigenNoiseFloor = 1e-14;

/// Square root of a Hermitian PSD matrix; eigenvalues under the noise floor become 0.
inline CMatrix psd_sqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const double floor = kEigenNoiseFloor * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  const Eigen::VectorXd roots =
      es.eigenvalues().unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().adjoint();
}

/// Uhlmann fidelity, squared convention: F = ||sqrt(r0) sqrt(r1)||_1^2,
/// which equals (Tr sqrt(sqrt(r0) r1 sqrt(r0)))^2.
inline double fidelity(const DensityMatrix& rho0, const DensityMatrix& rho1) {
  if (rho0.dimension() != rho1.dimension()) throw std::invalid_argument("fidelity: dimension mismatch");
  const CMatrix product = psd_sqrt(rho0.matrix()) * psd_sqrt(rho1.matrix());
  const double root = Eigen::JacobiSVD<CMatrix>(product).singularValues().sum();
  return std::clamp(root * root, 0.0, 1.0);
}

inline double fidelity(const StateVector& a, const StateVector& b) {
  return std::clamp(std::norm(a.inner(b)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Schmidt decomposition

struct SchmidtDecomposition {
  int qubits = 0;
  std::vector<int> left_qubits;
  std::vector<int> right_qubits;
  std::vector<double> coefficients;  // descending, strictly positive
  std::vector<CVector> left_basis;
  std::vector<CVector> right_basis;

  /// sum_i c_i |l_i>|r_i>, with qubits restored to their original positions.
  CVector recompose() const {
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    CVector out = CVector::Zero(dim);
    for (Eigen::Index idx = 0; idx < dim; ++idx) {
      const Eigen::Index l = detail::sub_index(idx, left_qubits, qubits);
      const Eigen::Index r = detail::sub_index(idx, right_qubits, qubits);
      Complex acc = 0.0;
      for (std::size_t k = 0; k < coefficients.size(); ++k) {
        acc += coefficients[k] * left_basis[k](l) * right_basis[k](r);
      }
      out(idx) = acc;
    }
    return out;
  }
};

inline SchmidtDecomposition schmidt_decompose(const StateVector& state, std::vector<int> left_qubits) {
  const int n = state.qubits();
  left_qubits = detail::checked_qubits(std::move(left_qubits), n, "schmidt_decompose");
  if (left_qubits.empty() || static_cast<int>(left_qubits.size()) == n) {
    throw std::invalid_argument("schmidt_decompose: bipartition must have two nonempty sides");
  }
  SchmidtDecomposition out;
  out.qubits = n;
  out.left_qubits = left_qubits;
  out.right_qubits = detail::complement(left_qubits, n);

  const Eigen::Index dl = Eigen::Index{1} << out.left_qubits.size();
  const Eigen::Index dr = Eigen::Index{1} << out.right_qubits.size();
  CMatrix m(dl, dr);
  const CVector& a = state.amplitudes();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    m(detail::sub_index(i, out.left_qubits, n), detail::sub_index(i, out.right_qubits, n)) = a(i);
  }
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) <= 1e-13) break;
    out.coefficients.push_back(sv(k));
    out.left_basis.emplace_back(svd.matrixU().col(k));
    out.right_basis.emplace_back(svd.matrixV().col(k).conjugate());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Purification and Uhlmann alignment
//
// Joint registers put the system first and the purifier last, so a joint
// amplitude index is system * purifier_dim + purifier.

inline bool is_unitary(const CMatrix& u, double tol = kStateTolerance) {
  if (u.rows() != u.cols()) return false;
  return ((u.adjoint() * u) - CMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

/// sum_i sqrt(lambda_i) |e_i> (x) |i>, eigenvalues in descending order.
inline StateVector canonical_purification(const DensityMatrix& rho, Eigen::Index purifier_dim) {
  detail::qubits_for_dimension(purifier_dim, "canonical_purification");
  const Eigen::Index d = rho.dimension();
  if (rho.rank() > purifier_dim) {
    throw std::invalid_argument("canonical_purification: purifier smaller than rank");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  CVector joint = CVector::Zero(d * purifier_dim);
  const Eigen::Index terms = std::min(d, purifier_dim);
  for (Eigen::Index k = 0; k < terms; ++k) {
    const Eigen::Index src = d - 1 - k;
    const double lambda = es.eigenvalues()(src);
    const double w = lambda > kEigenNoiseFloor ? std::sqrt(lambda) : 0.0;
    for (Eigen::Index s = 0; s < d; ++s) joint(s * purifier_dim + k) += w * es.eigenvectors()(s, src);
  }
  return StateVector::normalized(std::move(joint));
}

/// (I (x) U)|joint>, U acting on the trailing purifier register.
inline StateVector apply_on_purifier(const StateVector& joint, const CMatrix& u) {
  const Eigen::Index dp = u.rows();
  if (u.cols() != dp || dp < 1 || joint.dimension() % dp != 0) {
    throw std::invalid_argument("apply_on_purifier: dimension mismatch");
  }
  const Eigen::Index ds = joint.dimension() / dp;
  const Eigen::Map<const CMatrix> a(joint.amplitudes().data(), dp, ds);  // column s = purifier vector
  const CMatrix rotated = u * a;
  return StateVector::normalized(Eigen::Map<const CVector>(rotated.data(), rotated.size()));
}

/// Reshapes a joint amplitude vector into the system x purifier coefficient matrix.
inline CMatrix coefficient_matrix(const StateVector& joint, Eigen::Index purifier_dim) {
  const Eigen::Index ds = joint.dimension() / purifier_dim;
  CMatrix a(ds, purifier_dim);
  for (Eigen::Index s = 0; s < ds; ++s) {
    for (Eigen::Index p = 0; p < purifier_dim; ++p) a(s, p) = joint[s * purifier_dim + p];
  }
  return a;
}

/// Unitary U on the purifier maximising |<psi1|(I (x) U)|psi0>| between the
/// canonical purifications of rho0 and rho1; the overlap equals sqrt(F).
inline CMatrix uhlmann_rotation(const DensityMatrix& rho0, const DensityMatrix& rho1,
                                Eigen::Index purifier_dim) {
  if (rho0.dimension() != rho1.dimension()) {
    throw std::invalid_argument("uhlmann_rotation: dimension mismatch");
  }
  const CMatrix a0 = coefficient_matrix(canonical_purification(rho0, purifier_dim), purifier_dim);
  const CMatrix a1 = coefficient_matrix(canonical_purification(rho1, purifier_dim), purifier_dim);
  // <psi1|(I(x)U)|psi0> = Tr(U Y) with Y = A0^T conj(A1).
  const CMatrix y = a0.transpose() * a1.conjugate();
  Eigen::JacobiSVD<CMatrix> svd(y, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixV() * svd.matrixU().adjoint();
}

}  // namespace qbc
