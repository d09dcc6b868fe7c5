#pragma once

// Reference computations for the test suite. These use plain std::complex
// arrays and textbook formulas so they share no code path with the library.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using Mat = std::vector<std::vector<cd>>;

inline Mat zeros(std::size_t n) { return Mat(n, std::vector<cd>(n, 0.0)); }

inline Mat outer(const std::vector<cd>& a, const std::vector<cd>& b) {
  Mat m = zeros(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m[i][j] = a[i] * std::conj(b[j]);
  return m;
}

inline cd dot(const std::vector<cd>& a, const std::vector<cd>& b) {
  cd s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline std::vector<cd> kron(const std::vector<cd>& a, const std::vector<cd>& b) {
  std::vector<cd> out;
  for (cd x : a)
    for (cd y : b) out.push_back(x * y);
  return out;
}

/// Trace out the second factor of a |dA|x|dB| pure state.
inline Mat trace_second(const std::vector<cd>& psi, std::size_t da, std::size_t db) {
  Mat r = zeros(da);
  for (std::size_t i = 0; i < da; ++i)
    for (std::size_t j = 0; j < da; ++j)
      for (std::size_t k = 0; k < db; ++k) r[i][j] += psi[i * db + k] * std::conj(psi[j * db + k]);
  return r;
}

/// Trace out the first factor.
inline Mat trace_first(const std::vector<cd>& psi, std::size_t da, std::size_t db) {
  Mat r = zeros(db);
  for (std::size_t i = 0; i < db; ++i)
    for (std::size_t j = 0; j < db; ++j)
      for (std::size_t k = 0; k < da; ++k) r[i][j] += psi[k * db + i] * std::conj(psi[k * db + j]);
  return r;
}

inline cd det2(const Mat& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

inline cd trace_product(const Mat& a, const Mat& b) {
  cd s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) s += a[i][j] * b[j][i];
  return s;
}

/// Squared fidelity of two qubit density matrices: Tr(rho sigma) + 2 sqrt(det rho det sigma).
inline double qubit_fidelity(const Mat& rho, const Mat& sigma) {
  // A rank-one input has determinant 0; rounding leaves about 1e-17, whose root would matter.
  auto det = [](const Mat& m) { const double v = det2(m).real(); return v < 1e-14 ? 0.0 : v; };
  const double d = det(rho) * det(sigma);
  return trace_product(rho, sigma).real() + 2.0 * std::sqrt(d);
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
inline double top_eigenvalue(const Mat& m, int iterations = 2000) {
  const std::size_t n = m.size();
  std::vector<cd> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = cd(1.0 + 0.1 * static_cast<double>(i), 0.05 * static_cast<double>(i));
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<cd> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += m[i][j] * v[j];
    double norm = 0.0;
    for (cd x : w) norm += std::norm(x);
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    lambda = norm;
  }
  return lambda;
}

/// Generic SU(2) element with Euler-like parameters.
inline std::array<std::array<cd, 2>, 2> su2(double theta, double phi, double chi) {
  const cd i(0.0, 1.0);
  return {{{std::exp(i * phi) * std::cos(theta), std::exp(i * chi) * std::sin(theta)},
           {-std::exp(-i * chi) * std::sin(theta), std::exp(-i * phi) * std::cos(theta)}}};
}

/// Max over Alice's strategies of p0 + p1 for a qubit scheme with pure commit
/// states s0, s1 and a one-qubit purifier. For a fixed purifier unitary U the
/// best commit state maximizes <phi|(P0 + P1_U)|phi>, i.e. the top eigenvalue of
/// |psi0><psi0| + (I x U^dag)|psi1><psi1|(I x U); U is swept on a grid, then
/// refined by shrinking coordinate search.
inline double brute_force_cheat_sum(const std::vector<cd>& s0, const std::vector<cd>& s1, int grid = 24) {
  const std::vector<cd> anc{1.0, 0.0};
  const std::vector<cd> psi0 = kron(s0, anc);
  const std::vector<cd> psi1 = kron(s1, anc);
  auto value = [&](double th, double ph, double ch) {
    const auto u = su2(th, ph, ch);
    // chi = (I x U^dag) psi1
    std::vector<cd> chi(4, 0.0);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q) chi[a * 2 + p] += std::conj(u[q][p]) * psi1[a * 2 + q];
    Mat m = outer(psi0, psi0);
    const Mat c = outer(chi, chi);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) m[i][j] += c[i][j];
    return top_eigenvalue(m, 400);
  };
  const double pi = std::acos(-1.0);
  double best = -1.0;
  std::array<double, 3> x{};
  for (int a = 0; a <= grid; ++a)
    for (int b = 0; b < grid; ++b)
      for (int c = 0; c < grid; ++c) {
        const std::array<double, 3> y{0.5 * pi * a / grid, 2 * pi * b / grid, 2 * pi * c / grid};
        const double v = value(y[0], y[1], y[2]);
        if (v > best) {
          best = v;
          x = y;
        }
      }
  for (double step = 0.2; step > 1e-9; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (int d = 0; d < 3; ++d)
        for (double sgn : {1.0, -1.0}) {
          auto y = x;
          y[static_cast<std::size_t>(d)] += sgn * step;
          const double v = value(y[0], y[1], y[2]);
          if (v > best + 1e-15) {
            best = v;
            x = y;
            moved = true;
          }
        }
    }
  }
  return best;
}

/// Probability that a reveal passes when each untested particle is measured in
/// its declared basis: product over particles of sum over claims q of
/// P(claim q) |<q|state>|^2. States are real qubit vectors.
inline double reveal_pass_product(const std::vector<std::array<double, 2>>& states,
                                  const std::vector<std::vector<std::pair<double, std::array<double, 2>>>>& claims) {
  double p = 1.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    double s = 0.0;
    for (const auto& [w, q] : claims[i]) {
      const double ov = q[0] * states[i][0] + q[1] * states[i][1];
      s += w * ov * ov;
    }
    p *= s;
  }
  return p;
}

inline double binomial(unsigned n, unsigned k) {
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Pearson chi-square statistic for observed counts against expected probabilities.
inline double chi_square(const std::vector<std::size_t>& observed, const std::vector<double>& p) {
  std::size_t n = 0;
  for (auto o : observed) n += o;
  double chi = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = p[i] * static_cast<double>(n);
    if (e > 0.0) chi += (static_cast<double>(observed[i]) - e) * (static_cast<double>(observed[i]) - e) / e;
  }
  return chi;
}

}  // namespace oracle
