#pragma once

// Independent reference implementations used only by the tests. These follow
// deliberately different computational routes than the library: circuits as
// dense matrix chains built from Kronecker embeddings, eigenvalues by cyclic
// Jacobi rotations, and the small QP by grid search plus an exact Cholesky
// solve on the located active set.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qsvm/statevector.hpp"

namespace oracle {

using Complex = std::complex<double>;
using Matrix = std::vector<std::vector<Complex>>;
using Vector = std::vector<Complex>;

inline Matrix identity(std::size_t n) {
  Matrix m(n, Vector(n, {0.0, 0.0}));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = {1.0, 0.0};
  return m;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  const std::size_t ra = a.size(), ca = a[0].size(), rb = b.size(), cb = b[0].size();
  Matrix m(ra * rb, Vector(ca * cb, {0.0, 0.0}));
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < ca; ++j)
      for (std::size_t k = 0; k < rb; ++k)
        for (std::size_t l = 0; l < cb; ++l) m[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
  return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size(), m = b[0].size(), k = b.size();
  Matrix out(n, Vector(m, {0.0, 0.0}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][p] * b[p][j];
  return out;
}

inline Vector matvec(const Matrix& a, const Vector& v) {
  Vector out(a.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += a[i][j] * v[j];
  return out;
}

// single-qubit gate on qubit k of q (qubit 0 = least significant bit)
inline Matrix embed(const Matrix& gate, int k, int q) {
  Matrix m = identity(1);
  for (int bit = q - 1; bit >= 0; --bit) m = kron(m, bit == k ? gate : identity(2));
  return m;
}

inline Matrix hadamard() {
  const double s = 1.0 / std::sqrt(2.0);
  return {{{s, 0}, {s, 0}}, {{s, 0}, {-s, 0}}};
}

inline Matrix rz(double t) {
  return {{std::polar(1.0, -0.5 * t), {0, 0}}, {{0, 0}, std::polar(1.0, 0.5 * t)}};
}

inline Matrix ry(double t) {
  const double c = std::cos(0.5 * t), s = std::sin(0.5 * t);
  return {{{c, 0}, {-s, 0}}, {{s, 0}, {c, 0}}};
}

inline Matrix pauli_z() { return {{{1, 0}, {0, 0}}, {{0, 0}, {-1, 0}}}; }
inline Matrix pauli_x() { return {{{0, 0}, {1, 0}}, {{1, 0}, {0, 0}}}; }

// exp(-i t/2 Z_a Z_b) = cos(t/2) I - i sin(t/2) (Z_a Z_b)
inline Matrix zz(double t, int a, int b, int q) {
  const Matrix zz_prod = matmul(embed(pauli_z(), a, q), embed(pauli_z(), b, q));
  Matrix m = identity(std::size_t{1} << q);
  const Complex c{std::cos(0.5 * t), 0.0};
  const Complex is{0.0, std::sin(0.5 * t)};
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) m[i][j] = c * m[i][j] - is * zz_prod[i][j];
  return m;
}

// CX = P0_c + P1_c X_t as dense products
inline Matrix cx(int control, int target, int q) {
  const Matrix p0{{{1, 0}, {0, 0}}, {{0, 0}, {0, 0}}};
  const Matrix p1{{{0, 0}, {0, 0}}, {{0, 0}, {1, 0}}};
  const Matrix e0 = embed(p0, control, q);
  const Matrix e1 = matmul(embed(p1, control, q), embed(pauli_x(), target, q));
  Matrix m = e0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) m[i][j] += e1[i][j];
  return m;
}

inline Vector zero_state(int q) {
  Vector v(std::size_t{1} << q, {0.0, 0.0});
  v[0] = {1.0, 0.0};
  return v;
}

inline Vector feature_state_dense(const std::vector<double>& x, const qsvm::FeatureMapConfig& cfg) {
  const int q = cfg.qubits;
  Vector state = zero_state(q);
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    for (int k = 0; k < q; ++k) state = matvec(embed(hadamard(), k, q), state);
    for (int k = 0; k < q; ++k) state = matvec(embed(rz(cfg.angle_scale * x[k]), k, q), state);
    for (int k = 0; k + 1 < q; ++k)
      state = matvec(zz(cfg.angle_scale * x[k] * x[k + 1], k, k + 1, q), state);
  }
  return state;
}

inline Vector variational_dense(Vector state, const std::vector<double>& theta,
                                const qsvm::VariationalConfig& cfg) {
  const int q = cfg.qubits;
  std::size_t next = 0;
  for (int k = 0; k < q; ++k) state = matvec(embed(ry(theta[next++]), k, q), state);
  for (int layer = 0; layer < cfg.layers; ++layer) {
    for (int k = 0; k + 1 < q; ++k) state = matvec(cx(k, k + 1, q), state);
    for (int k = 0; k < q; ++k) state = matvec(embed(ry(theta[next++]), k, q), state);
  }
  return state;
}

inline double max_amplitude_error(const Vector& a, const qsvm::Statevector& b) {
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b.amplitudes[i]));
  return err;
}

// Cyclic Jacobi eigenvalues for a symmetric matrix, ascending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

// 2-variable bound-constrained QP oracle: coarse grid over [0, hi]^2 locates
// the minimizer, a fine local grid refines it, then the active set read off
// the grid solution is solved exactly.
inline std::vector<double> grid_qp_oracle_2d(const std::vector<std::vector<double>>& a,
                                             const std::vector<double>& c, double hi,
                                             double upper = 1e300) {
  auto objective = [&](double x0, double x1) {
    return 0.5 * (a[0][0] * x0 * x0 + 2.0 * a[0][1] * x0 * x1 + a[1][1] * x1 * x1) -
           c[0] * x0 - c[1] * x1;
  };
  const double cap = std::min(hi, upper);
  double best0 = 0.0, best1 = 0.0, best = objective(0.0, 0.0);
  auto scan = [&](double lo0, double hi0, double lo1, double hi1, double step) {
    for (double x0 = lo0; x0 <= hi0 + 1e-15; x0 += step) {
      for (double x1 = lo1; x1 <= hi1 + 1e-15; x1 += step) {
        const double v = objective(x0, x1);
        if (v < best) {
          best = v;
          best0 = x0;
          best1 = x1;
        }
      }
    }
  };
  scan(0.0, cap, 0.0, cap, 1e-2);
  scan(std::max(0.0, best0 - 0.02), std::min(cap, best0 + 0.02),
       std::max(0.0, best1 - 0.02), std::min(cap, best1 + 0.02), 1e-4);

  // exact solve on the active set located by the grid
  const double tol = 5e-4;
  const bool lo0b = best0 < tol, hi0b = best0 > cap - tol;
  const bool lo1b = best1 < tol, hi1b = best1 > cap - tol;
  double x0 = lo0b ? 0.0 : (hi0b ? upper : best0);
  double x1 = lo1b ? 0.0 : (hi1b ? upper : best1);
  if (!lo0b && !hi0b && !lo1b && !hi1b) {
    const double det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
    x0 = (c[0] * a[1][1] - c[1] * a[0][1]) / det;
    x1 = (a[0][0] * c[1] - a[0][1] * c[0]) / det;
  } else if (!lo0b && !hi0b) {
    x0 = (c[0] - a[0][1] * x1) / a[0][0];
  } else if (!lo1b && !hi1b) {
    x1 = (c[1] - a[0][1] * x0) / a[1][1];
  }
  return {x0, x1};
}

}  // namespace oracle
