#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsvm {

// Dense statevector over q qubits, qubit 0 on the least significant bit of
// the basis index. Gate conventions:
//   Rz(t) = diag(e^{-it/2}, e^{+it/2})
//   ZZ(t) = exp(-i(t/2) Z (x) Z)     phase e^{-it/2} on even parity
//   Ry(t) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]
// Fidelities are insensitive to the global phase these fix.

constexpr int kMaxQubits = 20;

struct Statevector {
  std::vector<std::complex<double>> amplitudes;
  int qubit_count = 0;

  static Statevector zero_state(int qubits) {
    if (qubits < 1 || qubits > kMaxQubits)
      throw std::invalid_argument("Statevector: qubit count must be in [1, 20]");
    Statevector s;
    s.qubit_count = qubits;
    s.amplitudes.assign(std::size_t{1} << qubits, {0.0, 0.0});
    s.amplitudes[0] = {1.0, 0.0};
    return s;
  }

  std::size_t dimension() const { return amplitudes.size(); }
};

struct FeatureMapConfig {
  int qubits = 4;
  int repetitions = 4;
  double angle_scale = 3.14159265358979323846;

  void validate() const {
    if (qubits < 1 || qubits > kMaxQubits)
      throw std::invalid_argument("FeatureMapConfig: qubits must be in [1, 20]");
    if (repetitions < 1)
      throw std::invalid_argument("FeatureMapConfig: repetitions must be >= 1");
  }
};

struct VariationalConfig {
  int qubits = 4;
  int layers = 1;

  int parameter_count() const { return qubits * (layers + 1); }

  void validate() const {
    if (qubits < 1 || qubits > kMaxQubits)
      throw std::invalid_argument("VariationalConfig: qubits must be in [1, 20]");
    if (layers < 0)
      throw std::invalid_argument("VariationalConfig: layers must be >= 0");
  }
};

namespace detail {
inline void check_qubit(const Statevector& s, int qubit, const char* who) {
  if (qubit < 0 || qubit >= s.qubit_count)
    throw std::out_of_range(std::string(who) + ": qubit index out of range");
}
}  // namespace detail

inline Statevector apply_hadamard_all(Statevector state) {
  const double inv_sqrt2 = 0.70710678118654752440;
  for (int qubit = 0; qubit < state.qubit_count; ++qubit) {
    const std::size_t mask = std::size_t{1} << qubit;
    for (std::size_t i = 0; i < state.dimension(); ++i) {
      if (i & mask) continue;
      const std::complex<double> a = state.amplitudes[i];
      const std::complex<double> b = state.amplitudes[i | mask];
      state.amplitudes[i] = (a + b) * inv_sqrt2;
      state.amplitudes[i | mask] = (a - b) * inv_sqrt2;
    }
  }
  return state;
}

inline Statevector apply_rz(Statevector state, int qubit, double angle) {
  detail::check_qubit(state, qubit, "apply_rz");
  const std::size_t mask = std::size_t{1} << qubit;
  const std::complex<double> phase0 = std::polar(1.0, -0.5 * angle);
  const std::complex<double> phase1 = std::polar(1.0, +0.5 * angle);
  for (std::size_t i = 0; i < state.dimension(); ++i)
    state.amplitudes[i] *= (i & mask) ? phase1 : phase0;
  return state;
}

inline Statevector apply_zz(Statevector state, int qubit_a, int qubit_b, double angle) {
  detail::check_qubit(state, qubit_a, "apply_zz");
  detail::check_qubit(state, qubit_b, "apply_zz");
  if (qubit_a == qubit_b) throw std::invalid_argument("apply_zz: qubits must be distinct");
  const std::size_t mask_a = std::size_t{1} << qubit_a;
  const std::size_t mask_b = std::size_t{1} << qubit_b;
  const std::complex<double> even = std::polar(1.0, -0.5 * angle);
  const std::complex<double> odd = std::polar(1.0, +0.5 * angle);
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    const bool parity = (bool(i & mask_a) != bool(i & mask_b));
    state.amplitudes[i] *= parity ? odd : even;
  }
  return state;
}

inline Statevector apply_ry(Statevector state, int qubit, double angle) {
  detail::check_qubit(state, qubit, "apply_ry");
  const std::size_t mask = std::size_t{1} << qubit;
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    if (i & mask) continue;
    const std::complex<double> a = state.amplitudes[i];
    const std::complex<double> b = state.amplitudes[i | mask];
    state.amplitudes[i] = c * a - s * b;
    state.amplitudes[i | mask] = s * a + c * b;
  }
  return state;
}

inline Statevector apply_cx(Statevector state, int control, int target) {
  detail::check_qubit(state, control, "apply_cx");
  detail::check_qubit(state, target, "apply_cx");
  if (control == target) throw std::invalid_argument("apply_cx: qubits must be distinct");
  const std::size_t mask_c = std::size_t{1} << control;
  const std::size_t mask_t = std::size_t{1} << target;
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    if ((i & mask_c) && !(i & mask_t))
      std::swap(state.amplitudes[i], state.amplitudes[i | mask_t]);
  }
  return state;
}

// Data-encoding circuit: per repetition, H on every qubit, Rz(scale*x_k) on
// qubit k, then ZZ(scale*x_k*x_{k+1}) along the nearest-neighbour chain.
inline Statevector feature_state(const std::vector<double>& x, const FeatureMapConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(x.size()) != cfg.qubits)
    throw std::invalid_argument("feature_state: feature dimension must equal qubit count");
  Statevector state = Statevector::zero_state(cfg.qubits);
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    state = apply_hadamard_all(std::move(state));
    for (int k = 0; k < cfg.qubits; ++k)
      state = apply_rz(std::move(state), k, cfg.angle_scale * x[k]);
    for (int k = 0; k + 1 < cfg.qubits; ++k)
      state = apply_zz(std::move(state), k, k + 1, cfg.angle_scale * x[k] * x[k + 1]);
  }
  return state;
}

// Hardware-efficient ansatz: an Ry per qubit, then `layers` blocks of
// [CX chain, Ry layer]; consumes q*(layers+1) angles.
inline Statevector apply_variational(Statevector state, const std::vector<double>& theta,
                                     const VariationalConfig& cfg) {
  cfg.validate();
  if (state.qubit_count != cfg.qubits)
    throw std::invalid_argument("apply_variational: qubit count mismatch");
  if (static_cast<int>(theta.size()) != cfg.parameter_count())
    throw std::invalid_argument("apply_variational: parameter count mismatch");
  std::size_t next = 0;
  for (int k = 0; k < cfg.qubits; ++k)
    state = apply_ry(std::move(state), k, theta[next++]);
  for (int layer = 0; layer < cfg.layers; ++layer) {
    for (int k = 0; k + 1 < cfg.qubits; ++k)
      state = apply_cx(std::move(state), k, k + 1);
    for (int k = 0; k < cfg.qubits; ++k)
      state = apply_ry(std::move(state), k, theta[next++]);
  }
  return state;
}

inline double fidelity(const Statevector& a, const Statevector& b) {
  if (a.qubit_count != b.qubit_count)
    throw std::invalid_argument("fidelity: qubit count mismatch");
  std::complex<double> inner{0.0, 0.0};
  for (std::size_t i = 0; i < a.dimension(); ++i)
    inner += std::conj(a.amplitudes[i]) * b.amplitudes[i];
  return std::norm(inner);
}

// <Z^q> = sum over basis states of (-1)^popcount |amp|^2
inline double expectation_z_all(const Statevector& state) {
  double value = 0.0;
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    const double p = std::norm(state.amplitudes[i]);
    value += (std::popcount(i) & 1) ? -p : p;
  }
  return value;
}

inline double state_norm(const Statevector& state) {
  double n = 0.0;
  for (const auto& a : state.amplitudes) n += std::norm(a);
  return std::sqrt(n);
}

}  // namespace qsvm
