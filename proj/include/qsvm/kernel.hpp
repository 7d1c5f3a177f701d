#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qsvm/dataset.hpp"
#include "qsvm/io.hpp"
#include "qsvm/parallel.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/statevector.hpp"

namespace qsvm {

// shots == 0 means exact evaluation (the R -> infinity limit).
struct ShotConfig {
  std::uint64_t shots = 0;
  std::uint64_t seed = 0;

  bool exact() const { return shots == 0; }
};

struct KernelMatrix {
  int size = 0;
  std::vector<double> entries;  // row-major, size*size
  std::uint64_t shots = 0;      // 0 = exact
  std::uint64_t seed = 0;
  unsigned __int128 circuit_evaluations = 0;

  double& at(int i, int j) { return entries[static_cast<std::size_t>(i) * size + j]; }
  double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * size + j]; }

  static KernelMatrix zeros(int m) {
    KernelMatrix k;
    k.size = m;
    k.entries.assign(static_cast<std::size_t>(m) * m, 0.0);
    return k;
  }
};

inline double exact_kernel(const std::vector<double>& x, const std::vector<double>& y,
                           const FeatureMapConfig& cfg) {
  if (x.size() != y.size())
    throw std::invalid_argument("exact_kernel: dimension mismatch");
  return fidelity(feature_state(x, cfg), feature_state(y, cfg));
}

// Sample mean of R projective measurements whose success probability is the
// exact kernel value: n ~ Binomial(R, k), result n/R.
inline double emulate_shots(double k_exact, std::uint64_t shots, Stream& rng) {
  if (shots < 1) throw std::invalid_argument("emulate_shots: shots must be >= 1");
  if (k_exact < -1e-12 || k_exact > 1.0 + 1e-12)
    throw std::invalid_argument("emulate_shots: kernel value outside [0, 1]");
  const double p = std::min(1.0, std::max(0.0, k_exact));
  const double n = binomial_draw(static_cast<double>(shots), p, rng);
  return n / static_cast<double>(shots);
}

namespace rng_tags {
constexpr std::uint64_t kKernelEntry = tag("kernel-entry");
constexpr std::uint64_t kPredict = tag("predict");
}  // namespace rng_tags

// Only the M(M+1)/2 upper-triangle entries are computed (and shot-sampled);
// entry (i, j) draws from a stream derived from (seed, i, j), so assembly is
// deterministic at any thread count.
inline KernelMatrix kernel_matrix(const LabeledSet& data, const FeatureMapConfig& cfg,
                                  const ShotConfig& shot_cfg, unsigned threads = 1) {
  if (data.size() == 0) throw std::invalid_argument("kernel_matrix: empty data set");
  if (data.dimension() != cfg.qubits)
    throw std::invalid_argument("kernel_matrix: feature dimension must equal qubit count");
  const int m = static_cast<int>(data.size());

  std::vector<Statevector> states(m);
  parallel_for(m, threads, [&](std::size_t i) { states[i] = feature_state(data.points[i], cfg); });

  KernelMatrix k = KernelMatrix::zeros(m);
  k.shots = shot_cfg.shots;
  k.seed = shot_cfg.seed;

  const std::size_t n_entries = static_cast<std::size_t>(m) * (m + 1) / 2;
  parallel_for(n_entries, threads, [&](std::size_t idx) {
    // unrank idx -> upper-triangle (i, j), i <= j
    std::size_t i = 0;
    std::size_t remaining = idx;
    std::size_t row_len = m;
    while (remaining >= row_len) {
      remaining -= row_len;
      --row_len;
      ++i;
    }
    const std::size_t j = i + remaining;
    double value = fidelity(states[i], states[j]);
    if (!shot_cfg.exact()) {
      Stream rng = substream(shot_cfg.seed, {rng_tags::kKernelEntry, i, j});
      value = emulate_shots(value, shot_cfg.shots, rng);
    }
    k.at(static_cast<int>(i), static_cast<int>(j)) = value;
    k.at(static_cast<int>(j), static_cast<int>(i)) = value;
  });

  if (!shot_cfg.exact())
    k.circuit_evaluations = static_cast<unsigned __int128>(shot_cfg.shots) * n_entries;
  return k;
}

inline Eigen::MatrixXd to_eigen(const KernelMatrix& k) {
  Eigen::MatrixXd m(k.size, k.size);
  for (int i = 0; i < k.size; ++i)
    for (int j = 0; j < k.size; ++j) m(i, j) = k.at(i, j);
  return m;
}

inline std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("symmetric_eigenvalues: eigensolver failed");
  std::vector<double> out(a.rows());
  for (int i = 0; i < a.rows(); ++i) out[i] = solver.eigenvalues()(i);
  return out;
}

inline double spectral_norm_symmetric(const Eigen::MatrixXd& a) {
  const auto eigs = symmetric_eigenvalues(a);
  return std::max(std::fabs(eigs.front()), std::fabs(eigs.back()));
}

// Operator 2-norm of A - B for symmetric A, B.
inline double spectral_distance(const KernelMatrix& a, const KernelMatrix& b) {
  if (a.size != b.size) throw std::invalid_argument("spectral_distance: size mismatch");
  return spectral_norm_symmetric(to_eigen(a) - to_eigen(b));
}

inline double min_eigenvalue(const KernelMatrix& k) {
  return symmetric_eigenvalues(to_eigen(k)).front();
}

inline std::string kernel_to_csv(const KernelMatrix& k) {
  std::string out;
  for (int i = 0; i < k.size; ++i) {
    for (int j = 0; j < k.size; ++j) {
      if (j) out += ',';
      out += format_double(k.at(i, j));
    }
    out += '\n';
  }
  return out;
}

inline KernelMatrix kernel_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) row[j] = parse_double(fields[j]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("kernel CSV: empty");
  const int m = static_cast<int>(rows.size());
  KernelMatrix k = KernelMatrix::zeros(m);
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(rows[i].size()) != m)
      throw std::runtime_error("kernel CSV: matrix is not square");
    for (int j = 0; j < m; ++j) k.at(i, j) = rows[i][j];
  }
  return k;
}

inline void save_kernel(const KernelMatrix& k, const std::filesystem::path& path) {
  write_file_atomic(path, kernel_to_csv(k));
}

inline KernelMatrix load_kernel(const std::filesystem::path& path) {
  return kernel_from_csv(read_file(path));
}

}  // namespace qsvm
