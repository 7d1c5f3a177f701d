#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "json.hpp"
#include "qsvm/kernel.hpp"

namespace qsvm {

struct NonConvexError : std::runtime_error {
  double min_eig;
  explicit NonConvexError(double mu)
      : std::runtime_error("quadratic form is not strictly positive definite (min eigenvalue " +
                           std::to_string(mu) + "); increase the shot count"),
        min_eig(mu) {}
};

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DualSolution {
  std::vector<double> alpha;
  double kkt_residual = 0.0;
  double objective_value = 0.0;
  double lambda = 0.0;
  double min_eig = 0.0;  // smallest eigenvalue of Q + lambda*I
  int iterations = 0;
};

// Q = diag(y) K diag(y)
inline Eigen::MatrixXd build_q(const Eigen::MatrixXd& k, const std::vector<int>& y) {
  if (k.rows() != k.cols() || k.rows() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("build_q: size mismatch");
  Eigen::MatrixXd q(k.rows(), k.cols());
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) q(i, j) = y[i] * y[j] * k(i, j);
  return q;
}

inline Eigen::MatrixXd build_q(const KernelMatrix& k, const std::vector<int>& y) {
  return build_q(to_eigen(k), y);
}

struct BoxQpResult {
  Eigen::VectorXd x;
  double kkt_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

// Minimize 1/2 x'Ax - c'x subject to 0 <= x <= upper, A symmetric positive
// definite. Primal active-set scheme: walk toward the free-subspace Cholesky
// solution, binding the first bound hit; release the most-violated KKT
// multiplier, lowest index on ties.
inline BoxQpResult solve_box_qp(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                                double upper = std::numeric_limits<double>::infinity(),
                                double kkt_tol = 1e-10, int max_iterations = 0) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || c.size() != n) throw std::invalid_argument("solve_box_qp: size mismatch");
  if (max_iterations <= 0) max_iterations = 50 * n;

  enum class Bound : unsigned char { kLower, kFree, kUpper };
  std::vector<Bound> state(n, Bound::kLower);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const double release_tol = kkt_tol * 0.01;
  const double feas_eps = 1e-13;
  int iterations = 0;

  auto gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return a * v - c; };

  auto solve_free = [&](Eigen::VectorXd& z) {
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i)
      if (state[i] == Bound::kFree) free_idx.push_back(i);
    const int nf = static_cast<int>(free_idx.size());
    z = x;
    if (nf == 0) return;
    Eigen::MatrixXd aff(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (int r = 0; r < nf; ++r) {
      double acc = c(free_idx[r]);
      for (int i = 0; i < n; ++i)
        if (state[i] == Bound::kUpper) acc -= a(free_idx[r], i) * upper;
      rhs(r) = acc;
      for (int s = 0; s < nf; ++s) aff(r, s) = a(free_idx[r], free_idx[s]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(aff);
    if (llt.info() != Eigen::Success)
      throw NonConvergenceError("solve_box_qp: free-subsystem factorization failed");
    const Eigen::VectorXd zf = llt.solve(rhs);
    for (int i = 0; i < n; ++i) {
      if (state[i] == Bound::kLower) z(i) = 0.0;
      if (state[i] == Bound::kUpper) z(i) = upper;
    }
    for (int r = 0; r < nf; ++r) z(free_idx[r]) = zf(r);
  };

  for (;;) {
    if (++iterations > max_iterations)
      throw NonConvergenceError("solve_box_qp: iteration cap reached");
    const Eigen::VectorXd g = gradient(x);

    // most violated KKT condition among bound variables
    int enter = -1;
    double worst = release_tol;
    for (int i = 0; i < n; ++i) {
      double violation = 0.0;
      if (state[i] == Bound::kLower) violation = -g(i);
      else if (state[i] == Bound::kUpper) violation = g(i);
      if (violation > worst) {
        worst = violation;
        enter = i;
      }
    }
    if (enter < 0) break;
    state[enter] = Bound::kFree;

    // inner feasibility loop
    for (;;) {
      if (++iterations > max_iterations)
        throw NonConvergenceError("solve_box_qp: iteration cap reached");
      Eigen::VectorXd z;
      solve_free(z);
      int blocker = -1;
      Bound blocker_bound = Bound::kLower;
      double step = 1.0;
      for (int i = 0; i < n; ++i) {
        if (state[i] != Bound::kFree) continue;
        if (z(i) < -feas_eps) {
          const double t = x(i) / (x(i) - z(i));
          if (t < step) {
            step = t;
            blocker = i;
            blocker_bound = Bound::kLower;
          }
        } else if (z(i) > upper + feas_eps) {
          const double t = (upper - x(i)) / (z(i) - x(i));
          if (t < step) {
            step = t;
            blocker = i;
            blocker_bound = Bound::kUpper;
          }
        }
      }
      if (blocker < 0) {
        x = z;
        for (int i = 0; i < n; ++i) {
          if (state[i] == Bound::kFree && x(i) < 0.0) x(i) = 0.0;
          if (state[i] == Bound::kFree && x(i) > upper) x(i) = upper;
        }
        break;
      }
      for (int i = 0; i < n; ++i)
        if (state[i] == Bound::kFree) x(i) += step * (z(i) - x(i));
      state[blocker] = blocker_bound;
      x(blocker) = (blocker_bound == Bound::kLower) ? 0.0 : upper;
    }
  }

  BoxQpResult result;
  result.x = x;
  result.iterations = iterations;
  result.objective = 0.5 * x.dot(a * x) - c.dot(x);
  const Eigen::VectorXd g = gradient(x);
  double residual = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lower_side = std::min(x(i), g(i));
    double r = std::fabs(lower_side);
    if (std::isfinite(upper)) r = std::min(r, std::fabs(std::min(upper - x(i), -g(i))));
    residual = std::max(residual, r);
  }
  result.kkt_residual = residual;
  return result;
}

// L2-regularized dual: min 1/2 a'(Q + lambda I)a - 1'a, a >= 0.
inline DualSolution solve_dual(const Eigen::MatrixXd& k, const std::vector<int>& y, double lambda,
                               double kkt_tol = 1e-10) {
  if (lambda <= 0.0) throw std::invalid_argument("solve_dual: lambda must be positive");
  const int m = static_cast<int>(k.rows());
  Eigen::MatrixXd a = build_q(k, y);
  for (int i = 0; i < m; ++i) a(i, i) += lambda;
  const double mu = symmetric_eigenvalues(a).front();
  if (mu <= 1e-10) throw NonConvexError(mu);

  const BoxQpResult qp = solve_box_qp(a, Eigen::VectorXd::Ones(m),
                                      std::numeric_limits<double>::infinity(), kkt_tol);
  DualSolution sol;
  sol.alpha.assign(qp.x.data(), qp.x.data() + m);
  sol.kkt_residual = qp.kkt_residual;
  sol.objective_value = qp.objective;
  sol.lambda = lambda;
  sol.min_eig = mu;
  sol.iterations = qp.iterations;
  return sol;
}

inline DualSolution solve_dual(const KernelMatrix& k, const std::vector<int>& y, double lambda,
                               double kkt_tol = 1e-10) {
  return solve_dual(to_eigen(k), y, lambda, kkt_tol);
}

// h(x) = sum_i alpha_i y_i k(x, x_i); kernel rows under shot noise use fresh
// streams keyed (seed, "predict", i).
inline double decision_value(const std::vector<double>& alpha, const LabeledSet& train,
                             const std::vector<double>& x_hat, const FeatureMapConfig& cfg,
                             const ShotConfig& access = {}) {
  if (alpha.size() != train.size())
    throw std::invalid_argument("decision_value: coefficient count mismatch");
  const Statevector psi_hat = feature_state(x_hat, cfg);
  double h = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (alpha[i] == 0.0) continue;
    double k = fidelity(psi_hat, feature_state(train.points[i], cfg));
    if (!access.exact()) {
      Stream rng = substream(access.seed, {rng_tags::kPredict, i});
      k = emulate_shots(k, access.shots, rng);
    }
    h += alpha[i] * train.labels[i] * k;
  }
  return h;
}

inline double decision_value(const DualSolution& sol, const LabeledSet& train,
                             const std::vector<double>& x_hat, const FeatureMapConfig& cfg,
                             const ShotConfig& access = {}) {
  return decision_value(sol.alpha, train, x_hat, cfg, access);
}

struct DanielReport {
  double lhs = 0.0;        // ||alpha' - alpha||
  double rhs = 0.0;        // eps/(mu - eps) * ||alpha||
  double eps = 0.0;        // ||K' - K||_2
  double mu = 0.0;         // min eigenvalue of Q + lambda I
  bool satisfied = false;
};

// Solution-perturbation bound for the strictly convex dual QP:
// ||a' - a|| <= eps/(mu - eps) ||a|| whenever eps = ||K' - K||_2 < mu.
inline DanielReport daniel_bound_check(const Eigen::MatrixXd& k, const Eigen::MatrixXd& k_pert,
                                       const std::vector<int>& y, double lambda) {
  if (k.rows() != k_pert.rows() || k.cols() != k_pert.cols())
    throw std::invalid_argument("daniel_bound_check: size mismatch");
  DanielReport report;
  report.eps = spectral_norm_symmetric(k_pert - k);

  Eigen::MatrixXd a = build_q(k, y);
  for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, i) += lambda;
  report.mu = symmetric_eigenvalues(a).front();
  if (report.eps >= report.mu)
    throw PreconditionError("daniel_bound_check: perturbation must satisfy ||K'-K|| < mu");

  const DualSolution base = solve_dual(k, y, lambda);
  const DualSolution pert = solve_dual(k_pert, y, lambda);
  double diff2 = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < base.alpha.size(); ++i) {
    const double d = pert.alpha[i] - base.alpha[i];
    diff2 += d * d;
    norm2 += base.alpha[i] * base.alpha[i];
  }
  report.lhs = std::sqrt(diff2);
  report.rhs = report.eps / (report.mu - report.eps) * std::sqrt(norm2);
  report.satisfied = report.lhs <= report.rhs * (1.0 + 1e-9);
  return report;
}

inline nlohmann::json dual_solution_to_json(const DualSolution& sol) {
  nlohmann::json j;
  j["alpha"] = sol.alpha;
  j["objective"] = sol.objective_value;
  j["kkt_residual"] = sol.kkt_residual;
  j["lambda"] = sol.lambda;
  j["min_eigenvalue"] = sol.min_eig;
  j["kkt_tolerance"] = 1e-10;
  return j;
}

}  // namespace qsvm
