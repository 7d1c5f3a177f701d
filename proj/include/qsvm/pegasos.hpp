#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsvm/dataset.hpp"
#include "qsvm/dual.hpp"
#include "qsvm/io.hpp"
#include "qsvm/kernel.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/statevector.hpp"

namespace qsvm {

using KernelAccess = ShotConfig;

namespace rng_tags {
constexpr std::uint64_t kPegasosIndex = tag("pegasos-index");
constexpr std::uint64_t kPegasosNoise = tag("pegasos-noise");
constexpr std::uint64_t kPegasosTrace = tag("pegasos-trace");
constexpr std::uint64_t kPegasosEval = tag("pegasos-eval");
constexpr std::uint64_t kPegasosObjective = tag("pegasos-objective");
}  // namespace rng_tags

// Value state of a training run: integer counts, the index of the next step,
// and the cursors of the two random streams, so a state can be stepped,
// copied, or replayed from anywhere.
struct PegasosState {
  std::vector<std::uint32_t> alpha;
  std::uint64_t t = 1;  // next step index; completed steps = t - 1
  double lambda = 0.1;
  std::uint64_t index_counter = 0;
  std::uint64_t noise_counter = 0;
  unsigned __int128 circuit_evaluations = 0;

  std::uint64_t completed_steps() const { return t - 1; }

  static PegasosState initial(std::size_t m, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("PegasosState: lambda must be positive");
    PegasosState s;
    s.alpha.assign(m, 0);
    s.lambda = lambda;
    return s;
  }
};

// Per-run workspace. Exact Gram entries are computed on demand and memoized;
// they are the exact-mode kernel values and the binomial means behind every
// shot-noise draw. Owned by one run at a time.
class PegasosContext {
 public:
  PegasosContext(const LabeledSet& data, const FeatureMapConfig& cfg, KernelAccess access,
                 std::uint64_t run_seed)
      : data_(data), access_(access), run_seed_(run_seed) {
    data.validate();
    if (data.dimension() != cfg.qubits)
      throw std::invalid_argument("PegasosContext: feature dimension must equal qubit count");
    const std::size_t m = data.size();
    states_.reserve(m);
    for (std::size_t i = 0; i < m; ++i) states_.push_back(feature_state(data.points[i], cfg));
    gram_.assign(m * m, 0.0);
    known_.assign(m * m, 0);
    index_key_ = derive_key(run_seed, {rng_tags::kPegasosIndex});
    noise_key_ = derive_key(access.seed, {rng_tags::kPegasosNoise});
  }

  const LabeledSet& data() const { return data_; }
  const KernelAccess& access() const { return access_; }
  std::uint64_t run_seed() const { return run_seed_; }
  std::uint64_t index_key() const { return index_key_; }
  std::uint64_t noise_key() const { return noise_key_; }

  double exact_entry(std::size_t i, std::size_t j) const {
    const std::size_t m = data_.size();
    const std::size_t idx = i * m + j;
    if (!known_[idx]) {
      const double v = fidelity(states_[i], states_[j]);
      gram_[idx] = v;
      gram_[j * m + i] = v;
      known_[idx] = 1;
      known_[j * m + i] = 1;
    }
    return gram_[idx];
  }

 private:
  const LabeledSet& data_;
  KernelAccess access_;
  std::uint64_t run_seed_;
  std::uint64_t index_key_ = 0;
  std::uint64_t noise_key_ = 0;
  std::vector<Statevector> states_;
  mutable std::vector<double> gram_;
  mutable std::vector<unsigned char> known_;
};

struct StepRecord {
  std::uint64_t t = 0;
  int chosen_index = 0;
  double margin = 0.0;
  bool incremented = false;
  std::uint64_t kernel_terms = 0;  // nonzero-alpha terms evaluated this step
};

// One stochastic subgradient step: draw i_t uniformly, test the margin
// y_{i_t}/(lambda t) * sum_{alpha_j > 0} alpha_j y_j k(x_{i_t}, x_j) < 1 and
// increment alpha[i_t] if it holds. Only nonzero-alpha terms evaluate
// kernels; in shots mode each evaluation is a fresh draw.
inline PegasosState pegasos_step(const PegasosState& state, const PegasosContext& ctx,
                                 StepRecord* record = nullptr) {
  if (state.t < 1) throw std::invalid_argument("pegasos_step: step counter must be >= 1");
  const std::size_t m = ctx.data().size();
  if (state.alpha.size() != m) throw std::invalid_argument("pegasos_step: state size mismatch");

  PegasosState out = state;
  Stream index_stream{ctx.index_key(), out.index_counter};
  const int i_t = static_cast<int>(index_stream.next_below(m));
  out.index_counter = index_stream.counter;

  Stream noise_stream{ctx.noise_key(), out.noise_counter};
  double sum = 0.0;
  std::uint64_t terms = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (out.alpha[j] == 0) continue;
    double kij = ctx.exact_entry(i_t, j);
    if (!ctx.access().exact()) kij = emulate_shots(kij, ctx.access().shots, noise_stream);
    sum += static_cast<double>(out.alpha[j]) * ctx.data().labels[j] * kij;
    ++terms;
  }
  out.noise_counter = noise_stream.counter;

  const double margin =
      ctx.data().labels[i_t] * sum / (out.lambda * static_cast<double>(state.t));
  const bool incremented = margin < 1.0;
  if (incremented) out.alpha[i_t] += 1;
  out.circuit_evaluations +=
      ctx.access().exact() ? terms : static_cast<unsigned __int128>(terms) * ctx.access().shots;
  out.t += 1;

  if (record) {
    record->t = state.t;
    record->chosen_index = i_t;
    record->margin = margin;
    record->incremented = incremented;
    record->kernel_terms = terms;
  }
  return out;
}

// h(x_i) over the training set, normalized by 1/(lambda T) for T completed
// steps; zero steps means the zero function. Noisy evaluations draw from the
// given stream in (i, j) order.
inline std::vector<double> pegasos_train_margins(const PegasosState& state,
                                                 const PegasosContext& ctx,
                                                 Stream* noisy_stream = nullptr) {
  const std::size_t m = ctx.data().size();
  std::vector<double> h(m, 0.0);
  const std::uint64_t steps = state.completed_steps();
  if (steps == 0) return h;
  const double scale = 1.0 / (state.lambda * static_cast<double>(steps));
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (state.alpha[j] == 0) continue;
      double kij = ctx.exact_entry(i, j);
      if (noisy_stream) kij = emulate_shots(kij, ctx.access().shots, *noisy_stream);
      sum += static_cast<double>(state.alpha[j]) * ctx.data().labels[j] * kij;
    }
    h[i] = scale * sum;
  }
  return h;
}

inline double decision_value_pegasos(const PegasosState& state, const LabeledSet& data,
                                     const std::vector<double>& x_hat,
                                     const FeatureMapConfig& cfg, const KernelAccess& access = {}) {
  if (state.t < 2)
    throw std::invalid_argument("decision_value_pegasos: no completed steps yet");
  const Statevector psi_hat = feature_state(x_hat, cfg);
  const double scale = 1.0 / (state.lambda * static_cast<double>(state.completed_steps()));
  double sum = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (state.alpha[j] == 0) continue;
    double k = fidelity(psi_hat, feature_state(data.points[j], cfg));
    if (!access.exact()) {
      Stream rng = substream(access.seed, {rng_tags::kPredict, j});
      k = emulate_shots(k, access.shots, rng);
    }
    sum += static_cast<double>(state.alpha[j]) * data.labels[j] * k;
  }
  return scale * sum;
}

inline double hinge_loss_from_margins(const std::vector<double>& h, const std::vector<int>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) loss += std::max(0.0, 1.0 - y[i] * h[i]);
  return loss / static_cast<double>(h.size());
}

// (1/M) sum_i max{0, 1 - y_i h(x_i)}. In shots mode the kernel values behind
// h are fresh draws from a stream keyed by the current step, so diagnostics
// never disturb the training noise stream.
inline double hinge_loss(const PegasosState& state, const PegasosContext& ctx) {
  if (ctx.access().exact()) {
    return hinge_loss_from_margins(pegasos_train_margins(state, ctx), ctx.data().labels);
  }
  Stream trace = substream(ctx.access().seed, {rng_tags::kPegasosTrace, state.t});
  return hinge_loss_from_margins(pegasos_train_margins(state, ctx, &trace), ctx.data().labels);
}

// true iff the last consecutive loss difference is below tau
inline bool converged(const std::vector<double>& loss_trace, double tau) {
  if (loss_trace.size() < 2)
    throw std::invalid_argument("converged: need at least two loss values");
  const double d = loss_trace[loss_trace.size() - 1] - loss_trace[loss_trace.size() - 2];
  return std::fabs(d) < tau;
}

// Primal objective f(w) = (lambda/2)||w||^2 + sum_i max{0, 1 - y_i h(x_i)}
// with the kernelized norm; zero completed steps gives f = M.
inline double primal_objective(const PegasosState& state, const PegasosContext& ctx) {
  const std::size_t m = ctx.data().size();
  const std::uint64_t steps = state.completed_steps();
  if (steps == 0) return static_cast<double>(m);
  std::optional<Stream> noisy;
  if (!ctx.access().exact())
    noisy = substream(ctx.access().seed, {rng_tags::kPegasosObjective, state.t});
  const std::vector<double> h =
      pegasos_train_margins(state, ctx, noisy ? &*noisy : nullptr);
  const double scale = 1.0 / (state.lambda * static_cast<double>(steps));
  double quad = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    quad += static_cast<double>(state.alpha[i]) * ctx.data().labels[i] * h[i];
  quad *= scale;  // = ||w||^2 = (1/(lambda T))^2 sum_ij alpha_i alpha_j y_i y_j K_ij
  double f = 0.5 * state.lambda * quad;
  for (std::size_t i = 0; i < m; ++i) f += std::max(0.0, 1.0 - ctx.data().labels[i] * h[i]);
  return f;
}

struct PegasosTraceRow {
  std::uint64_t t = 0;
  int chosen_index = 0;
  double margin = 0.0;
  bool incremented = false;
  double hinge_loss = 0.0;
  unsigned __int128 cumulative_circuit_evals = 0;
};

struct PegasosRun {
  PegasosState state;
  std::vector<PegasosTraceRow> trace;
  std::vector<double> losses;
  std::uint64_t steps_to_convergence = 0;  // 0 if the cap was reached first
};

// Run up to max_steps steps, recording the loss trace; stops early when the
// consecutive-loss criterion |L_t - L_{t-1}| < tau fires (tau <= 0 disables).
inline PegasosRun run_pegasos(const LabeledSet& data, double lambda, std::uint64_t max_steps,
                              const KernelAccess& access, std::uint64_t seed,
                              const FeatureMapConfig& cfg, double tau = 0.0,
                              bool record_trace = true) {
  PegasosContext ctx(data, cfg, access, seed);
  PegasosRun run;
  run.state = PegasosState::initial(data.size(), lambda);
  for (std::uint64_t step = 0; step < max_steps; ++step) {
    StepRecord rec;
    run.state = pegasos_step(run.state, ctx, &rec);
    const double loss = hinge_loss(run.state, ctx);
    run.losses.push_back(loss);
    if (record_trace)
      run.trace.push_back({rec.t, rec.chosen_index, rec.margin, rec.incremented, loss,
                           run.state.circuit_evaluations});
    if (tau > 0.0 && run.losses.size() >= 2 && converged(run.losses, tau)) {
      run.steps_to_convergence = run.state.completed_steps();
      break;
    }
  }
  return run;
}

inline std::string pegasos_trace_to_csv(const std::vector<PegasosTraceRow>& trace) {
  std::string out = "t,chosen_index,margin,incremented,hinge_loss,cumulative_circuit_evals\n";
  for (const auto& row : trace) {
    out += std::to_string(row.t);
    out += ',';
    out += std::to_string(row.chosen_index);
    out += ',';
    out += format_double(row.margin);
    out += ',';
    out += row.incremented ? "1" : "0";
    out += ',';
    out += format_double(row.hinge_loss);
    out += ',';
    out += u128_to_string(row.cumulative_circuit_evals);
    out += '\n';
  }
  return out;
}

struct PegasosReference {
  std::vector<double> h_star;  // decision values on the training set
  double f_star = 0.0;         // primal objective of the reference
};

// Reference optimum from a long exact run with best-objective tracking.
inline PegasosReference reference_from_long_run(const LabeledSet& data, double lambda,
                                                std::uint64_t steps, std::uint64_t seed,
                                                const FeatureMapConfig& cfg) {
  PegasosContext ctx(data, cfg, KernelAccess{}, seed);
  PegasosState state = PegasosState::initial(data.size(), lambda);
  PegasosReference best;
  best.f_star = static_cast<double>(data.size());  // objective of the zero model
  best.h_star.assign(data.size(), 0.0);
  for (std::uint64_t step = 0; step < steps; ++step) {
    state = pegasos_step(state, ctx);
    const double f = primal_objective(state, ctx);
    if (f < best.f_star) {
      best.f_star = f;
      best.h_star = pegasos_train_margins(state, ctx);
    }
  }
  return best;
}

// Reference optimum from the hinge-loss dual: min (1/(2 lambda)) a'Qa - 1'a
// over 0 <= a <= 1, with w = (1/lambda) sum a_i y_i phi(x_i).
inline PegasosReference reference_from_hinge_dual(const LabeledSet& data, double lambda,
                                                  const FeatureMapConfig& cfg) {
  PegasosContext ctx(data, cfg, KernelAccess{}, 0);
  const std::size_t m = data.size();
  Eigen::MatrixXd q(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      q(i, j) = data.labels[i] * data.labels[j] * ctx.exact_entry(i, j) / lambda;
  const BoxQpResult qp = solve_box_qp(q, Eigen::VectorXd::Ones(m), 1.0);
  PegasosReference ref;
  ref.h_star.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      sum += qp.x(j) * data.labels[j] * ctx.exact_entry(i, j);
    ref.h_star[i] = sum / lambda;
  }
  double norm2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) norm2 += qp.x(i) * data.labels[i] * ref.h_star[i];
  ref.f_star = 0.5 * lambda * norm2;
  for (std::size_t i = 0; i < m; ++i)
    ref.f_star += std::max(0.0, 1.0 - data.labels[i] * ref.h_star[i]);
  return ref;
}

struct EpsDeltaReport {
  double epsilon = 0.0;  // max_i |h*(x_i) - h(x_i)|
  double delta = 0.0;    // |f* - f|
  double bound = 0.0;    // sqrt(2 delta / lambda)
  bool satisfied = false;
};

// Strong-convexity bound: the decision-function error of any iterate is at
// most sqrt(2 delta / lambda) for delta its objective gap.
inline EpsDeltaReport eps_delta_check(const PegasosState& state, const PegasosContext& ctx,
                                      const PegasosReference& reference) {
  if (reference.h_star.size() != ctx.data().size())
    throw std::invalid_argument("eps_delta_check: reference size mismatch");
  EpsDeltaReport report;
  const std::vector<double> h = pegasos_train_margins(state, ctx);
  for (std::size_t i = 0; i < h.size(); ++i)
    report.epsilon = std::max(report.epsilon, std::fabs(reference.h_star[i] - h[i]));
  report.delta = std::fabs(reference.f_star - primal_objective(state, ctx));
  report.bound = std::sqrt(2.0 * report.delta / state.lambda);
  report.satisfied = report.epsilon <= report.bound * (1.0 + 1e-9);
  return report;
}

}  // namespace qsvm
