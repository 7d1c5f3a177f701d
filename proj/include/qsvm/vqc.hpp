#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsvm/dataset.hpp"
#include "qsvm/io.hpp"
#include "qsvm/kernel.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/statevector.hpp"

namespace qsvm::vqc {

namespace rng_tags {
constexpr std::uint64_t kSpsaBatch = tag("spsa-batch");
constexpr std::uint64_t kSpsaDelta = tag("spsa-delta");
constexpr std::uint64_t kSpsaPlus = tag("spsa-plus");
constexpr std::uint64_t kSpsaMinus = tag("spsa-minus");
constexpr std::uint64_t kInit = tag("vqc-init");
}  // namespace rng_tags

struct VariationalModel {
  std::vector<double> theta;
  double bias = 0.0;
  FeatureMapConfig feature_cfg;
  VariationalConfig var_cfg;

  void validate() const {
    feature_cfg.validate();
    var_cfg.validate();
    if (feature_cfg.qubits != var_cfg.qubits)
      throw std::invalid_argument("VariationalModel: feature map and ansatz qubit counts differ");
    if (static_cast<int>(theta.size()) != var_cfg.parameter_count())
      throw std::invalid_argument("VariationalModel: theta length must equal parameter count");
  }
};

// Spall's standard gain constants; the step sizes are
// a_k = a/(k+1+A)^alpha_exp and c_k = c/(k+1)^gamma_exp.
struct SpsaSchedule {
  double a = 0.1;
  double c = 0.1;
  double big_a = 10.0;
  double alpha_exp = 0.602;
  double gamma_exp = 0.101;

  void validate() const {
    if (a <= 0 || c <= 0 || big_a <= 0 || alpha_exp <= 0 || gamma_exp <= 0)
      throw std::invalid_argument("SpsaSchedule: all constants must be positive");
    if (alpha_exp <= gamma_exp)
      throw std::invalid_argument("SpsaSchedule: alpha_exp must exceed gamma_exp");
  }

  double step_gain(std::uint64_t k) const { return a / std::pow(k + 1 + big_a, alpha_exp); }
  double perturbation_gain(std::uint64_t k) const { return c / std::pow(k + 1.0, gamma_exp); }
};

// h_theta(x) = <psi(x)| W(theta)' Z^q W(theta) |psi(x)>
inline double model_h(const VariationalModel& model, const std::vector<double>& x) {
  model.validate();
  return expectation_z_all(
      apply_variational(feature_state(x, model.feature_cfg), model.theta, model.var_cfg));
}

// Finite-shot estimate of h: the measurement outcome is +/-1 with
// P(+1) = (1+h)/2, so the sample mean over R shots is 2 Binomial(R, p)/R - 1.
inline double noisy_h(double h_exact, std::uint64_t shots, Stream& rng) {
  if (shots < 1) throw std::invalid_argument("noisy_h: shots must be >= 1");
  if (h_exact < -1.0 - 1e-12 || h_exact > 1.0 + 1e-12)
    throw std::invalid_argument("noisy_h: expectation outside [-1, 1]");
  const double p = std::min(1.0, std::max(0.0, 0.5 * (1.0 + h_exact)));
  const double n = binomial_draw(static_cast<double>(shots), p, rng);
  return 2.0 * n / static_cast<double>(shots) - 1.0;
}

// Caches the encoded feature states of a data set so repeated loss
// evaluations only pay for the variational part.
class VqcContext {
 public:
  VqcContext(const LabeledSet& data, const FeatureMapConfig& fcfg, const VariationalConfig& vcfg)
      : data_(data), var_cfg_(vcfg) {
    data.validate();
    fcfg.validate();
    vcfg.validate();
    if (data.dimension() != fcfg.qubits)
      throw std::invalid_argument("VqcContext: feature dimension must equal qubit count");
    states_.reserve(data.size());
    for (const auto& x : data.points) states_.push_back(feature_state(x, fcfg));
  }

  const LabeledSet& data() const { return data_; }
  const VariationalConfig& var_cfg() const { return var_cfg_; }

  double h(const std::vector<double>& theta, std::size_t i) const {
    return expectation_z_all(apply_variational(states_[i], theta, var_cfg_));
  }

 private:
  const LabeledSet& data_;
  VariationalConfig var_cfg_;
  std::vector<Statevector> states_;
};

inline double clamp_probability(double p) {
  return std::min(1.0 - 1e-6, std::max(1e-6, p));
}

// Mean cross-entropy over the given batch with p_+ = clamp((1 + h + b)/2);
// h is exact when shots == 0, otherwise a fresh finite-shot draw per point.
inline double cross_entropy_loss(const VqcContext& ctx, const std::vector<double>& theta,
                                 double bias, const std::vector<std::size_t>& batch,
                                 std::uint64_t shots, Stream* rng) {
  if (batch.empty()) throw std::invalid_argument("cross_entropy_loss: empty batch");
  double loss = 0.0;
  for (std::size_t i : batch) {
    double h = ctx.h(theta, i);
    if (shots > 0) h = noisy_h(h, shots, *rng);
    const double p_plus = clamp_probability(0.5 * (1.0 + h + bias));
    loss -= (ctx.data().labels[i] > 0) ? std::log(p_plus) : std::log(1.0 - p_plus);
  }
  return loss / static_cast<double>(batch.size());
}

inline double cross_entropy_loss(const VariationalModel& model, const LabeledSet& batch,
                                 std::uint64_t shots = 0, Stream* rng = nullptr) {
  VqcContext ctx(batch, model.feature_cfg, model.var_cfg);
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return cross_entropy_loss(ctx, model.theta, model.bias, all, shots, rng);
}

inline std::vector<std::size_t> sample_batch(std::size_t m, std::size_t batch_size, Stream& rng) {
  if (batch_size > m) throw std::invalid_argument("sample_batch: batch larger than data set");
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  for (std::size_t i = 0; i < batch_size; ++i)
    std::swap(idx[i], idx[i + rng.next_below(m - i)]);
  idx.resize(batch_size);
  return idx;
}

struct SpsaStepInfo {
  double loss_plus = 0.0;
  double loss_minus = 0.0;
  std::uint64_t circuit_executions = 0;  // 2 * batch_size
};

// One simultaneous-perturbation step. Both side evaluations share the batch
// but draw shot noise from independent streams; the bias is perturbed and
// updated alongside theta unless train_bias is false.
inline VariationalModel spsa_step(const VariationalModel& model, const VqcContext& ctx,
                                  std::size_t batch_size, std::uint64_t k,
                                  const SpsaSchedule& schedule, std::uint64_t shots,
                                  std::uint64_t seed, bool train_bias = true,
                                  SpsaStepInfo* info = nullptr) {
  model.validate();
  schedule.validate();
  const std::size_t d = model.theta.size();

  Stream batch_rng = substream(seed, {rng_tags::kSpsaBatch, k});
  const std::vector<std::size_t> batch = sample_batch(ctx.data().size(), batch_size, batch_rng);

  Stream delta_rng = substream(seed, {rng_tags::kSpsaDelta, k});
  std::vector<double> delta(d + 1, 0.0);
  for (std::size_t i = 0; i < d; ++i) delta[i] = (delta_rng.next_u64() & 1) ? 1.0 : -1.0;
  delta[d] = train_bias ? ((delta_rng.next_u64() & 1) ? 1.0 : -1.0) : 0.0;

  const double ck = schedule.perturbation_gain(k);
  const double ak = schedule.step_gain(k);

  std::vector<double> theta_plus = model.theta, theta_minus = model.theta;
  for (std::size_t i = 0; i < d; ++i) {
    theta_plus[i] += ck * delta[i];
    theta_minus[i] -= ck * delta[i];
  }
  const double bias_plus = model.bias + ck * delta[d];
  const double bias_minus = model.bias - ck * delta[d];

  Stream plus_rng = substream(seed, {rng_tags::kSpsaPlus, k});
  Stream minus_rng = substream(seed, {rng_tags::kSpsaMinus, k});
  const double loss_plus = cross_entropy_loss(ctx, theta_plus, bias_plus, batch, shots, &plus_rng);
  const double loss_minus =
      cross_entropy_loss(ctx, theta_minus, bias_minus, batch, shots, &minus_rng);

  const double scale = (loss_plus - loss_minus) / (2.0 * ck);
  VariationalModel next = model;
  for (std::size_t i = 0; i < d; ++i) next.theta[i] -= ak * scale * delta[i];
  if (train_bias) next.bias -= ak * scale * delta[d];

  if (info) {
    info->loss_plus = loss_plus;
    info->loss_minus = loss_minus;
    info->circuit_executions = 2 * static_cast<std::uint64_t>(batch_size);
  }
  return next;
}

struct VqcTrainConfig {
  std::uint64_t max_steps = 1000;
  std::size_t batch_size = 5;
  std::uint64_t shots = 0;  // 0 = statevector mode
  SpsaSchedule schedule;
  std::uint64_t seed = 0;
  double param_tol = 1e-4;  // convergence when ||theta_k - theta_{k-1}||/d < tol
  bool train_bias = true;
};

struct VqcTraceRow {
  std::uint64_t step = 0;
  double loss = 0.0;         // mean of the two SPSA side evaluations
  double param_delta = 0.0;  // ||theta_k - theta_{k-1}|| / d
  unsigned __int128 cumulative_circuit_evals = 0;
};

struct VqcTrainResult {
  VariationalModel model;
  std::vector<VqcTraceRow> trace;
  std::uint64_t steps_to_convergence = 0;  // 0 if the cap was reached first
  unsigned __int128 circuit_evaluations = 0;
};

inline VqcTrainResult train(const VariationalModel& model0, const LabeledSet& data,
                            const VqcTrainConfig& cfg) {
  VqcContext ctx(data, model0.feature_cfg, model0.var_cfg);
  VqcTrainResult result;
  result.model = model0;
  const double d = static_cast<double>(model0.theta.size());
  for (std::uint64_t k = 0; k < cfg.max_steps; ++k) {
    SpsaStepInfo info;
    VariationalModel next = spsa_step(result.model, ctx, cfg.batch_size, k, cfg.schedule,
                                      cfg.shots, cfg.seed, cfg.train_bias, &info);
    double delta2 = 0.0;
    for (std::size_t i = 0; i < next.theta.size(); ++i) {
      const double diff = next.theta[i] - result.model.theta[i];
      delta2 += diff * diff;
    }
    const double param_delta = std::sqrt(delta2) / d;
    result.circuit_evaluations += cfg.shots > 0
                                      ? static_cast<unsigned __int128>(info.circuit_executions) * cfg.shots
                                      : info.circuit_executions;
    result.model = next;
    result.trace.push_back({k, 0.5 * (info.loss_plus + info.loss_minus), param_delta,
                            result.circuit_evaluations});
    if (param_delta < cfg.param_tol) {
      result.steps_to_convergence = k + 1;
      break;
    }
  }
  return result;
}

struct RefineOptions {
  double learning_rate = 0.05;
  double fd_step = 1e-4;     // central-difference half step
  double param_tol = 1e-6;   // ||delta theta||/d
  std::uint64_t max_iterations = 20000;
};

struct RefineResult {
  std::vector<double> params;
  bool converged = false;
  std::uint64_t iterations = 0;
};

// Plain full-gradient descent with central finite differences on an
// arbitrary loss; the convergence metric divides by metric_count, matching
// the SPSA trainer's ||delta theta||/d rule.
inline RefineResult gradient_descent_refine(
    const std::function<double(const std::vector<double>&)>& loss, std::vector<double> params,
    const RefineOptions& opts, std::size_t metric_count = 0) {
  if (metric_count == 0 || metric_count > params.size()) metric_count = params.size();
  RefineResult result;
  const std::size_t n = params.size();
  std::vector<double> grad(n);
  for (std::uint64_t it = 0; it < opts.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double keep = params[i];
      params[i] = keep + opts.fd_step;
      const double up = loss(params);
      params[i] = keep - opts.fd_step;
      const double down = loss(params);
      params[i] = keep;
      grad[i] = (up - down) / (2.0 * opts.fd_step);
    }
    double delta2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double step = opts.learning_rate * grad[i];
      params[i] -= step;
      if (i < metric_count) delta2 += step * step;
    }
    result.iterations = it + 1;
    if (std::sqrt(delta2) / static_cast<double>(metric_count) < opts.param_tol) {
      result.converged = true;
      break;
    }
  }
  result.params = std::move(params);
  return result;
}

// Statevector-mode reference: full-batch gradient descent on the exact loss,
// started from the noisy-trained parameters.
inline RefineResult reference_refine(const VariationalModel& model, const LabeledSet& data,
                                     const RefineOptions& opts = {}, bool train_bias = true) {
  VqcContext ctx(data, model.feature_cfg, model.var_cfg);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::size_t d = model.theta.size();

  std::vector<double> params = model.theta;
  if (train_bias) params.push_back(model.bias);
  auto loss = [&](const std::vector<double>& p) {
    const std::vector<double> theta(p.begin(), p.begin() + d);
    const double bias = train_bias ? p[d] : model.bias;
    return cross_entropy_loss(ctx, theta, bias, all, 0, nullptr);
  };
  return gradient_descent_refine(loss, std::move(params), opts, d);
}

inline VariationalModel refined_model(const VariationalModel& model, const RefineResult& refine,
                                      bool train_bias = true) {
  VariationalModel out = model;
  const std::size_t d = model.theta.size();
  out.theta.assign(refine.params.begin(), refine.params.begin() + d);
  if (train_bias && refine.params.size() > d) out.bias = refine.params[d];
  return out;
}

inline std::string vqc_trace_to_csv(const std::vector<VqcTraceRow>& trace) {
  std::string out = "step,loss,param_delta,cumulative_circuit_evals\n";
  for (const auto& row : trace) {
    out += std::to_string(row.step);
    out += ',';
    out += format_double(row.loss);
    out += ',';
    out += format_double(row.param_delta);
    out += ',';
    out += u128_to_string(row.cumulative_circuit_evals);
    out += '\n';
  }
  return out;
}

inline nlohmann::json model_to_json(const VariationalModel& model) {
  nlohmann::json j;
  j["theta"] = model.theta;
  j["bias"] = model.bias;
  j["feature_map"] = {{"qubits", model.feature_cfg.qubits},
                      {"repetitions", model.feature_cfg.repetitions},
                      {"angle_scale", model.feature_cfg.angle_scale}};
  j["ansatz"] = {{"qubits", model.var_cfg.qubits},
                 {"layers", model.var_cfg.layers},
                 {"family", "ry-linear-cx"}};
  return j;
}

inline VariationalModel model_from_json(const nlohmann::json& j) {
  VariationalModel model;
  model.theta = j.at("theta").get<std::vector<double>>();
  model.bias = j.at("bias").get<double>();
  model.feature_cfg.qubits = j.at("feature_map").at("qubits").get<int>();
  model.feature_cfg.repetitions = j.at("feature_map").at("repetitions").get<int>();
  model.feature_cfg.angle_scale = j.at("feature_map").at("angle_scale").get<double>();
  model.var_cfg.qubits = j.at("ansatz").at("qubits").get<int>();
  model.var_cfg.layers = j.at("ansatz").at("layers").get<int>();
  model.validate();
  return model;
}

}  // namespace qsvm::vqc
