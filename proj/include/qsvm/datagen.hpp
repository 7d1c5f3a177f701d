#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qsvm/dataset.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/statevector.hpp"

namespace qsvm::datagen {

namespace rng_tags {
constexpr std::uint64_t kSample = tag("datagen-sample");
constexpr std::uint64_t kTheta = tag("datagen-theta");
}  // namespace rng_tags

enum class LabelOutcome { kNegative, kPositive, kDiscard };

// The three labelling branches, taken verbatim: a sample lands in the
// negative region, the positive region, the random band (mu < 0 only, fair
// coin), or the excluded margin band (mu > 0 only, discard).
inline LabelOutcome label_rule(double y_tilde, double mu, Stream& rng) {
  const double half = 0.5 * mu;
  if (y_tilde <= -half && y_tilde < +half) return LabelOutcome::kNegative;
  if (y_tilde >= +half && y_tilde > -half) return LabelOutcome::kPositive;
  if (y_tilde >= +half && y_tilde <= -half)
    return rng.next_double() > 0.5 ? LabelOutcome::kPositive : LabelOutcome::kNegative;
  return LabelOutcome::kDiscard;
}

struct DataGenConfig {
  int m = 100;       // even
  double mu = 0.1;   // positive: separable, negative: overlapping
  FeatureMapConfig feature_cfg;
  int variational_layers = -1;  // -1: identity variational part; >= 0: theta ~ U[-pi, pi]
  std::uint64_t seed = 0;
  bool verbatim_guard = false;  // stop on the raw while-guard instead of exact quotas

  void validate() const {
    feature_cfg.validate();
    if (m < 2 || m % 2 != 0) throw std::invalid_argument("DataGenConfig: M must be even and >= 2");
    if (std::fabs(mu) >= 2.0) throw std::invalid_argument("DataGenConfig: |mu| must be < 2");
  }
};

struct GeneratedData {
  LabeledSet data;
  std::vector<double> generator_theta;  // empty for the identity variational part
};

// Rejection-sample x ~ U[0,1]^q against a fixed generator decision function
// h until both class quotas M/2 are met. Every sample consumes its draws in
// a fixed order whether kept or not, so the output is a pure function of the
// seed. The verbatim mode reproduces the raw while-guard instead, which can
// stop one sample past a quota and leave the classes unbalanced.
inline GeneratedData generate(const DataGenConfig& cfg) {
  cfg.validate();
  const int q = cfg.feature_cfg.qubits;

  GeneratedData out;
  VariationalConfig vcfg;
  if (cfg.variational_layers >= 0) {
    vcfg.qubits = q;
    vcfg.layers = cfg.variational_layers;
    Stream theta_rng = substream(cfg.seed, {rng_tags::kTheta});
    out.generator_theta.resize(vcfg.parameter_count());
    for (double& t : out.generator_theta)
      t = (2.0 * theta_rng.next_double() - 1.0) * 3.14159265358979323846;
  }

  auto decision = [&](const std::vector<double>& x) {
    Statevector psi = feature_state(x, cfg.feature_cfg);
    if (cfg.variational_layers >= 0)
      psi = apply_variational(std::move(psi), out.generator_theta, vcfg);
    return expectation_z_all(psi);
  };

  Stream rng = substream(cfg.seed, {rng_tags::kSample});
  const int quota = cfg.m / 2;
  int n_neg = 0, n_pos = 0;
  std::uint64_t rejected = 0;
  const std::uint64_t rejection_cap = 1000000ull * static_cast<std::uint64_t>(cfg.m);

  while (cfg.verbatim_guard ? (n_neg <= quota && n_pos <= quota)
                            : (n_neg < quota || n_pos < quota)) {
    std::vector<double> x(q);
    for (double& v : x) v = rng.next_double();
    const double y_tilde = decision(x);
    const LabelOutcome outcome = label_rule(y_tilde, cfg.mu, rng);
    if (outcome == LabelOutcome::kDiscard) {
      if (++rejected > rejection_cap)
        throw std::runtime_error("datagen: rejection cap reached (degenerate h or extreme mu)");
      continue;
    }
    const int label = outcome == LabelOutcome::kPositive ? 1 : -1;
    if (!cfg.verbatim_guard) {
      const int count = label > 0 ? n_pos : n_neg;
      if (count >= quota) {
        if (++rejected > rejection_cap)
          throw std::runtime_error("datagen: rejection cap reached (degenerate h or extreme mu)");
        continue;  // class full; sample rejected but its draws consumed
      }
    }
    out.data.points.push_back(std::move(x));
    out.data.labels.push_back(label);
    (label > 0 ? n_pos : n_neg) += 1;
  }
  out.data.validate();
  return out;
}

}  // namespace qsvm::datagen
