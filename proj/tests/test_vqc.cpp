#include <catch2/catch.hpp>

#include <cmath>

#include "oracles.hpp"
#include "qsvm/datagen.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/vqc.hpp"

using namespace qsvm;
using namespace qsvm::vqc;

namespace {

VariationalModel make_model(int q, int layers, double bias = 0.0) {
  VariationalModel m;
  m.feature_cfg.qubits = q;
  m.var_cfg.qubits = q;
  m.var_cfg.layers = layers;
  m.theta.assign(m.var_cfg.parameter_count(), 0.0);
  m.bias = bias;
  return m;
}

LabeledSet tiny_set(int m, int dim, std::uint64_t seed) {
  Stream s = substream(seed, {tag("test-vqc-data")});
  LabeledSet data;
  for (int i = 0; i < m; ++i) {
    std::vector<double> x(dim);
    for (double& v : x) v = s.next_double();
    data.points.push_back(x);
    data.labels.push_back(i % 2 == 0 ? 1 : -1);
  }
  return data;
}

}  // namespace

TEST_CASE("model_h matches the dense oracle", "[vqc]") {
  Stream s = substream(61, {tag("test-vqc-h")});
  for (int q : {1, 2, 3}) {
    VariationalModel m = make_model(q, 1);
    for (double& t : m.theta) t = 6.0 * s.next_double() - 3.0;
    std::vector<double> x(q);
    for (double& v : x) v = s.next_double();

    auto dense = oracle::feature_state_dense(x, m.feature_cfg);
    dense = oracle::variational_dense(dense, m.theta, m.var_cfg);
    double expected = 0.0;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      const double p = std::norm(dense[i]);
      expected += (std::popcount(i) & 1) ? -p : p;
    }
    const double h = model_h(m, x);
    REQUIRE(h == Approx(expected).margin(1e-12));
    REQUIRE(std::fabs(h) <= 1.0 + 1e-12);
  }
}

TEST_CASE("uniform superposition has zero z expectation", "[vqc]") {
  VariationalModel m = make_model(3, 0);
  m.feature_cfg.repetitions = 1;  // a single H layer survives when all angles vanish
  REQUIRE(model_h(m, {0.0, 0.0, 0.0}) == Approx(0.0).margin(1e-12));
}

TEST_CASE("noisy_h endpoints and spread", "[vqc]") {
  Stream s = substream(67, {tag("test-noisy-h")});
  for (int i = 0; i < 100; ++i) {
    REQUIRE(noisy_h(1.0, 32, s) == 1.0);
    REQUIRE(noisy_h(-1.0, 32, s) == -1.0);
  }
  const int draws = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = noisy_h(0.0, 400, s);
    REQUIRE(v >= -1.0);
    REQUIRE(v <= 1.0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sum2 / draws - mean * mean);
  REQUIRE(std::fabs(mean) < 5.0 * 0.05 / std::sqrt(static_cast<double>(draws)));
  REQUIRE(sd == Approx(0.05).epsilon(0.10));  // 1/sqrt(400)
  REQUIRE_THROWS_AS(noisy_h(1.5, 16, s), std::invalid_argument);
}

TEST_CASE("cross entropy special values", "[vqc]") {
  // h + b = 0 for every point gives ln 2
  VariationalModel m = make_model(2, 0);
  m.feature_cfg.repetitions = 1;
  LabeledSet flat;
  flat.points = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
  flat.labels = {1, -1, 1};
  REQUIRE(cross_entropy_loss(m, flat) == Approx(std::log(2.0)).margin(1e-12));

  // confidently correct: p clamps at 1 - 1e-6
  VariationalModel confident = make_model(2, 0, 5.0);
  LabeledSet pos = flat;
  pos.labels = {1, 1, 1};
  REQUIRE(cross_entropy_loss(confident, pos) == Approx(-std::log(1.0 - 1e-6)).margin(1e-12));

  // three-point batch against a hand-built sum
  Stream s = substream(71, {tag("test-xent")});
  VariationalModel rnd = make_model(2, 1, 0.2);
  for (double& t : rnd.theta) t = 2.0 * s.next_double() - 1.0;
  LabeledSet batch = tiny_set(3, 2, 72);
  double manual = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double h = model_h(rnd, batch.points[i]);
    const double p = std::min(1.0 - 1e-6, std::max(1e-6, 0.5 * (1.0 + h + rnd.bias)));
    manual -= batch.labels[i] > 0 ? std::log(p) : std::log(1.0 - p);
  }
  manual /= 3.0;
  REQUIRE(cross_entropy_loss(rnd, batch) == Approx(manual).margin(1e-12));
}

TEST_CASE("spsa step with equal side losses leaves parameters unchanged", "[vqc]") {
  // bias = 5 clamps both side evaluations to the same loss
  VariationalModel m = make_model(2, 1, 5.0);
  LabeledSet data = tiny_set(8, 2, 73);
  for (int& y : data.labels) y = 1;
  VqcContext ctx(data, m.feature_cfg, m.var_cfg);
  SpsaStepInfo info;
  const VariationalModel next = spsa_step(m, ctx, 5, 0, {}, 0, 11, true, &info);
  REQUIRE(info.loss_plus == info.loss_minus);
  REQUIRE(next.theta == m.theta);
  REQUIRE(next.bias == m.bias);
  REQUIRE(info.circuit_executions == 10);  // 2 * batch of 5
}

TEST_CASE("spsa trajectory is reproducible", "[vqc]") {
  LabeledSet data = tiny_set(12, 2, 74);
  VariationalModel m0 = make_model(2, 1);
  Stream init = substream(75, {tag("test-init")});
  for (double& t : m0.theta) t = 2.0 * init.next_double() - 1.0;
  VqcTrainConfig cfg;
  cfg.max_steps = 40;
  cfg.shots = 64;
  cfg.seed = 19;
  const VqcTrainResult a = train(m0, data, cfg);
  const VqcTrainResult b = train(m0, data, cfg);
  REQUIRE(a.model.theta == b.model.theta);
  REQUIRE(a.model.bias == b.model.bias);
  for (std::size_t i = 0; i < a.trace.size(); ++i) REQUIRE(a.trace[i].loss == b.trace[i].loss);
}

TEST_CASE("spsa gradient aligns with the true gradient on a planted quadratic", "[vqc]") {
  // L(p) = sum c_i (p_i - m_i)^2; average the SPSA estimator over many draws
  const std::vector<double> c{1.0, 2.0, 0.5, 3.0};
  const std::vector<double> mins{0.3, -0.2, 0.9, 0.1};
  const std::vector<double> p0{1.0, 1.0, -1.0, 0.5};
  auto loss = [&](const std::vector<double>& p) {
    double l = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) l += c[i] * (p[i] - mins[i]) * (p[i] - mins[i]);
    return l;
  };
  std::vector<double> true_grad(4);
  for (int i = 0; i < 4; ++i) true_grad[i] = 2.0 * c[i] * (p0[i] - mins[i]);

  Stream s = substream(77, {tag("test-spsa-grad")});
  const double ck = 0.1;
  std::vector<double> avg(4, 0.0);
  const int draws = 1000;
  for (int d = 0; d < draws; ++d) {
    std::vector<double> delta(4);
    for (double& v : delta) v = (s.next_u64() & 1) ? 1.0 : -1.0;
    std::vector<double> plus = p0, minus = p0;
    for (int i = 0; i < 4; ++i) {
      plus[i] += ck * delta[i];
      minus[i] -= ck * delta[i];
    }
    const double g = (loss(plus) - loss(minus)) / (2.0 * ck);
    for (int i = 0; i < 4; ++i) avg[i] += g * delta[i];
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < 4; ++i) {
    avg[i] /= draws;
    dot += avg[i] * true_grad[i];
    na += avg[i] * avg[i];
    nb += true_grad[i] * true_grad[i];
  }
  REQUIRE(dot / std::sqrt(na * nb) >= 0.9);
}

TEST_CASE("gradient descent refine finds a planted quadratic minimum", "[vqc]") {
  const std::vector<double> mins{0.4, -1.2, 2.0};
  auto loss = [&](const std::vector<double>& p) {
    double l = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) l += (p[i] - mins[i]) * (p[i] - mins[i]);
    return l;
  };
  RefineOptions opts;
  opts.learning_rate = 0.2;
  const RefineResult res = gradient_descent_refine(loss, {0.0, 0.0, 0.0}, opts);
  REQUIRE(res.converged);
  for (int i = 0; i < 3; ++i) REQUIRE(res.params[i] == Approx(mins[i]).margin(1e-4));

  // starting at the minimum converges immediately
  const RefineResult at_min = gradient_descent_refine(loss, mins, opts);
  REQUIRE(at_min.converged);
  REQUIRE(at_min.iterations == 1);
}

TEST_CASE("central differences are step-size stable on the smooth loss", "[vqc]") {
  LabeledSet data = tiny_set(6, 2, 79);
  VariationalModel m = make_model(2, 1, 0.1);
  Stream s = substream(80, {tag("test-fd")});
  for (double& t : m.theta) t = 2.0 * s.next_double() - 1.0;
  VqcContext ctx(data, m.feature_cfg, m.var_cfg);
  std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  auto loss_at = [&](std::vector<double> theta) {
    return cross_entropy_loss(ctx, theta, m.bias, all, 0, nullptr);
  };
  for (std::size_t i = 0; i < m.theta.size(); ++i) {
    auto diff = [&](double step) {
      std::vector<double> t = m.theta;
      t[i] += step;
      const double up = loss_at(t);
      t[i] -= 2.0 * step;
      const double down = loss_at(t);
      return (up - down) / (2.0 * step);
    };
    const double coarse = diff(1e-4);
    const double fine = diff(1e-5);
    const double scale = std::max({std::fabs(coarse), std::fabs(fine), 1e-3});
    REQUIRE(std::fabs(coarse - fine) / scale < 1e-5);
  }
}

TEST_CASE("training respects the step cap and keeps finite losses", "[vqc]") {
  LabeledSet data = tiny_set(10, 2, 81);
  VariationalModel m0 = make_model(2, 1);
  VqcTrainConfig cfg;
  cfg.max_steps = 0;
  const VqcTrainResult unchanged = train(m0, data, cfg);
  REQUIRE(unchanged.model.theta == m0.theta);
  REQUIRE(unchanged.trace.empty());

  cfg.max_steps = 60;
  cfg.shots = 16;
  cfg.seed = 5;
  const VqcTrainResult r = train(m0, data, cfg);
  for (const auto& row : r.trace) {
    REQUIRE(std::isfinite(row.loss));
    REQUIRE(std::isfinite(row.param_delta));
  }
  // budget: 2 * batch * shots per step
  const unsigned __int128 expected =
      static_cast<unsigned __int128>(2) * 5 * 16 * r.trace.size();
  REQUIRE(r.circuit_evaluations == expected);
}

TEST_CASE("reference refine reaches a stationary point of the exact loss", "[vqc]") {
  const datagen::DataGenConfig gen = [] {
    datagen::DataGenConfig cfg;
    cfg.m = 12;
    cfg.mu = 0.1;
    cfg.feature_cfg.qubits = 2;
    cfg.variational_layers = 1;
    cfg.seed = 21;
    return cfg;
  }();
  const LabeledSet data = datagen::generate(gen).data;
  VariationalModel m = make_model(2, 1, 0.0);
  Stream s = substream(83, {tag("test-refine")});
  for (double& t : m.theta) t = 2.0 * s.next_double() - 1.0;

  const RefineResult res = reference_refine(m, data, {});
  REQUIRE(res.converged);
  const VariationalModel refined = refined_model(m, res);

  // the refined point does not improve under further descent steps
  const double base = cross_entropy_loss(refined, data);
  VqcContext ctx(data, refined.feature_cfg, refined.var_cfg);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t i = 0; i < refined.theta.size(); ++i) {
    for (double step : {1e-3, -1e-3}) {
      std::vector<double> t = refined.theta;
      t[i] += step;
      REQUIRE(cross_entropy_loss(ctx, t, refined.bias, all, 0, nullptr) >= base - 1e-5);
    }
  }
}

TEST_CASE("model JSON round trip", "[vqc]") {
  VariationalModel m = make_model(3, 2, -0.25);
  Stream s = substream(85, {tag("test-model-json")});
  for (double& t : m.theta) t = s.next_double();
  const VariationalModel back = model_from_json(model_to_json(m));
  REQUIRE(back.theta == m.theta);
  REQUIRE(back.bias == m.bias);
  REQUIRE(back.var_cfg.layers == m.var_cfg.layers);
  REQUIRE(back.feature_cfg.repetitions == m.feature_cfg.repetitions);
}
