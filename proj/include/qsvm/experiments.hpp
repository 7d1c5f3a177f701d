#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsvm/datagen.hpp"
#include "qsvm/dataset.hpp"
#include "qsvm/dual.hpp"
#include "qsvm/fit.hpp"
#include "qsvm/io.hpp"
#include "qsvm/kernel.hpp"
#include "qsvm/manifest.hpp"
#include "qsvm/parallel.hpp"
#include "qsvm/pegasos.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/svg.hpp"
#include "qsvm/vqc.hpp"

namespace qsvm::experiments {

namespace rng_tags {
constexpr std::uint64_t kData = tag("exp-data");
constexpr std::uint64_t kNoise = tag("exp-noise");
constexpr std::uint64_t kRun = tag("exp-run");
constexpr std::uint64_t kInit = tag("exp-init");
constexpr std::uint64_t kTrial = tag("exp-trial");
constexpr std::uint64_t kReference = tag("exp-reference");
}  // namespace rng_tags

struct ExperimentResult {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  nlohmann::json fit_json;
  std::optional<ScalingFit> plot_fit;
  std::string plot_title, x_label, y_label;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "dual-eps", "dual-m",  "pegasos-eps", "pegasos-m",    "vqc-eps",
      "latala",   "daniel",  "eps-delta",   "pegasos-noise"};
  return names;
}

inline const std::map<std::string, std::map<std::string, std::string>>& experiment_schemas() {
  static const std::map<std::string, std::map<std::string, std::string>> schemas{
      {"dual-eps",
       {{"m", "64"},
        {"qubits", "4"},
        {"reps", "4"},
        {"mu", "-0.1"},
        {"lambda", "0.1"},
        {"n", "20"},
        {"r_grid", "16384,32768,65536,131072,262144,524288,1048576,2097152"},
        {"seed", "1"}}},
      {"dual-m",
       {{"m_grid", "16,24,32,48,64,96"},
        {"eps0_grid", "0.05,0.1"},
        {"qubits", "4"},
        {"reps", "4"},
        {"mu", "-0.1"},
        {"lambda", "0.1"},
        {"n", "10"},
        {"r_grid",
         "4096,8192,16384,32768,65536,131072,262144,524288,1048576,2097152,4194304,8388608,"
         "16777216,33554432,67108864,134217728,268435456,536870912,1073741824"},
        {"seed", "1"}}},
      {"pegasos-eps",
       {{"m", "50"},
        {"qubits", "8"},
        {"reps", "4"},
        {"mu", "-0.1"},
        {"lambda", "0.002"},
        {"tau", "1e-4"},
        {"t_ref", "750"},
        {"t_cap", "750"},
        {"r_grid", "16,32,64,128,256,512,1024,2048,4096"},
        {"n", "10"},
        {"paired_indices", "false"},
        {"final_eval", "noisy"},
        {"seed", "1"}}},
      {"pegasos-m",
       {{"m_grid", "20,50,100,200"},
        {"qubits", "4"},
        {"reps", "4"},
        {"mu", "0.1"},
        {"lambda", "0.1"},
        {"tau", "1e-4"},
        {"t_cap", "4000"},
        {"n", "10"},
        {"seed", "1"}}},
      {"vqc-eps",
       {{"mode", "eps"},
        {"m", "50"},
        {"qubits", "4"},
        {"reps", "4"},
        {"mu", "0.3"},
        {"gen_layers", "0"},
        {"layers", "1"},
        {"t_train", "1000"},
        {"batch", "5"},
        {"r_grid", "4,8,16,32,64,128,256,512,1024,2048,4096"},
        {"n", "10"},
        {"spsa_a", "2"},
        {"spsa_c", "0.1"},
        {"spsa_big_a", "10"},
        {"spsa_alpha", "0.602"},
        {"spsa_gamma", "0.101"},
        {"init_range", "1.0"},
        {"train_bias", "false"},
        {"param_tol", "1e-4"},
        {"refine_lr", "0.05"},
        {"refine_fd", "1e-4"},
        {"refine_tol", "1e-6"},
        {"refine_cap", "20000"},
        {"t_cap_exact", "2000"},
        {"m_grid", "16,32,64,128"},
        {"layer_grid", "1,2,3,4"},
        {"seed", "1"}}},
      {"latala",
       {{"qubits", "4"},
        {"reps", "4"},
        {"mu", "-0.1"},
        {"m_for_r", "32"},
        {"r_grid", "100,1000,10000,100000"},
        {"m_grid", "8,16,32,64"},
        {"r_for_m", "10000"},
        {"n", "30"},
        {"seed", "1"}}},
      {"daniel",
       {{"trials", "100"},
        {"m_min", "8"},
        {"m_max", "32"},
        {"lambda", "0.1"},
        {"eps_fraction", "0.5"},
        {"seed", "1"}}},
      {"eps-delta",
       {{"m", "50"},
        {"qubits", "4"},
        {"reps", "4"},
        {"mu", "-0.1"},
        {"lambdas", "0.1,0.001"},
        {"checkpoints_per_lambda", "10"},
        {"t_max", "1024"},
        {"t_ref", "100000"},
        {"reference", "long-run"},
        {"seed", "1"}}},
      {"pegasos-noise",
       {{"m", "50"},
        {"qubits", "4"},
        {"reps", "4"},
        {"mu", "-0.1"},
        {"lambda", "0.1"},
        {"t_steps", "250"},
        {"r_grid", "128,1024,8192"},
        {"n", "20"},
        {"coef_scaling", "inv-lambda-t"},
        {"seed", "1"}}}};
  return schemas;
}

inline Config resolve_experiment_config(const std::string& name, const Config& user) {
  const auto& schemas = experiment_schemas();
  auto it = schemas.find(name);
  if (it == schemas.end()) throw ConfigError("unknown experiment '" + name + "'");
  return Config::resolve(it->second, user, "experiment " + name);
}

namespace detail {

inline FeatureMapConfig feature_config(const Config& cfg) {
  FeatureMapConfig f;
  f.qubits = static_cast<int>(cfg.get_int("qubits"));
  f.repetitions = static_cast<int>(cfg.get_int("reps"));
  return f;
}

inline LabeledSet make_data(const Config& cfg, int m, std::uint64_t master, std::uint64_t rep,
                            int generator_layers = -1) {
  datagen::DataGenConfig gen;
  gen.m = m;
  gen.mu = cfg.get_double("mu");
  gen.feature_cfg = feature_config(cfg);
  gen.variational_layers = generator_layers;
  gen.seed = derive_key(master, {rng_tags::kData, rep});
  return datagen::generate(gen).data;
}

// h on the training set from a coefficient vector and kernel matrix rows
inline std::vector<double> decision_values_from_matrix(const std::vector<double>& alpha,
                                                       const std::vector<int>& y,
                                                       const KernelMatrix& k) {
  const int m = k.size;
  std::vector<double> h(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += alpha[j] * y[j] * k.at(i, j);
    h[i] = acc;
  }
  return h;
}

inline double max_abs_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::fabs(a[i] - b[i]));
  return out;
}

inline nlohmann::json fit_to_json(const ScalingFit& fit) {
  nlohmann::json j;
  j["exponent"] = fit.exponent;
  j["stderr"] = fit.exponent_stderr;
  j["intercept"] = fit.intercept;
  j["fit_residual"] = fit.fit_residual;
  j["n"] = fit.n_runs;
  j["excluded"] = fit.excluded;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : fit.points)
    pts.push_back({{"x", p.x},
                   {"mean", p.mean},
                   {"p15_9", p.p159},
                   {"p84_1", p.p841},
                   {"count", p.count}});
  j["points"] = pts;
  return j;
}

inline nlohmann::json base_fit_json(const std::string& name, const Config& cfg) {
  nlohmann::json j;
  j["experiment"] = name;
  j["master_seed"] = cfg.get_u64("seed");
  j["tool_version"] = kToolVersion;
  j["config"] = cfg.values();
  return j;
}

// ---------------------------------------------------------------- dual-eps

inline ExperimentResult run_dual_eps(const Config& cfg, unsigned threads) {
  const int m = static_cast<int>(cfg.get_int("m"));
  const double lambda = cfg.get_double("lambda");
  const std::uint64_t master = cfg.get_u64("seed");
  const auto r_grid = cfg.get_u64_list("r_grid");
  const std::size_t n = cfg.get_u64("n");
  const FeatureMapConfig fcfg = feature_config(cfg);

  struct Cell {
    double eps = 0.0;
    bool nonconvex = false;
  };
  std::vector<std::vector<Cell>> cells(n, std::vector<Cell>(r_grid.size()));

  parallel_for(n, threads, [&](std::size_t rep) {
    const LabeledSet data = make_data(cfg, m, master, rep);
    const KernelMatrix exact = kernel_matrix(data, fcfg, {});
    const DualSolution ref = solve_dual(exact, data.labels, lambda);
    const std::vector<double> h_inf =
        decision_values_from_matrix(ref.alpha, data.labels, exact);
    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
      const ShotConfig shots{r_grid[ri], derive_key(master, {rng_tags::kNoise, rep, ri})};
      const KernelMatrix noisy = kernel_matrix(data, fcfg, shots);
      try {
        const DualSolution sol = solve_dual(noisy, data.labels, lambda);
        const std::vector<double> h_r =
            decision_values_from_matrix(sol.alpha, data.labels, noisy);
        cells[rep][ri].eps = max_abs_difference(h_r, h_inf);
      } catch (const NonConvexError&) {
        cells[rep][ri].nonconvex = true;
      }
    }
  });

  ExperimentResult out;
  out.name = "dual-eps";
  out.header = {"r_shots", "rep", "epsilon", "status"};
  std::vector<std::pair<double, double>> samples;
  std::size_t excluded = 0;
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
    for (std::size_t rep = 0; rep < n; ++rep) {
      const Cell& c = cells[rep][ri];
      std::string status = "ok";
      if (c.nonconvex) {
        status = "nonconvex";
        ++excluded;
      } else if (!(c.eps > 0.0)) {
        status = "degenerate";
        ++excluded;
      } else {
        samples.emplace_back(static_cast<double>(r_grid[ri]), c.eps);
      }
      out.rows.push_back({std::to_string(r_grid[ri]), std::to_string(rep),
                          format_double(c.eps), status});
    }
  }
  ScalingFit fit = loglog_fit(samples);
  fit.excluded = excluded;
  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json.update(fit_to_json(fit));
  out.plot_fit = fit;
  out.plot_title = "dual: decision-function error vs shots per entry";
  out.x_label = "R (shots per kernel entry)";
  out.y_label = "epsilon";
  return out;
}

// ------------------------------------------------------------------ dual-m

inline ExperimentResult run_dual_m(const Config& cfg, unsigned threads) {
  const auto m_grid = cfg.get_u64_list("m_grid");
  const auto eps0_grid = cfg.get_double_list("eps0_grid");
  const auto r_grid = cfg.get_u64_list("r_grid");
  const double lambda = cfg.get_double("lambda");
  const std::uint64_t master = cfg.get_u64("seed");
  const std::size_t n = cfg.get_u64("n");
  const FeatureMapConfig fcfg = feature_config(cfg);

  struct Cell {
    std::vector<std::uint64_t> r_eps0;  // per eps0; 0 = unreachable
  };
  std::vector<std::vector<Cell>> cells(m_grid.size(), std::vector<Cell>(n));

  const std::size_t units = m_grid.size() * n;
  parallel_for(units, threads, [&](std::size_t unit) {
    const std::size_t mi = unit / n;
    const std::size_t rep = unit % n;
    const int m = static_cast<int>(m_grid[mi]);
    const LabeledSet data = make_data(cfg, m, master, derive_key(master, {mi, rep}));
    const KernelMatrix exact = kernel_matrix(data, fcfg, {});
    const DualSolution ref = solve_dual(exact, data.labels, lambda);
    const std::vector<double> h_inf =
        decision_values_from_matrix(ref.alpha, data.labels, exact);

    std::vector<double> eps_memo(r_grid.size(), -1.0);
    auto eps_at = [&](std::size_t ri) {
      if (eps_memo[ri] >= 0.0) return eps_memo[ri];
      const ShotConfig shots{r_grid[ri], derive_key(master, {rng_tags::kNoise, mi, rep, ri})};
      const KernelMatrix noisy = kernel_matrix(data, fcfg, shots);
      double eps = std::numeric_limits<double>::infinity();
      try {
        const DualSolution sol = solve_dual(noisy, data.labels, lambda);
        eps = max_abs_difference(decision_values_from_matrix(sol.alpha, data.labels, noisy),
                                 h_inf);
      } catch (const NonConvexError&) {
      }
      eps_memo[ri] = eps;
      return eps;
    };

    Cell& cell = cells[mi][rep];
    cell.r_eps0.assign(eps0_grid.size(), 0);
    for (std::size_t ei = 0; ei < eps0_grid.size(); ++ei) {
      if (eps_at(r_grid.size() - 1) >= eps0_grid[ei]) continue;  // unreachable
      std::size_t lo = 0, hi = r_grid.size() - 1;
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (eps_at(mid) < eps0_grid[ei])
          hi = mid;
        else
          lo = mid + 1;
      }
      cell.r_eps0[ei] = r_grid[lo];
    }
  });

  ExperimentResult out;
  out.name = "dual-m";
  out.header = {"m", "eps0", "rep", "r_eps0", "r_tot", "status"};
  std::vector<std::vector<std::pair<double, double>>> samples(eps0_grid.size());
  std::size_t excluded = 0;
  for (std::size_t ei = 0; ei < eps0_grid.size(); ++ei) {
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
      for (std::size_t rep = 0; rep < n; ++rep) {
        const std::uint64_t r = cells[mi][rep].r_eps0[ei];
        const std::uint64_t m = m_grid[mi];
        const unsigned __int128 r_tot =
            static_cast<unsigned __int128>(r) * (m * (m + 1) / 2);
        std::string status = "ok";
        if (r == 0) {
          status = "unreachable";
          ++excluded;
        } else {
          samples[ei].emplace_back(static_cast<double>(m), static_cast<double>(r_tot));
        }
        out.rows.push_back({std::to_string(m), format_double(eps0_grid[ei]),
                            std::to_string(rep), std::to_string(r), u128_to_string(r_tot),
                            status});
      }
    }
  }

  out.fit_json = base_fit_json(out.name, cfg);
  nlohmann::json per_eps0 = nlohmann::json::array();
  double exponent_sum = 0.0, stderr_max = 0.0;
  std::size_t fitted = 0;
  for (std::size_t ei = 0; ei < eps0_grid.size(); ++ei) {
    ScalingFit fit = loglog_fit(samples[ei]);
    nlohmann::json j = fit_to_json(fit);
    j["eps0"] = eps0_grid[ei];
    per_eps0.push_back(j);
    exponent_sum += fit.exponent;
    stderr_max = std::max(stderr_max, fit.exponent_stderr);
    ++fitted;
    if (!out.plot_fit) {
      out.plot_fit = fit;
    }
  }
  out.fit_json["per_eps0"] = per_eps0;
  out.fit_json["exponent"] = exponent_sum / static_cast<double>(fitted);
  out.fit_json["stderr"] = stderr_max;
  out.fit_json["excluded"] = excluded;
  out.fit_json["n"] = out.rows.size();
  out.plot_title = "dual: total shots for target accuracy vs data size";
  out.x_label = "M";
  out.y_label = "R_tot";
  return out;
}

// ------------------------------------------------------------- pegasos-eps

inline ExperimentResult run_pegasos_eps(const Config& cfg, unsigned threads) {
  const int m = static_cast<int>(cfg.get_int("m"));
  const double lambda = cfg.get_double("lambda");
  const double tau = cfg.get_double("tau");
  const std::uint64_t t_ref = cfg.get_u64("t_ref");
  const std::uint64_t t_cap = cfg.get_u64("t_cap");
  const auto r_grid = cfg.get_u64_list("r_grid");
  const std::size_t n = cfg.get_u64("n");
  const std::uint64_t master = cfg.get_u64("seed");
  const FeatureMapConfig fcfg = feature_config(cfg);

  struct Cell {
    double eps = 0.0;
    std::uint64_t steps = 0;
    unsigned __int128 evals = 0;
  };
  std::vector<std::vector<Cell>> cells(n, std::vector<Cell>(r_grid.size()));

  const bool paired = cfg.get_bool("paired_indices");
  const std::string final_eval = cfg.get_string("final_eval");
  if (final_eval != "exact" && final_eval != "noisy")
    throw ConfigError("pegasos-eps: final_eval must be exact or noisy");
  const bool final_eval_exact = final_eval == "exact";
  parallel_for(n, threads, [&](std::size_t rep) {
    const LabeledSet data = make_data(cfg, m, master, rep);
    const std::uint64_t ref_seed = derive_key(master, {rng_tags::kReference, rep});
    const PegasosRun ref = run_pegasos(data, lambda, t_ref, {}, ref_seed, fcfg, 0.0, false);
    PegasosContext ref_ctx(data, fcfg, {}, ref_seed);
    const std::vector<double> h_inf = pegasos_train_margins(ref.state, ref_ctx);

    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
      const KernelAccess access{r_grid[ri], derive_key(master, {rng_tags::kNoise, rep, ri})};
      // with paired_indices every noisy run replays the reference's index
      // sequence and epsilon isolates the shot-noise corruption; unpaired
      // runs draw their own indices like independent trainings would
      const std::uint64_t run_seed =
          paired ? ref_seed : derive_key(master, {rng_tags::kRun, rep, ri});
      // epsilon is measured after the full iteration budget; the tau rule
      // only defines the steps-to-convergence column
      const PegasosRun run = run_pegasos(data, lambda, t_cap, access, run_seed, fcfg, 0.0, false);
      // final_eval=exact scores the trained coefficients with exact kernels
      // (the evaluation used for run comparisons in the noise-robustness
      // study); final_eval=noisy adds fresh prediction-stage shot noise
      PegasosContext eval_ctx(data, fcfg, access, run_seed);
      std::vector<double> h_r;
      if (final_eval_exact) {
        h_r = pegasos_train_margins(run.state, eval_ctx);
      } else {
        Stream eval = substream(access.seed, {qsvm::rng_tags::kPegasosEval});
        h_r = pegasos_train_margins(run.state, eval_ctx, &eval);
      }
      Cell& c = cells[rep][ri];
      c.eps = max_abs_difference(h_r, h_inf);
      c.steps = run.state.completed_steps();
      for (std::size_t k = 1; k < run.losses.size(); ++k) {
        if (std::fabs(run.losses[k] - run.losses[k - 1]) < tau) {
          c.steps = k + 1;
          break;
        }
      }
      c.evals = run.state.circuit_evaluations;
    }
  });

  ExperimentResult out;
  out.name = "pegasos-eps";
  out.header = {"r_shots", "rep", "epsilon", "steps", "circuit_evals"};
  std::vector<std::pair<double, double>> eps_samples, step_samples;
  std::size_t excluded = 0;
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
    for (std::size_t rep = 0; rep < n; ++rep) {
      const Cell& c = cells[rep][ri];
      if (c.eps > 0.0)
        eps_samples.emplace_back(static_cast<double>(r_grid[ri]), c.eps);
      else
        ++excluded;
      step_samples.emplace_back(static_cast<double>(r_grid[ri]), static_cast<double>(c.steps));
      out.rows.push_back({std::to_string(r_grid[ri]), std::to_string(rep),
                          format_double(c.eps), std::to_string(c.steps),
                          u128_to_string(c.evals)});
    }
  }
  ScalingFit fit = loglog_fit(eps_samples);
  fit.excluded = excluded;
  const ScalingFit steps_fit = loglog_fit(step_samples);

  // the headline exponent regresses ln R on the mean ln epsilon per grid
  // point, the same orientation as the published fit
  std::vector<std::pair<double, double>> swapped;
  for (const auto& p : fit.points) swapped.emplace_back(p.mean, p.x);
  const ScalingFit r_on_eps = loglog_fit(swapped);

  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json.update(fit_to_json(fit));
  out.fit_json["shots_exponent_p"] = -r_on_eps.exponent;
  out.fit_json["shots_exponent_p_stderr"] = r_on_eps.exponent_stderr;
  out.fit_json["inverse_slope_p"] = fit.exponent != 0.0 ? -1.0 / fit.exponent : 0.0;
  out.fit_json["steps_vs_r"] = fit_to_json(steps_fit);
  // median epsilon per grid point, for the monotonicity contract
  nlohmann::json medians = nlohmann::json::array();
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
    std::vector<double> v;
    for (std::size_t rep = 0; rep < n; ++rep) v.push_back(cells[rep][ri].eps);
    medians.push_back({{"r", r_grid[ri]}, {"median_eps", nearest_rank_percentile(v, 50.0)}});
  }
  out.fit_json["median_eps_per_r"] = medians;
  out.plot_fit = fit;
  out.plot_title = "pegasos: decision-function error vs shots per evaluation";
  out.x_label = "R (shots per kernel evaluation)";
  out.y_label = "epsilon";
  return out;
}

// --------------------------------------------------------------- pegasos-m

inline ExperimentResult run_pegasos_m(const Config& cfg, unsigned threads) {
  const auto m_grid = cfg.get_u64_list("m_grid");
  const double lambda = cfg.get_double("lambda");
  const double tau = cfg.get_double("tau");
  const std::uint64_t t_cap = cfg.get_u64("t_cap");
  const std::size_t n = cfg.get_u64("n");
  const std::uint64_t master = cfg.get_u64("seed");
  const FeatureMapConfig fcfg = feature_config(cfg);

  struct Cell {
    std::uint64_t steps = 0;
    bool capped = false;
  };
  std::vector<std::vector<Cell>> cells(m_grid.size(), std::vector<Cell>(n));

  const std::size_t units = m_grid.size() * n;
  parallel_for(units, threads, [&](std::size_t unit) {
    const std::size_t mi = unit / n;
    const std::size_t rep = unit % n;
    const LabeledSet data =
        make_data(cfg, static_cast<int>(m_grid[mi]), master, derive_key(master, {mi, rep}));
    const std::uint64_t run_seed = derive_key(master, {rng_tags::kRun, mi, rep});
    const PegasosRun run = run_pegasos(data, lambda, t_cap, {}, run_seed, fcfg, tau, false);
    cells[mi][rep].capped = run.steps_to_convergence == 0;
    cells[mi][rep].steps =
        run.steps_to_convergence ? run.steps_to_convergence : run.state.completed_steps();
  });

  ExperimentResult out;
  out.name = "pegasos-m";
  out.header = {"m", "rep", "steps", "converged"};
  std::vector<std::pair<double, double>> samples;
  std::size_t capped = 0;
  for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
    for (std::size_t rep = 0; rep < n; ++rep) {
      const Cell& c = cells[mi][rep];
      samples.emplace_back(static_cast<double>(m_grid[mi]), static_cast<double>(c.steps));
      if (c.capped) ++capped;
      out.rows.push_back({std::to_string(m_grid[mi]), std::to_string(rep),
                          std::to_string(c.steps), c.capped ? "0" : "1"});
    }
  }
  ScalingFit fit = loglog_fit(samples);
  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json.update(fit_to_json(fit));
  out.fit_json["capped_runs"] = capped;
  out.plot_fit = fit;
  out.plot_title = "pegasos: steps to convergence vs data size";
  out.x_label = "M";
  out.y_label = "steps";
  return out;
}

// ----------------------------------------------------------------- vqc-eps

inline ExperimentResult run_vqc_eps(const Config& cfg, unsigned threads) {
  const std::string mode = cfg.get_string("mode");
  const std::uint64_t master = cfg.get_u64("seed");
  const std::size_t n = cfg.get_u64("n");
  const FeatureMapConfig fcfg = feature_config(cfg);

  vqc::SpsaSchedule schedule;
  schedule.a = cfg.get_double("spsa_a");
  schedule.c = cfg.get_double("spsa_c");
  schedule.big_a = cfg.get_double("spsa_big_a");
  schedule.alpha_exp = cfg.get_double("spsa_alpha");
  schedule.gamma_exp = cfg.get_double("spsa_gamma");

  const double init_range = cfg.get_double("init_range");
  auto initial_model = [&](int qubits, int layers, std::uint64_t rep) {
    vqc::VariationalModel m;
    m.feature_cfg = fcfg;
    m.feature_cfg.qubits = qubits;
    m.var_cfg.qubits = qubits;
    m.var_cfg.layers = layers;
    m.theta.resize(m.var_cfg.parameter_count());
    Stream init = substream(master, {rng_tags::kInit, rep});
    for (double& t : m.theta) t = (2.0 * init.next_double() - 1.0) * init_range;
    return m;
  };

  ExperimentResult out;
  out.name = "vqc-eps";
  out.fit_json = base_fit_json(out.name, cfg);

  if (mode == "eps") {
    const int m = static_cast<int>(cfg.get_int("m"));
    const int layers = static_cast<int>(cfg.get_int("layers"));
    const auto r_grid = cfg.get_u64_list("r_grid");
    const int gen_layers = static_cast<int>(cfg.get_int("gen_layers"));

    struct Cell {
      double eps = 0.0;
      std::uint64_t refine_iters = 0;
      bool refine_failed = false;
      unsigned __int128 evals = 0;
    };
    std::vector<std::vector<Cell>> cells(n, std::vector<Cell>(r_grid.size()));

    const std::size_t units = n * r_grid.size();
    parallel_for(units, threads, [&](std::size_t unit) {
      const std::size_t rep = unit / r_grid.size();
      const std::size_t ri = unit % r_grid.size();
      const LabeledSet data = make_data(cfg, m, master, rep, gen_layers);
      const vqc::VariationalModel m0 = initial_model(fcfg.qubits, layers, rep);

      vqc::VqcTrainConfig train_cfg;
      train_cfg.max_steps = cfg.get_u64("t_train");
      train_cfg.batch_size = cfg.get_u64("batch");
      train_cfg.shots = r_grid[ri];
      train_cfg.schedule = schedule;
      train_cfg.seed = derive_key(master, {rng_tags::kRun, rep, ri});
      train_cfg.param_tol = 0.0;  // fixed-length noisy training
      train_cfg.train_bias = cfg.get_bool("train_bias");
      const vqc::VqcTrainResult trained = vqc::train(m0, data, train_cfg);

      vqc::RefineOptions refine;
      refine.learning_rate = cfg.get_double("refine_lr");
      refine.fd_step = cfg.get_double("refine_fd");
      refine.param_tol = cfg.get_double("refine_tol");
      refine.max_iterations = cfg.get_u64("refine_cap");
      const vqc::RefineResult refined =
          vqc::reference_refine(trained.model, data, refine, train_cfg.train_bias);
      Cell& c = cells[rep][ri];
      c.refine_iters = refined.iterations;
      c.evals = trained.circuit_evaluations;
      if (!refined.converged) {
        c.refine_failed = true;
        return;
      }
      const vqc::VariationalModel model_inf =
          vqc::refined_model(trained.model, refined, train_cfg.train_bias);
      double eps = 0.0;
      for (const auto& x : data.points)
        eps = std::max(eps, std::fabs(vqc::model_h(trained.model, x) - vqc::model_h(model_inf, x)));
      c.eps = eps;
    });

    out.header = {"r_shots", "rep", "epsilon", "refine_iterations", "status", "circuit_evals"};
    std::vector<std::pair<double, double>> samples;
    std::size_t excluded = 0;
    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
      for (std::size_t rep = 0; rep < n; ++rep) {
        const Cell& c = cells[rep][ri];
        std::string status = "ok";
        if (c.refine_failed) {
          status = "refine-nonconvergence";
          ++excluded;
        } else if (!(c.eps > 0.0)) {
          status = "degenerate";
          ++excluded;
        } else {
          samples.emplace_back(static_cast<double>(r_grid[ri]), c.eps);
        }
        out.rows.push_back({std::to_string(r_grid[ri]), std::to_string(rep),
                            format_double(c.eps), std::to_string(c.refine_iters), status,
                            u128_to_string(c.evals)});
      }
    }
    ScalingFit fit = loglog_fit(samples);
    fit.excluded = excluded;
    out.fit_json.update(fit_to_json(fit));
    out.fit_json["shots_exponent_p"] = fit.exponent != 0.0 ? -1.0 / fit.exponent : 0.0;
    out.plot_fit = fit;
    out.plot_title = "approximate QSVM: decision-function error vs shots";
    out.x_label = "R (shots per expectation value)";
    out.y_label = "epsilon";
    return out;
  }

  if (mode != "m-steps" && mode != "d-steps")
    throw ConfigError("vqc-eps: mode must be eps, m-steps or d-steps");

  // statevector-mode convergence steps against M or d
  const bool by_m = mode == "m-steps";
  const auto grid = by_m ? cfg.get_u64_list("m_grid") : cfg.get_u64_list("layer_grid");
  const int fixed_layers = static_cast<int>(cfg.get_int("layers"));
  const int fixed_m = static_cast<int>(cfg.get_int("m"));
  const int gen_layers = static_cast<int>(cfg.get_int("gen_layers"));

  struct Cell {
    std::uint64_t steps = 0;
    bool capped = false;
    std::uint64_t d = 0;
  };
  std::vector<std::vector<Cell>> cells(grid.size(), std::vector<Cell>(n));
  const std::size_t units = grid.size() * n;
  parallel_for(units, threads, [&](std::size_t unit) {
    const std::size_t gi = unit / n;
    const std::size_t rep = unit % n;
    const int m = by_m ? static_cast<int>(grid[gi]) : fixed_m;
    const int layers = by_m ? fixed_layers : static_cast<int>(grid[gi]);
    const LabeledSet data = make_data(cfg, m, master, derive_key(master, {gi, rep}), gen_layers);
    const vqc::VariationalModel m0 = initial_model(fcfg.qubits, layers, derive_key(master, {gi, rep}));
    vqc::VqcTrainConfig train_cfg;
    train_cfg.max_steps = cfg.get_u64("t_cap_exact");
    train_cfg.batch_size = cfg.get_u64("batch");
    train_cfg.shots = 0;
    train_cfg.schedule = schedule;
    train_cfg.seed = derive_key(master, {rng_tags::kRun, gi, rep});
    train_cfg.param_tol = cfg.get_double("param_tol");
    train_cfg.train_bias = cfg.get_bool("train_bias");
    const vqc::VqcTrainResult r = vqc::train(m0, data, train_cfg);
    cells[gi][rep].capped = r.steps_to_convergence == 0;
    cells[gi][rep].steps = r.steps_to_convergence ? r.steps_to_convergence : r.trace.size();
    cells[gi][rep].d = m0.theta.size();
  });

  out.header = {by_m ? "m" : "d", "rep", "steps", "converged"};
  std::vector<std::pair<double, double>> samples;
  std::size_t capped = 0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    for (std::size_t rep = 0; rep < n; ++rep) {
      const Cell& c = cells[gi][rep];
      const double x = by_m ? static_cast<double>(grid[gi]) : static_cast<double>(c.d);
      samples.emplace_back(x, static_cast<double>(c.steps));
      if (c.capped) ++capped;
      out.rows.push_back({std::to_string(static_cast<std::uint64_t>(x)), std::to_string(rep),
                          std::to_string(c.steps), c.capped ? "0" : "1"});
    }
  }
  ScalingFit fit = loglog_fit(samples);
  out.fit_json.update(fit_to_json(fit));
  out.fit_json["capped_runs"] = capped;
  out.plot_fit = fit;
  out.plot_title = by_m ? "approximate QSVM: steps vs data size"
                        : "approximate QSVM: steps vs parameter count";
  out.x_label = by_m ? "M" : "d";
  out.y_label = "steps";
  return out;
}

// ------------------------------------------------------------------ latala

inline ExperimentResult run_latala(const Config& cfg, unsigned threads) {
  const std::uint64_t master = cfg.get_u64("seed");
  const std::size_t n = cfg.get_u64("n");
  const FeatureMapConfig fcfg = feature_config(cfg);
  const auto r_grid = cfg.get_u64_list("r_grid");
  const auto m_grid = cfg.get_u64_list("m_grid");
  const std::uint64_t m_for_r = cfg.get_u64("m_for_r");
  const std::uint64_t r_for_m = cfg.get_u64("r_for_m");

  // one fixed data set (and exact kernel) per distinct M
  std::vector<std::uint64_t> all_m = m_grid;
  if (std::find(all_m.begin(), all_m.end(), m_for_r) == all_m.end()) all_m.push_back(m_for_r);
  std::map<std::uint64_t, LabeledSet> data_by_m;
  std::map<std::uint64_t, KernelMatrix> exact_by_m;
  for (std::uint64_t m : all_m) {
    data_by_m[m] = make_data(cfg, static_cast<int>(m), master, m);
    exact_by_m[m] = kernel_matrix(data_by_m[m], fcfg, {});
  }

  struct Unit {
    char axis;  // 'R' or 'M'
    std::uint64_t x, m, r;
    std::size_t seed_index;
    double distance = 0.0;
  };
  std::vector<Unit> units;
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri)
    for (std::size_t si = 0; si < n; ++si)
      units.push_back({'R', r_grid[ri], m_for_r, r_grid[ri], si, 0.0});
  for (std::size_t mi = 0; mi < m_grid.size(); ++mi)
    for (std::size_t si = 0; si < n; ++si)
      units.push_back({'M', m_grid[mi], m_grid[mi], r_for_m, si, 0.0});

  parallel_for(units.size(), threads, [&](std::size_t u) {
    Unit& unit = units[u];
    const ShotConfig shots{unit.r,
                           derive_key(master, {rng_tags::kNoise, static_cast<std::uint64_t>(unit.axis),
                                               unit.x, unit.seed_index})};
    const KernelMatrix noisy = kernel_matrix(data_by_m.at(unit.m), fcfg, shots);
    unit.distance = spectral_distance(noisy, exact_by_m.at(unit.m));
  });

  ExperimentResult out;
  out.name = "latala";
  out.header = {"axis", "x", "seed_index", "spectral_distance"};
  std::vector<std::pair<double, double>> vs_r, vs_m;
  for (const Unit& unit : units) {
    (unit.axis == 'R' ? vs_r : vs_m)
        .emplace_back(static_cast<double>(unit.x), unit.distance);
    out.rows.push_back({std::string(1, unit.axis), std::to_string(unit.x),
                        std::to_string(unit.seed_index), format_double(unit.distance)});
  }
  const ScalingFit fit_r = loglog_fit(vs_r);
  const ScalingFit fit_m = loglog_fit(vs_m);
  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json["vs_r"] = fit_to_json(fit_r);
  out.fit_json["vs_m"] = fit_to_json(fit_m);
  out.fit_json["exponent"] = fit_r.exponent;
  out.fit_json["stderr"] = fit_r.exponent_stderr;
  out.fit_json["n"] = units.size();
  out.fit_json["excluded"] = 0;
  out.plot_fit = fit_r;
  out.plot_title = "kernel matrix spectral error vs shots";
  out.x_label = "R";
  out.y_label = "||K_R - K||_2";
  return out;
}

// ------------------------------------------------------------------ daniel

inline ExperimentResult run_daniel(const Config& cfg, unsigned threads) {
  const std::uint64_t trials = cfg.get_u64("trials");
  const std::uint64_t m_min = cfg.get_u64("m_min");
  const std::uint64_t m_max = cfg.get_u64("m_max");
  const double lambda = cfg.get_double("lambda");
  const double eps_fraction = cfg.get_double("eps_fraction");
  const std::uint64_t master = cfg.get_u64("seed");

  struct Cell {
    int m = 0;
    DanielReport report;
  };
  std::vector<Cell> cells(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    Stream s = substream(master, {rng_tags::kTrial, t});
    const int m = static_cast<int>(m_min + s.next_below(m_max - m_min + 1));
    Eigen::MatrixXd g(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = s.next_normal();
    const Eigen::MatrixXd k = g.transpose() * g / static_cast<double>(m);
    std::vector<int> y(m);
    for (int& v : y) v = (s.next_u64() & 1) ? 1 : -1;

    Eigen::MatrixXd a = build_q(k, y);
    for (int i = 0; i < m; ++i) a(i, i) += lambda;
    const double mu = symmetric_eigenvalues(a).front();

    Eigen::MatrixXd e(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        const double v = s.next_normal();
        e(i, j) = v;
        e(j, i) = v;
      }
    e *= (eps_fraction * mu) / spectral_norm_symmetric(e);
    cells[t].m = m;
    cells[t].report = daniel_bound_check(k, k + e, y, lambda);
  });

  ExperimentResult out;
  out.name = "daniel";
  out.header = {"trial", "m", "mu", "eps", "lhs", "rhs", "satisfied"};
  std::size_t satisfied = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& r = cells[t].report;
    if (r.satisfied) ++satisfied;
    out.rows.push_back({std::to_string(t), std::to_string(cells[t].m), format_double(r.mu),
                        format_double(r.eps), format_double(r.lhs), format_double(r.rhs),
                        r.satisfied ? "1" : "0"});
  }
  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json["trials"] = trials;
  out.fit_json["satisfied"] = satisfied;
  out.fit_json["all_satisfied"] = satisfied == trials;
  out.fit_json["n"] = trials;
  out.fit_json["excluded"] = 0;
  return out;
}

// --------------------------------------------------------------- eps-delta

inline ExperimentResult run_eps_delta(const Config& cfg, unsigned threads) {
  const int m = static_cast<int>(cfg.get_int("m"));
  const auto lambdas = cfg.get_double_list("lambdas");
  const std::uint64_t per_lambda = cfg.get_u64("checkpoints_per_lambda");
  const std::uint64_t t_max = cfg.get_u64("t_max");
  const std::uint64_t t_ref = cfg.get_u64("t_ref");
  const std::string reference = cfg.get_string("reference");
  const std::uint64_t master = cfg.get_u64("seed");
  const FeatureMapConfig fcfg = feature_config(cfg);
  if (reference != "dual" && reference != "long-run")
    throw ConfigError("eps-delta: reference must be dual or long-run");

  struct Row {
    double lambda;
    std::uint64_t t;
    EpsDeltaReport report;
  };
  std::vector<std::vector<Row>> per_lambda_rows(lambdas.size());

  parallel_for(lambdas.size(), threads, [&](std::size_t li) {
    const double lambda = lambdas[li];
    const LabeledSet data = make_data(cfg, m, master, li);
    const PegasosReference ref =
        reference == "dual"
            ? reference_from_hinge_dual(data, lambda, fcfg)
            : reference_from_long_run(data, lambda, t_ref,
                                      derive_key(master, {rng_tags::kReference, li}), fcfg);

    // checkpoints drawn uniformly from [2, t_max], deduplicated
    Stream pick = substream(master, {rng_tags::kTrial, li});
    std::vector<std::uint64_t> checkpoints;
    while (checkpoints.size() < per_lambda) {
      const std::uint64_t t = 2 + pick.next_below(t_max - 1);
      if (std::find(checkpoints.begin(), checkpoints.end(), t) == checkpoints.end())
        checkpoints.push_back(t);
    }
    std::sort(checkpoints.begin(), checkpoints.end());

    PegasosContext ctx(data, fcfg, {}, derive_key(master, {rng_tags::kRun, li}));
    PegasosState state = PegasosState::initial(data.size(), lambda);
    std::size_t next_cp = 0;
    for (std::uint64_t t = 1; t <= t_max && next_cp < checkpoints.size(); ++t) {
      state = pegasos_step(state, ctx);
      if (state.completed_steps() == checkpoints[next_cp]) {
        per_lambda_rows[li].push_back({lambda, checkpoints[next_cp],
                                       eps_delta_check(state, ctx, ref)});
        ++next_cp;
      }
    }
  });

  ExperimentResult out;
  out.name = "eps-delta";
  out.header = {"lambda", "checkpoint_t", "epsilon", "delta", "bound", "satisfied"};
  std::size_t checks = 0, satisfied = 0;
  for (const auto& rows : per_lambda_rows) {
    for (const Row& r : rows) {
      ++checks;
      if (r.report.satisfied) ++satisfied;
      out.rows.push_back({format_double(r.lambda), std::to_string(r.t),
                          format_double(r.report.epsilon), format_double(r.report.delta),
                          format_double(r.report.bound), r.report.satisfied ? "1" : "0"});
    }
  }
  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json["checks"] = checks;
  out.fit_json["satisfied"] = satisfied;
  out.fit_json["all_satisfied"] = checks == satisfied;
  out.fit_json["n"] = checks;
  out.fit_json["excluded"] = 0;
  return out;
}

// ----------------------------------------------------------- pegasos-noise

inline ExperimentResult run_pegasos_noise(const Config& cfg, unsigned threads) {
  const int m = static_cast<int>(cfg.get_int("m"));
  const double lambda = cfg.get_double("lambda");
  const std::uint64_t t_steps = cfg.get_u64("t_steps");
  const auto r_grid = cfg.get_u64_list("r_grid");
  const std::size_t n = cfg.get_u64("n");
  const std::uint64_t master = cfg.get_u64("seed");
  const std::string coef_scaling = cfg.get_string("coef_scaling");
  const FeatureMapConfig fcfg = feature_config(cfg);
  if (coef_scaling != "inv-lambda-t" && coef_scaling != "lambda-over-t")
    throw ConfigError("pegasos-noise: coef_scaling must be inv-lambda-t or lambda-over-t");

  // R = 0 encodes the exact-kernel run; it is its own coefficient reference
  std::vector<std::uint64_t> all_r{0};
  all_r.insert(all_r.end(), r_grid.begin(), r_grid.end());

  struct Point {
    double accuracy = 0.0;
    double coef_error = 0.0;
  };
  // [rep][r index][t]
  std::vector<std::vector<std::vector<Point>>> traces(
      n, std::vector<std::vector<Point>>(all_r.size(), std::vector<Point>(t_steps)));

  parallel_for(n, threads, [&](std::size_t rep) {
    const LabeledSet data = make_data(cfg, m, master, rep);
    const std::uint64_t run_seed = derive_key(master, {rng_tags::kRun, rep});

    // exact trajectory first; the same run seed pairs the index sequences
    std::vector<std::vector<std::uint32_t>> exact_alpha(t_steps);
    {
      PegasosContext ctx(data, fcfg, {}, run_seed);
      PegasosState state = PegasosState::initial(data.size(), lambda);
      for (std::uint64_t t = 0; t < t_steps; ++t) {
        state = pegasos_step(state, ctx);
        exact_alpha[t] = state.alpha;
      }
    }

    for (std::size_t ri = 0; ri < all_r.size(); ++ri) {
      const KernelAccess access =
          all_r[ri] == 0 ? KernelAccess{}
                         : KernelAccess{all_r[ri], derive_key(master, {rng_tags::kNoise, rep, ri})};
      PegasosContext ctx(data, fcfg, access, run_seed);
      PegasosState state = PegasosState::initial(data.size(), lambda);
      for (std::uint64_t t = 0; t < t_steps; ++t) {
        state = pegasos_step(state, ctx);
        const std::vector<double> h = pegasos_train_margins(state, ctx);  // exact kernels
        int correct = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
          if ((h[i] >= 0.0 ? 1 : -1) == data.labels[i]) ++correct;
        double err2 = 0.0;
        for (std::size_t j = 0; j < data.size(); ++j) {
          const double d = static_cast<double>(state.alpha[j]) -
                           static_cast<double>(exact_alpha[t][j]);
          err2 += d * d;
        }
        const double tt = static_cast<double>(t + 1);
        const double scale =
            coef_scaling == "inv-lambda-t" ? 1.0 / (lambda * tt) : lambda / tt;
        traces[rep][ri][t] = {static_cast<double>(correct) / static_cast<double>(data.size()),
                              scale * std::sqrt(err2)};
      }
    }
  });

  ExperimentResult out;
  out.name = "pegasos-noise";
  out.header = {"r_shots", "rep", "t", "accuracy", "coef_error"};
  for (std::size_t ri = 0; ri < all_r.size(); ++ri)
    for (std::size_t rep = 0; rep < n; ++rep)
      for (std::uint64_t t = 0; t < t_steps; ++t)
        out.rows.push_back({std::to_string(all_r[ri]), std::to_string(rep),
                            std::to_string(t + 1),
                            format_double(traces[rep][ri][t].accuracy),
                            format_double(traces[rep][ri][t].coef_error)});

  // stabilization summary: per noisy run, is the late coefficient error at or
  // below the early-phase peak, and do larger R give smaller final errors?
  nlohmann::json summary = nlohmann::json::array();
  std::vector<double> median_final;
  for (std::size_t ri = 1; ri < all_r.size(); ++ri) {
    std::size_t stabilized = 0;
    std::vector<double> finals;
    for (std::size_t rep = 0; rep < n; ++rep) {
      double early_peak = 0.0;
      const std::uint64_t early = std::min<std::uint64_t>(40, t_steps);
      for (std::uint64_t t = 0; t < early; ++t)
        early_peak = std::max(early_peak, traces[rep][ri][t].coef_error);
      const std::uint64_t probe = std::min<std::uint64_t>(200, t_steps) - 1;
      if (traces[rep][ri][probe].coef_error <= early_peak) ++stabilized;
      finals.push_back(traces[rep][ri][t_steps - 1].coef_error);
    }
    const double median = nearest_rank_percentile(finals, 50.0);
    median_final.push_back(median);
    summary.push_back({{"r", all_r[ri]},
                       {"stabilized_runs", stabilized},
                       {"median_final_coef_error", median}});
  }
  bool ordered = true;
  for (std::size_t i = 1; i < median_final.size(); ++i)
    if (median_final[i] > median_final[i - 1]) ordered = false;

  out.fit_json = base_fit_json(out.name, cfg);
  out.fit_json["per_r"] = summary;
  out.fit_json["median_error_decreases_with_r"] = ordered;
  out.fit_json["n"] = out.rows.size();
  out.fit_json["excluded"] = 0;
  return out;
}

}  // namespace detail

inline ExperimentResult run_experiment(const std::string& name, const Config& resolved,
                                       unsigned threads) {
  if (name == "dual-eps") return detail::run_dual_eps(resolved, threads);
  if (name == "dual-m") return detail::run_dual_m(resolved, threads);
  if (name == "pegasos-eps") return detail::run_pegasos_eps(resolved, threads);
  if (name == "pegasos-m") return detail::run_pegasos_m(resolved, threads);
  if (name == "vqc-eps") return detail::run_vqc_eps(resolved, threads);
  if (name == "latala") return detail::run_latala(resolved, threads);
  if (name == "daniel") return detail::run_daniel(resolved, threads);
  if (name == "eps-delta") return detail::run_eps_delta(resolved, threads);
  if (name == "pegasos-noise") return detail::run_pegasos_noise(resolved, threads);
  throw ConfigError("unknown experiment '" + name + "'");
}

inline std::string results_to_csv(const ExperimentResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.header.size(); ++i) {
    if (i) out += ',';
    out += result.header[i];
  }
  out += '\n';
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

struct ExperimentFiles {
  std::filesystem::path results_csv, fit_json, plot_svg, manifest;
};

// Runs the experiment and writes results.csv, fit.json, optional plot.svg and
// manifest.json into out_dir. On failure any partial outputs are removed.
inline ExperimentFiles write_experiment(const std::string& name, const Config& user,
                                        const std::filesystem::path& out_dir, unsigned threads,
                                        bool plot) {
  const Config resolved = resolve_experiment_config(name, user);
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);

  ExperimentFiles files;
  files.results_csv = out_dir / "results.csv";
  files.fit_json = out_dir / "fit.json";
  files.plot_svg = out_dir / "plot.svg";
  files.manifest = out_dir / "manifest.json";

  std::vector<std::filesystem::path> written;
  try {
    const ExperimentResult result = run_experiment(name, resolved, threads);
    write_file_atomic(files.results_csv, results_to_csv(result));
    written.push_back(files.results_csv);
    write_file_atomic(files.fit_json, result.fit_json.dump(2) + "\n");
    written.push_back(files.fit_json);

    RunManifest manifest;
    manifest.command = "experiment";
    manifest.name = name;
    manifest.config = resolved.values();
    manifest.master_seed = resolved.get_u64("seed");
    manifest.outputs = {"results.csv", "fit.json"};
    if (plot && result.plot_fit) {
      write_file_atomic(files.plot_svg,
                        loglog_plot_svg(*result.plot_fit, result.plot_title, result.x_label,
                                        result.y_label));
      written.push_back(files.plot_svg);
      manifest.outputs.push_back("plot.svg");
    }
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(manifest, files.manifest);
  } catch (...) {
    for (const auto& p : written) std::filesystem::remove(p);
    throw;
  }
  return files;
}

// Re-execute an experiment exactly as recorded in its manifest.
inline ExperimentFiles rerun_from_manifest(const std::filesystem::path& manifest_path,
                                           const std::filesystem::path& out_dir, unsigned threads,
                                           bool plot = false) {
  const RunManifest m = load_manifest(manifest_path);
  if (m.command != "experiment")
    throw ConfigError("manifest does not describe an experiment run");
  return write_experiment(m.name, Config{m.config}, out_dir, threads, plot);
}

}  // namespace qsvm::experiments
