// qsvmlab: train quantum support vector machines under emulated shot noise
// and reproduce the scaling studies and theory checks. Every command writes a
// manifest next to its outputs; a run is a pure function of its manifest.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qsvm/datagen.hpp"
#include "qsvm/dataset.hpp"
#include "qsvm/dual.hpp"
#include "qsvm/experiments.hpp"
#include "qsvm/io.hpp"
#include "qsvm/kernel.hpp"
#include "qsvm/manifest.hpp"
#include "qsvm/pegasos.hpp"
#include "qsvm/vqc.hpp"

namespace fs = std::filesystem;
using namespace qsvm;

namespace {

unsigned default_threads() {
  if (const char* env = std::getenv("QSVMLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return 1;
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::uint64_t pick_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const std::uint64_t seed = entropy_seed();
  std::cout << "seed not given; using entropy seed " << seed << "\n";
  return seed;
}

// Removes the listed files if the wrapped action throws.
struct OutputGuard {
  std::vector<fs::path> files;
  bool committed = false;
  ~OutputGuard() {
    if (committed) return;
    for (const auto& p : files) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

void write_atomic_guarded(OutputGuard& guard, const fs::path& path, const std::string& content) {
  write_file_atomic(path, content);
  guard.files.push_back(path);
}

RunManifest make_manifest(const std::string& command, const std::string& name,
                          const std::map<std::string, std::string>& config, std::uint64_t seed,
                          const std::vector<fs::path>& outputs,
                          std::chrono::steady_clock::time_point start) {
  RunManifest m;
  m.command = command;
  m.name = name;
  m.config = config;
  m.master_seed = seed;
  for (const auto& p : outputs) m.outputs.push_back(p.filename().string());
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

fs::path manifest_path_for(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

// ----------------------------------------------------------------- gen-data

int cmd_gen_data(const std::map<std::string, std::string>& kv) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg{kv};
  datagen::DataGenConfig gen;
  gen.m = static_cast<int>(cfg.get_int("m"));
  gen.mu = cfg.get_double("mu");
  gen.feature_cfg.qubits = static_cast<int>(cfg.get_int("qubits"));
  gen.feature_cfg.repetitions = static_cast<int>(cfg.get_int("reps"));
  gen.variational_layers = static_cast<int>(cfg.get_int("gen_layers"));
  gen.seed = cfg.get_u64("seed");
  gen.verbatim_guard = cfg.get_bool("verbatim");
  const fs::path out = cfg.get_string("out");

  const datagen::GeneratedData data = datagen::generate(gen);
  OutputGuard guard;
  write_atomic_guarded(guard, out, dataset_to_csv(data.data));
  const RunManifest manifest = make_manifest("gen-data", "gen-data", kv, gen.seed, {out}, start);
  write_manifest(manifest, manifest_path_for(out));
  guard.files.push_back(manifest_path_for(out));
  guard.committed = true;
  std::cout << "wrote " << out.string() << " (" << data.data.size() << " points)\n";
  return 0;
}

// ------------------------------------------------------------------- kernel

int cmd_kernel(const std::map<std::string, std::string>& kv, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg{kv};
  const LabeledSet data = load_dataset(cfg.get_string("data"));
  FeatureMapConfig fcfg;
  fcfg.qubits = data.dimension();
  fcfg.repetitions = static_cast<int>(cfg.get_int("reps"));
  const ShotConfig shots{cfg.get_u64("shots"), cfg.get_u64("seed")};
  const fs::path out = cfg.get_string("out");

  const KernelMatrix k = kernel_matrix(data, fcfg, shots, threads);
  OutputGuard guard;
  write_atomic_guarded(guard, out, kernel_to_csv(k));
  const RunManifest manifest = make_manifest("kernel", "kernel", kv, shots.seed, {out}, start);
  write_manifest(manifest, manifest_path_for(out));
  guard.files.push_back(manifest_path_for(out));
  guard.committed = true;
  std::cout << "wrote " << out.string() << " (" << k.size << "x" << k.size
            << (shots.exact() ? ", exact" : ", R=" + std::to_string(shots.shots)) << ")\n";
  return 0;
}

// -------------------------------------------------------------------- train

int cmd_train(const std::map<std::string, std::string>& kv) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg{kv};
  const std::string method = cfg.get_string("method");
  const LabeledSet data = load_dataset(cfg.get_string("data"));
  FeatureMapConfig fcfg;
  fcfg.qubits = data.dimension();
  fcfg.repetitions = static_cast<int>(cfg.get_int("reps"));
  const double lambda = cfg.get_double("lambda");
  const std::uint64_t shots = cfg.get_u64("shots");
  const std::uint64_t seed = cfg.get_u64("seed");
  const std::string prefix = cfg.get_string("out");

  OutputGuard guard;
  std::vector<fs::path> outputs;

  if (method == "dual") {
    const ShotConfig shot_cfg{shots, derive_key(seed, {rng_tags::kKernelEntry})};
    const KernelMatrix k = kernel_matrix(data, fcfg, shot_cfg);
    const DualSolution sol = solve_dual(k, data.labels, lambda);
    nlohmann::json j = dual_solution_to_json(sol);
    j["method"] = "dual";
    j["shots"] = shots;
    j["seed"] = seed;
    const fs::path model = prefix + "_solution.json";
    write_atomic_guarded(guard, model, j.dump(2) + "\n");
    outputs.push_back(model);
    std::cout << "dual objective " << format_double(sol.objective_value) << ", kkt residual "
              << format_double(sol.kkt_residual) << "\n";
  } else if (method == "pegasos") {
    const KernelAccess access{shots, derive_key(seed, {tag("train-noise")})};
    const PegasosRun run = run_pegasos(data, lambda, cfg.get_u64("steps"), access, seed, fcfg,
                                       cfg.get_double("tau"));
    nlohmann::json j;
    j["method"] = "pegasos";
    j["alpha"] = run.state.alpha;
    j["lambda"] = lambda;
    j["completed_steps"] = run.state.completed_steps();
    j["steps_to_convergence"] = run.steps_to_convergence;
    j["decision_normalization"] = "1/(lambda*T)";
    j["shots"] = shots;
    j["seed"] = seed;
    const fs::path model = prefix + "_model.json";
    const fs::path trace = prefix + "_trace.csv";
    write_atomic_guarded(guard, model, j.dump(2) + "\n");
    write_atomic_guarded(guard, trace, pegasos_trace_to_csv(run.trace));
    outputs = {model, trace};
    std::cout << "pegasos ran " << run.state.completed_steps() << " steps"
              << (run.steps_to_convergence ? " (converged)" : " (cap reached)") << "\n";
  } else if (method == "vqc") {
    vqc::VariationalModel m0;
    m0.feature_cfg = fcfg;
    m0.var_cfg.qubits = fcfg.qubits;
    m0.var_cfg.layers = static_cast<int>(cfg.get_int("layers"));
    m0.theta.resize(m0.var_cfg.parameter_count());
    Stream init = substream(seed, {vqc::rng_tags::kInit});
    for (double& t : m0.theta) t = (2.0 * init.next_double() - 1.0) * 3.14159265358979323846;

    vqc::VqcTrainConfig tc;
    tc.max_steps = cfg.get_u64("steps");
    tc.batch_size = cfg.get_u64("batch");
    tc.shots = shots;
    tc.seed = seed;
    tc.param_tol = cfg.get_double("param_tol");
    tc.train_bias = cfg.get_bool("train_bias");
    const vqc::VqcTrainResult result = vqc::train(m0, data, tc);
    nlohmann::json j = vqc::model_to_json(result.model);
    j["method"] = "vqc";
    j["steps_to_convergence"] = result.steps_to_convergence;
    j["shots"] = shots;
    j["seed"] = seed;
    j["spsa"] = {{"a", tc.schedule.a},
                 {"c", tc.schedule.c},
                 {"A", tc.schedule.big_a},
                 {"alpha", tc.schedule.alpha_exp},
                 {"gamma", tc.schedule.gamma_exp}};
    const fs::path model = prefix + "_model.json";
    const fs::path trace = prefix + "_trace.csv";
    write_atomic_guarded(guard, model, j.dump(2) + "\n");
    write_atomic_guarded(guard, trace, vqc::vqc_trace_to_csv(result.trace));
    outputs = {model, trace};
    std::cout << "vqc ran " << result.trace.size() << " steps"
              << (result.steps_to_convergence ? " (converged)" : "") << "\n";
  } else {
    throw ConfigError("train: method must be dual, pegasos or vqc");
  }

  const RunManifest manifest = make_manifest("train", method, kv, seed, outputs, start);
  const fs::path mpath = prefix + "_manifest.json";
  write_manifest(manifest, mpath);
  guard.files.push_back(mpath);
  guard.committed = true;
  return 0;
}

// ------------------------------------------------------------------- verify

int cmd_verify(unsigned threads) {
  using experiments::resolve_experiment_config;
  using experiments::run_experiment;
  bool all_pass = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
    all_pass &= pass;
  };

  {
    const auto result = run_experiment("daniel", resolve_experiment_config("daniel", Config{}), threads);
    const std::size_t trials = result.fit_json["trials"].get<std::size_t>();
    const std::size_t ok = result.fit_json["satisfied"].get<std::size_t>();
    report("daniel-bound", ok == trials,
           std::to_string(ok) + "/" + std::to_string(trials) + " perturbation trials satisfied");
  }
  {
    const auto result =
        run_experiment("eps-delta", resolve_experiment_config("eps-delta", Config{}), threads);
    const std::size_t checks = result.fit_json["checks"].get<std::size_t>();
    const std::size_t ok = result.fit_json["satisfied"].get<std::size_t>();
    report("eps-delta-bound", ok == checks,
           std::to_string(ok) + "/" + std::to_string(checks) + " checkpoints satisfied");
  }
  {
    const auto result =
        run_experiment("latala", resolve_experiment_config("latala", Config{}), threads);
    const double slope_r = result.fit_json["vs_r"]["exponent"].get<double>();
    const double slope_m = result.fit_json["vs_m"]["exponent"].get<double>();
    report("latala-slope-vs-shots", std::fabs(slope_r + 0.5) <= 0.05,
           "slope " + format_double(slope_r) + " (target -0.5 +- 0.05)");
    report("latala-slope-vs-size", std::fabs(slope_m - 0.5) <= 0.15,
           "slope " + format_double(slope_m) + " (target +0.5 +- 0.15)");
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum SVM training laboratory"};
  app.require_subcommand(1);
  unsigned threads = default_threads();
  app.add_option("--threads", threads, "worker threads (env QSVMLAB_THREADS)")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate margin-controlled artificial data");
  int gen_m = 100;
  double gen_mu = 0.1;
  int gen_qubits = 4, gen_reps = 4, gen_layers = -1;
  bool gen_verbatim = false;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  gen->add_option("--m", gen_m, "data set size (even)")->capture_default_str();
  gen->add_option("--mu", gen_mu, "margin; negative overlaps the classes")->capture_default_str();
  gen->add_option("--qubits", gen_qubits, "qubits = feature dimension")->capture_default_str();
  gen->add_option("--reps", gen_reps, "feature map repetitions")->capture_default_str();
  gen->add_option("--gen-layers", gen_layers,
                  "variational layers of the generator; -1 = identity")->capture_default_str();
  gen->add_flag("--verbatim", gen_verbatim, "stop on the raw while-guard (may unbalance classes)");
  gen->add_option("--seed", gen_seed, "master seed; omitted = entropy");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  // kernel
  auto* ker = app.add_subcommand("kernel", "evaluate a kernel matrix, exact or shot-noisy");
  std::string ker_data, ker_out;
  int ker_reps = 4;
  std::uint64_t ker_shots = 0;
  std::optional<std::uint64_t> ker_seed;
  ker->add_option("--data", ker_data, "training data CSV")->required();
  ker->add_option("--out", ker_out, "output kernel CSV")->required();
  ker->add_option("--reps", ker_reps, "feature map repetitions")->capture_default_str();
  ker->add_option("--shots", ker_shots, "shots per entry; 0 = exact")->capture_default_str();
  ker->add_option("--seed", ker_seed, "noise seed; omitted = entropy");

  // train
  auto* tr = app.add_subcommand("train", "train a classifier on a data set");
  std::string tr_method, tr_data, tr_out;
  double tr_lambda = 0.1, tr_tau = 1e-4, tr_param_tol = 1e-4;
  std::uint64_t tr_shots = 0, tr_steps = 1000, tr_batch = 5;
  int tr_reps = 4, tr_layers = 1;
  bool tr_no_bias = false;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--method", tr_method, "dual | pegasos | vqc")->required();
  tr->add_option("--data", tr_data, "training data CSV")->required();
  tr->add_option("--out", tr_out, "output prefix")->required();
  tr->add_option("--lambda", tr_lambda, "regularization")->capture_default_str();
  tr->add_option("--shots", tr_shots, "shots per evaluation; 0 = exact")->capture_default_str();
  tr->add_option("--steps", tr_steps, "iteration cap")->capture_default_str();
  tr->add_option("--tau", tr_tau, "pegasos loss-difference tolerance")->capture_default_str();
  tr->add_option("--batch", tr_batch, "vqc SPSA batch size")->capture_default_str();
  tr->add_option("--layers", tr_layers, "vqc ansatz layers")->capture_default_str();
  tr->add_option("--param-tol", tr_param_tol,
                 "vqc parameter-delta convergence; 0 = run all steps")
      ->capture_default_str();
  tr->add_option("--reps", tr_reps, "feature map repetitions")->capture_default_str();
  tr->add_flag("--no-bias", tr_no_bias, "freeze the vqc bias at zero");
  tr->add_option("--seed", tr_seed, "seed; omitted = entropy");

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a scaling study or theory check");
  std::string ex_name, ex_config, ex_out = "out", ex_manifest;
  std::vector<std::string> ex_sets;
  bool ex_plot = false;
  std::optional<std::uint64_t> ex_seed;
  ex->add_option("name", ex_name,
                 "dual-eps | dual-m | pegasos-eps | pegasos-m | vqc-eps | latala | daniel | "
                 "eps-delta | pegasos-noise");
  ex->add_option("--config", ex_config, "flat key = value config file");
  ex->add_option("--set", ex_sets, "override: key=value (repeatable)");
  ex->add_option("--out", ex_out, "output directory")->capture_default_str();
  ex->add_flag("--plot", ex_plot, "also write plot.svg");
  ex->add_option("--seed", ex_seed, "master seed; omitted = entropy");
  ex->add_option("--from-manifest", ex_manifest, "re-run exactly as recorded in a manifest");

  // verify
  auto* ver = app.add_subcommand("verify", "run the numeric theory checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::map<std::string, std::string> kv{
          {"m", std::to_string(gen_m)},          {"mu", format_double(gen_mu)},
          {"qubits", std::to_string(gen_qubits)}, {"reps", std::to_string(gen_reps)},
          {"gen_layers", std::to_string(gen_layers)},
          {"verbatim", gen_verbatim ? "true" : "false"},
          {"seed", std::to_string(pick_seed(gen_seed))},
          {"out", gen_out}};
      return cmd_gen_data(kv);
    }
    if (ker->parsed()) {
      std::map<std::string, std::string> kv{{"data", ker_data},
                                            {"out", ker_out},
                                            {"reps", std::to_string(ker_reps)},
                                            {"shots", std::to_string(ker_shots)},
                                            {"seed", std::to_string(pick_seed(ker_seed))}};
      return cmd_kernel(kv, threads);
    }
    if (tr->parsed()) {
      std::map<std::string, std::string> kv{
          {"method", tr_method},
          {"data", tr_data},
          {"out", tr_out},
          {"lambda", format_double(tr_lambda)},
          {"shots", std::to_string(tr_shots)},
          {"steps", std::to_string(tr_steps)},
          {"tau", format_double(tr_tau)},
          {"batch", std::to_string(tr_batch)},
          {"layers", std::to_string(tr_layers)},
          {"param_tol", format_double(tr_param_tol)},
          {"reps", std::to_string(tr_reps)},
          {"train_bias", tr_no_bias ? "false" : "true"},
          {"seed", std::to_string(pick_seed(tr_seed))}};
      return cmd_train(kv);
    }
    if (ex->parsed()) {
      if (!ex_manifest.empty()) {
        const auto files = experiments::rerun_from_manifest(ex_manifest, ex_out, threads, ex_plot);
        std::cout << "re-ran from manifest; wrote " << files.results_csv.string() << "\n";
        return 0;
      }
      if (ex_name.empty()) throw ConfigError("experiment: name or --from-manifest required");
      Config user = ex_config.empty() ? Config{} : Config::parse_file(ex_config);
      for (const auto& kv : ex_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        user.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (ex_seed) user.set("seed", std::to_string(*ex_seed));
      if (!user.has("seed")) {
        const std::uint64_t seed = entropy_seed();
        std::cout << "seed not given; using entropy seed " << seed << "\n";
        user.set("seed", std::to_string(seed));
      }
      const auto files = experiments::write_experiment(ex_name, user, ex_out, threads, ex_plot);
      std::cout << "wrote " << files.results_csv.string() << "\n";
      return 0;
    }
    if (ver->parsed()) return cmd_verify(threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
