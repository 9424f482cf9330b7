#include "croprl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "croprl/baselines.hpp"
#include "croprl/errors.hpp"
#include "croprl/eval.hpp"
#include "croprl/manifest.hpp"
#include "croprl/ppo.hpp"
#include "json.hpp"

namespace croprl {

namespace {

// ---------------------------------------------------------------------------
// weather set construction shared by the commands

struct WeatherArgs {
  std::vector<std::string> csv_paths;
  int synthetic = 0;
  std::string climate = "mixed";  // normal | cold | mixed
  std::uint64_t weather_seed = 1;
  std::string split = "";  // train | eval | all; command-specific default
};

void add_weather_options(CLI::App* cmd, WeatherArgs& args, const std::string& default_split) {
  args.split = default_split;
  cmd->add_option("--weather-csv", args.csv_paths, "Weather year CSV file (repeatable)");
  cmd->add_option("--synthetic", args.synthetic, "Number of synthetic weather years to generate");
  cmd->add_option("--climate", args.climate, "Synthetic climate: normal, cold or mixed")
      ->envname("CROPRL_CLIMATE");
  cmd->add_option("--weather-seed", args.weather_seed, "Seed of the synthetic weather generator");
  cmd->add_option("--split", args.split,
                  "Year subset: train (odd years), eval (even years) or all");
}

std::vector<WeatherYear> build_years(const WeatherArgs& args) {
  std::vector<WeatherYear> years;
  for (const auto& path : args.csv_paths) years.push_back(load_weather_csv(path));
  for (int k = 0; k < args.synthetic; ++k) {
    std::string preset = args.climate;
    if (args.climate == "mixed") preset = (k % 3 == 2) ? "cold" : "normal";
    if (args.climate == "spring-mixed") preset = (k % 3 == 2) ? "spring-cold" : "spring";
    years.push_back(generate_synthetic_year(
        Rng::derive(args.weather_seed, static_cast<std::uint64_t>(k)).next_u64(),
        SyntheticClimateParams::preset(preset), preset + "-" + std::to_string(k)));
  }
  if (years.empty())
    throw ConfigError("no weather given: pass --weather-csv and/or --synthetic N");
  return years;
}

std::vector<const WeatherYear*> select_split(const std::vector<WeatherYear>& years,
                                             const std::string& split) {
  if (split != "all" && split != "train" && split != "eval")
    throw ConfigError("unknown split '" + split + "'");
  std::vector<const WeatherYear*> out;
  for (std::size_t k = 0; k < years.size(); ++k) {
    if (split == "all" || (split == "train" && k % 2 == 1) || (split == "eval" && k % 2 == 0))
      out.push_back(&years[k]);
  }
  if (out.empty()) throw ConfigError("weather split '" + split + "' selected no years");
  return out;
}

std::string weather_description(const WeatherArgs& args) {
  nlohmann::ordered_json j;
  j["csv"] = args.csv_paths;
  j["synthetic"] = args.synthetic;
  j["climate"] = args.climate;
  j["weather_seed"] = args.weather_seed;
  j["split"] = args.split;
  return j.dump();
}

// ---------------------------------------------------------------------------
// shared option bundles

struct CommonArgs {
  std::string scenario = "realistic";
  std::string scenario_file;
  std::string params_path;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario,
                  "Scenario preset: no-cost, flat-cost, realistic, exp-cost, all-observed, "
                  "none-observed")
      ->envname("CROPRL_SCENARIO");
  cmd->add_option("--scenario-file", args.scenario_file, "Scenario JSON instead of a preset");
  cmd->add_option("--params", args.params_path, "Crop model parameter JSON")
      ->envname("CROPRL_PARAMS");
  cmd->add_option("--seed", args.seed, "Master seed")->envname("CROPRL_SEED");
  cmd->add_option("--threads", args.threads, "Worker threads; 1 guarantees byte-identical reruns")
      ->envname("CROPRL_THREADS");
}

ScenarioConfig resolve_scenario(const CommonArgs& args) {
  if (!args.scenario_file.empty()) return scenario_from_json_file(args.scenario_file);
  return make_scenario(args.scenario);
}

std::filesystem::path resolved_params_path(const CommonArgs& args) {
  return args.params_path.empty() ? default_cgm_params_path()
                                  : std::filesystem::path(args.params_path);
}

CgmParams resolve_params(const CommonArgs& args) { return load_cgm_params(resolved_params_path(args)); }

Manifest base_manifest(const std::string& command, const CommonArgs& common,
                       const WeatherArgs& weather, const ScenarioConfig& scenario) {
  Manifest m;
  m.command = command;
  m.settings["scenario"] = scenario.name;
  m.settings["seed"] = std::to_string(common.seed);
  m.settings["threads"] = std::to_string(common.threads);
  m.settings["weather"] = weather_description(weather);
  m.input_hashes[resolved_params_path(common).string()] = sha256_file(resolved_params_path(common));
  return m;
}

void hash_outputs(Manifest& m, const std::filesystem::path& dir,
                  const std::vector<std::string>& names) {
  for (const auto& name : names) m.output_hashes[name] = sha256_file(dir / name);
}

// ---------------------------------------------------------------------------
// evaluation episodes

struct EvalJob {
  const ScenarioConfig* scenario = nullptr;
  const CgmParams* params = nullptr;
  const NormalizationStats* stats = nullptr;
  const ActorCritic* policy = nullptr;  // null for baselines
  std::string baseline;                 // "standard-practice" | "random-spread" | ""
  bool stochastic = false;
  std::uint64_t seed = 0;
};

EpisodeRecord run_eval_episode(const EvalJob& job, const WeatherYear* year,
                               std::uint64_t episode_seed) {
  CropEnv env(*job.scenario, *job.params, *job.stats);
  if (!job.baseline.empty()) {
    if (job.baseline == "standard-practice")
      return run_schedule_episode(env, year, episode_seed,
                                  standard_practice_schedule(job.scenario->weeks));
    if (job.baseline == "random-spread") {
      Rng rng = Rng::derive(episode_seed, 0x5B8EAD);
      return run_schedule_episode(env, year, episode_seed,
                                  random_spread_schedule(rng, job.scenario->weeks));
    }
    throw ConfigError("unknown baseline '" + job.baseline + "'");
  }

  StepObservation obs = env.reset(year, episode_seed);
  AcHidden hidden = job.policy->zero_hidden();
  Rng action_rng = Rng::derive(episode_seed, 0xEAC7);
  while (!env.done()) {
    const Vec x = Eigen::Map<const Vec>(obs.values.data(), kObservationSize);
    const PolicyOutput out = job.policy->forward(x, hidden);
    const AgentAction action =
        job.stochastic ? sample_action(out, action_rng).action : greedy_action(out);
    obs = env.step(action).obs;
  }
  return env.episode();
}

std::vector<EpisodeRecord> run_eval_suite(const EvalJob& job,
                                          const std::vector<const WeatherYear*>& years,
                                          int episodes_per_year, int threads) {
  struct Slot {
    const WeatherYear* year;
    std::uint64_t episode_seed;
  };
  std::vector<Slot> slots;
  for (std::size_t yi = 0; yi < years.size(); ++yi)
    for (int k = 0; k < episodes_per_year; ++k)
      slots.push_back(
          {years[yi], Rng::derive(job.seed, yi, static_cast<std::uint64_t>(k)).next_u64()});

  std::vector<EpisodeRecord> records(slots.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < slots.size(); ++i)
      records[i] = run_eval_episode(job, slots[i].year, slots[i].episode_seed);
    return records;
  }
  // deterministic regardless of thread count: results land by index
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= slots.size()) return;
      records[i] = run_eval_episode(job, slots[i].year, slots[i].episode_seed);
    }
  };
  std::vector<std::future<void>> futs;
  for (int t = 0; t < threads; ++t) futs.push_back(std::async(std::launch::async, worker));
  for (auto& f : futs) f.get();
  return records;
}

void write_eval_bundle(const std::filesystem::path& dir, const ScenarioConfig& scenario,
                       const std::vector<EpisodeRecord>& records,
                       const std::vector<const WeatherYear*>& years, std::uint64_t seed,
                       Manifest& manifest) {
  std::filesystem::create_directories(dir);

  std::ostringstream episodes;
  write_episodes_csv_header(episodes);
  for (const auto& rec : records) write_episodes_csv_row(rec, episodes);
  atomic_write_file(dir / "episodes.csv", episodes.str());

  std::ostringstream yields;
  write_yields_csv(summarize_yields(records, 10000, 0.95, seed), scenario.name, yields);
  atomic_write_file(dir / "yields.csv", yields.str());

  std::ostringstream measures;
  write_measures_csv(summarize_measures(records), measures);
  atomic_write_file(dir / "measures.csv", measures.str());

  std::ostringstream profile;
  write_temporal_profile_csv(temporal_profile(records, scenario.weeks), profile);
  atomic_write_file(dir / "temporal_profile.csv", profile.str());

  std::vector<std::string> outputs{"episodes.csv", "yields.csv", "measures.csv",
                                   "temporal_profile.csv"};

  // one trace per weather year: the first episode played on it
  for (const WeatherYear* year : years) {
    for (const auto& rec : records) {
      if (rec.weather_label == year->label) {
        std::ostringstream trace;
        export_trace(rec, trace);
        const std::string name = "trace_" + year->label + ".csv";
        atomic_write_file(dir / name, trace.str());
        outputs.push_back(name);
        break;
      }
    }
  }
  hash_outputs(manifest, dir, outputs);
  manifest.write(dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// commands

int cmd_calibrate(const CommonArgs& common, const WeatherArgs& weather, int episodes,
                  const std::string& out_path) {
  const ScenarioConfig scenario = resolve_scenario(common);
  const CgmParams params = resolve_params(common);
  const auto years = build_years(weather);
  const auto selected = select_split(years, weather.split);

  const NormalizationStats stats =
      calibrate_normalization(scenario, params, selected, episodes, common.seed);
  stats.save(out_path);

  Manifest m = base_manifest("calibrate", common, weather, scenario);
  m.settings["episodes"] = std::to_string(episodes);
  m.output_hashes[out_path] = sha256_file(out_path);
  const auto parent = std::filesystem::path(out_path).parent_path();
  m.write((parent.empty() ? std::filesystem::path(".") : parent) / "calibrate_manifest.json");
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

struct TrainArgs {
  TrainConfig cfg;
  std::string stats_path;
  std::string out_dir = "run";
};

int cmd_train(const CommonArgs& common, const WeatherArgs& weather, const TrainArgs& targs) {
  const ScenarioConfig scenario = resolve_scenario(common);
  const CgmParams params = resolve_params(common);
  const NormalizationStats stats = NormalizationStats::load(targs.stats_path);
  const auto years = build_years(weather);
  const auto selected = select_split(years, weather.split);

  TrainConfig cfg = targs.cfg;
  cfg.seed = common.seed;
  cfg.threads = common.threads;
  validate_train_config(cfg);

  const int n_measure = scenario.observability == Observability::afa ? kNumMeasurable : 0;
  ActorCritic policy(kObservationSize, cfg.hidden_width,
                     static_cast<int>(scenario.n_levels.size()), n_measure);
  policy.init_weights(cfg.seed);

  std::vector<std::unique_ptr<EnvInterface>> envs;
  for (int e = 0; e < cfg.n_envs; ++e)
    envs.push_back(std::make_unique<CropRolloutEnv>(
        scenario, params, stats, selected,
        Rng::derive(cfg.seed, 0xE2F, static_cast<std::uint64_t>(e)).next_u64()));

  const std::filesystem::path dir(targs.out_dir);
  std::filesystem::create_directories(dir);

  std::ostringstream log;
  write_train_log_header(log);
  TrainHooks hooks;
  hooks.on_log = [&log](const TrainLogRow& row) { write_train_log_row(log, row); };
  hooks.on_checkpoint = [&](long step) {
    if (cfg.checkpoint_every > 0 && step < cfg.total_steps)
      policy.save_checkpoint(dir / ("checkpoint_" + std::to_string(step) + ".bin"));
  };
  train(policy, std::move(envs), cfg, hooks);

  policy.save_checkpoint(dir / "checkpoint.bin");
  atomic_write_file(dir / "train_log.csv", log.str());
  atomic_write_file(dir / "config.json", scenario_to_json_string(scenario) + "\n");

  Manifest m = base_manifest("train", common, weather, scenario);
  m.settings["total_steps"] = std::to_string(cfg.total_steps);
  m.settings["learning_rate"] = std::to_string(cfg.learning_rate);
  m.settings["hidden_width"] = std::to_string(cfg.hidden_width);
  m.input_hashes[targs.stats_path] = sha256_file(targs.stats_path);
  hash_outputs(m, dir, {"checkpoint.bin", "train_log.csv", "config.json"});
  m.write(dir / "manifest.json");
  std::cout << "trained " << cfg.total_steps << " steps -> " << (dir / "checkpoint.bin").string()
            << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string baseline;
  std::string stats_path;
  std::string out_dir = "eval";
  int episodes_per_year = 1;
  bool stochastic = false;
};

int cmd_evaluate(const CommonArgs& common, const WeatherArgs& weather, const EvaluateArgs& eargs) {
  const ScenarioConfig scenario = resolve_scenario(common);
  const CgmParams params = resolve_params(common);
  const NormalizationStats stats = NormalizationStats::load(eargs.stats_path);
  const auto years = build_years(weather);
  const auto selected = select_split(years, weather.split);

  if (eargs.checkpoint.empty() == eargs.baseline.empty())
    throw ConfigError("pass exactly one of --checkpoint or --baseline");

  std::optional<ActorCritic> policy;
  if (!eargs.checkpoint.empty()) {
    policy = ActorCritic::load_checkpoint(eargs.checkpoint);
    const int n_measure = scenario.observability == Observability::afa ? kNumMeasurable : 0;
    if (policy->obs_size() != kObservationSize ||
        policy->n_fert() != static_cast<int>(scenario.n_levels.size()) ||
        policy->n_measure() != n_measure)
      throw ConfigError("checkpoint does not match the scenario action/observation space");
  }

  EvalJob job;
  job.scenario = &scenario;
  job.params = &params;
  job.stats = &stats;
  job.policy = policy ? &*policy : nullptr;
  job.baseline = eargs.baseline;
  job.stochastic = eargs.stochastic;
  job.seed = common.seed;

  const auto records = run_eval_suite(job, selected, eargs.episodes_per_year, common.threads);

  Manifest m = base_manifest("evaluate", common, weather, scenario);
  m.settings["episodes_per_year"] = std::to_string(eargs.episodes_per_year);
  m.settings["action_selection"] = eargs.stochastic ? "stochastic" : "greedy";
  if (!eargs.checkpoint.empty()) {
    m.settings["checkpoint"] = eargs.checkpoint;
    m.input_hashes[eargs.checkpoint] = sha256_file(eargs.checkpoint);
  } else {
    m.settings["baseline"] = eargs.baseline;
  }
  m.input_hashes[eargs.stats_path] = sha256_file(eargs.stats_path);
  write_eval_bundle(eargs.out_dir, scenario, records, selected, common.seed, m);
  std::cout << "evaluated " << records.size() << " episodes -> " << eargs.out_dir << "\n";
  return kExitOk;
}

// episodes.csv rows from one or more run directories, grouped by scenario
int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  struct Row {
    std::string scenario;
    double twso = 0.0;
    std::array<double, kNumMeasurable> counts{};
  };
  std::vector<Row> rows;
  for (const auto& dir : run_dirs) {
    const auto path = std::filesystem::path(dir) / "episodes.csv";
    std::ifstream in(path);
    if (!in) throw DataError("missing episodes.csv in run dir: " + dir);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      if (fields.size() != 6 + kNumMeasurable)
        throw DataError("malformed episodes.csv row in " + dir);
      Row r;
      r.scenario = fields[0];
      r.twso = std::stod(fields[3]);
      for (std::size_t i = 0; i < kNumMeasurable; ++i) r.counts[i] = std::stod(fields[6 + i]);
      rows.push_back(r);
    }
  }
  if (rows.empty()) throw DataError("no episodes found in the given run dirs");

  std::map<std::string, std::vector<Row>> by_scenario;
  for (const auto& r : rows) by_scenario[r.scenario].push_back(r);

  std::filesystem::create_directories(out_dir);
  std::ostringstream yields;
  yields << "scenario,median_t_ha,iqr,ci_low,ci_high,n\n";
  std::ostringstream measures;
  measures << "scenario,feature,mean_count,mad\n";
  char buf[256];
  for (const auto& [scenario, group] : by_scenario) {
    std::vector<double> t_ha;
    for (const auto& r : group) t_ha.push_back(r.twso / 1000.0);
    const double med = median(t_ha);
    const double spread = t_ha.size() > 1 ? iqr(t_ha) : 0.0;
    double lo = med, hi = med;
    if (t_ha.size() >= 2) std::tie(lo, hi) = bootstrap_median_ci(t_ha, 10000, 0.95, 0);
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%.6g,%zu\n", scenario.c_str(), med, spread,
                  lo, hi, t_ha.size());
    yields << buf;

    for (std::size_t i = 0; i < kNumMeasurable; ++i) {
      double mean = 0.0;
      for (const auto& r : group) mean += r.counts[i];
      mean /= static_cast<double>(group.size());
      double mad = 0.0;
      for (const auto& r : group) mad += std::abs(r.counts[i] - mean);
      mad /= static_cast<double>(group.size());
      std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%.6g\n", scenario.c_str(), kMeasurableNames[i],
                    mean, mad);
      measures << buf;
    }
  }
  atomic_write_file(std::filesystem::path(out_dir) / "report_yields.csv", yields.str());
  atomic_write_file(std::filesystem::path(out_dir) / "report_measures.csv", measures.str());

  Manifest m;
  m.command = "report";
  for (const auto& dir : run_dirs)
    m.input_hashes[(std::filesystem::path(dir) / "episodes.csv").string()] =
        sha256_file(std::filesystem::path(dir) / "episodes.csv");
  hash_outputs(m, out_dir, {"report_yields.csv", "report_measures.csv"});
  m.write(std::filesystem::path(out_dir) / "manifest.json");
  std::cout << "report -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_show_config() {
  nlohmann::ordered_json j;
  j["scenarios"] = nlohmann::ordered_json::object();
  for (const auto& name : scenario_names())
    j["scenarios"][name] =
        nlohmann::ordered_json::parse(scenario_to_json_string(make_scenario(name)));
  TrainConfig cfg;
  nlohmann::ordered_json t;
  t["learning_rate"] = cfg.learning_rate;
  t["total_steps"] = cfg.total_steps;
  t["n_envs"] = cfg.n_envs;
  t["horizon"] = cfg.horizon;
  t["minibatch_seqs"] = cfg.minibatch_seqs;
  t["epochs"] = cfg.epochs;
  t["clip_range"] = cfg.clip_range;
  t["gae_lambda"] = cfg.gae_lambda;
  t["train_gamma"] = cfg.train_gamma;
  t["value_coeff"] = cfg.value_coeff;
  t["entropy_coeff"] = cfg.entropy_coeff;
  t["max_grad_norm"] = cfg.max_grad_norm;
  t["hidden_width"] = cfg.hidden_width;
  j["train_defaults"] = t;
  j["default_params_path"] = default_cgm_params_path().string();
  j["weather_csv_schema"] = "day,irrad_j_m2,tmin_c,tmax_c,rain_cm";
  j["episode_csv_schema"] =
      "week,dvs,twso,tagp,lai,sm,navail,nuptake,n_applied,cum_n,mask_bits,measure_cost,reward";
  j["env_override_prefix"] = "CROPRL_";
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Costly-measurement crop management laboratory"};
  app.require_subcommand(1);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Derive observation normalization stats");
  CommonArgs cal_common;
  WeatherArgs cal_weather;
  int cal_episodes = 50;
  std::string cal_out = "stats.json";
  add_common_options(cal, cal_common);
  add_weather_options(cal, cal_weather, "train");
  cal->add_option("--episodes", cal_episodes, "Random-policy calibration episodes");
  cal->add_option("--out", cal_out, "Output stats JSON");

  // train
  auto* tr = app.add_subcommand("train", "Train a recurrent policy");
  CommonArgs tr_common;
  WeatherArgs tr_weather;
  TrainArgs tr_args;
  add_common_options(tr, tr_common);
  add_weather_options(tr, tr_weather, "train");
  tr->add_option("--stats", tr_args.stats_path, "Normalization stats JSON")->required();
  tr->add_option("--out", tr_args.out_dir, "Output run directory");
  tr->add_option("--steps", tr_args.cfg.total_steps, "Total environment steps");
  tr->add_option("--lr", tr_args.cfg.learning_rate, "Learning rate");
  tr->add_option("--n-envs", tr_args.cfg.n_envs, "Parallel environments");
  tr->add_option("--horizon", tr_args.cfg.horizon, "Steps per env per collection");
  tr->add_option("--minibatch-seqs", tr_args.cfg.minibatch_seqs, "Sequences per minibatch");
  tr->add_option("--epochs", tr_args.cfg.epochs, "Update epochs per batch");
  tr->add_option("--clip", tr_args.cfg.clip_range, "PPO clip range");
  tr->add_option("--gae-lambda", tr_args.cfg.gae_lambda, "GAE lambda");
  tr->add_option("--train-gamma", tr_args.cfg.train_gamma, "Training discount");
  tr->add_option("--value-coeff", tr_args.cfg.value_coeff, "Value loss coefficient");
  tr->add_option("--entropy-coeff", tr_args.cfg.entropy_coeff, "Entropy bonus coefficient");
  tr->add_option("--max-grad-norm", tr_args.cfg.max_grad_norm, "Gradient norm clip");
  tr->add_option("--width", tr_args.cfg.hidden_width, "Recurrent hidden width");
  tr->add_flag("--no-reward-norm", [&tr_args](std::int64_t) { tr_args.cfg.normalize_rewards = false; },
               "Disable reward scaling by the running return std");
  tr->add_option("--checkpoint-every", tr_args.cfg.checkpoint_every,
                 "Also checkpoint every N steps (0: end only)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint or baseline");
  CommonArgs ev_common;
  WeatherArgs ev_weather;
  EvaluateArgs ev_args;
  add_common_options(ev, ev_common);
  add_weather_options(ev, ev_weather, "eval");
  ev->add_option("--checkpoint", ev_args.checkpoint, "Policy checkpoint file");
  ev->add_option("--baseline", ev_args.baseline,
                 "Scripted baseline: standard-practice or random-spread");
  ev->add_option("--stats", ev_args.stats_path, "Normalization stats JSON")->required();
  ev->add_option("--out", ev_args.out_dir, "Output bundle directory");
  ev->add_option("--episodes-per-year", ev_args.episodes_per_year, "Episodes per weather year");
  ev->add_flag("--stochastic", ev_args.stochastic, "Sample actions instead of greedy selection");

  // baseline (evaluate --baseline under its own name)
  auto* bl = app.add_subcommand("baseline", "Run a scripted baseline");
  CommonArgs bl_common;
  WeatherArgs bl_weather;
  EvaluateArgs bl_args;
  std::string bl_name = "standard-practice";
  add_common_options(bl, bl_common);
  add_weather_options(bl, bl_weather, "eval");
  bl->add_option("--name", bl_name, "standard-practice or random-spread");
  bl->add_option("--stats", bl_args.stats_path, "Normalization stats JSON")->required();
  bl->add_option("--out", bl_args.out_dir, "Output bundle directory");
  bl->add_option("--episodes-per-year", bl_args.episodes_per_year, "Episodes per weather year");

  // report
  auto* rp = app.add_subcommand("report", "Merge evaluation bundles into aggregate tables");
  std::vector<std::string> rp_dirs;
  std::string rp_out = "report";
  rp->add_option("runs", rp_dirs, "Evaluation bundle directories")->required();
  rp->add_option("--out", rp_out, "Output directory");

  // show-config
  app.add_subcommand("show-config", "Print presets, defaults and schemas");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cal->parsed()) return cmd_calibrate(cal_common, cal_weather, cal_episodes, cal_out);
    if (tr->parsed()) return cmd_train(tr_common, tr_weather, tr_args);
    if (ev->parsed()) return cmd_evaluate(ev_common, ev_weather, ev_args);
    if (bl->parsed()) {
      bl_args.baseline = bl_name;
      return cmd_evaluate(bl_common, bl_weather, bl_args);
    }
    if (rp->parsed()) return cmd_report(rp_dirs, rp_out);
    return cmd_show_config();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace croprl
