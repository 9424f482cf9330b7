#include "croprl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "croprl/errors.hpp"
#include "json.hpp"

namespace croprl {

namespace {

// stream tags for the per-episode substreams
constexpr std::uint64_t kInitStream = 0x1717;
constexpr std::uint64_t kRandomFeatureStream = 0x5EED;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* to_string(Observability o) {
  switch (o) {
    case Observability::afa: return "afa";
    case Observability::all_observed: return "all_observed";
    case Observability::none_observed: return "none_observed";
  }
  return "?";
}

void validate_scenario(const ScenarioConfig& sc) {
  for (double c : sc.cost_vector)
    if (c < 0.0) throw ConfigError("scenario: measurement costs must be >= 0");
  if (sc.n_levels.empty() || sc.n_levels.front() != 0.0)
    throw ConfigError("scenario: n_levels must start at 0");
  if (!std::is_sorted(sc.n_levels.begin(), sc.n_levels.end()))
    throw ConfigError("scenario: n_levels must be sorted");
  if (!(sc.n_cap > 0.0)) throw ConfigError("scenario: n_cap must be positive");
  if (sc.weeks < 1) throw ConfigError("scenario: weeks must be >= 1");
  if (sc.init_soil_sd < 0.0 || sc.random_feature_sd < 0.0)
    throw ConfigError("scenario: standard deviations must be >= 0");
  if (sc.init_clip_lo > sc.init_clip_hi) throw ConfigError("scenario: bad init clip range");
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"no-cost",  "flat-cost",    "realistic",
                                                 "exp-cost", "all-observed", "none-observed"};
  return names;
}

ScenarioConfig make_scenario(const std::string& name) {
  ScenarioConfig sc;
  sc.name = name;
  if (name == "no-cost") {
    sc.cost_vector = {0, 0, 0, 0, 0, 0};
  } else if (name == "flat-cost") {
    sc.cost_vector = {10, 10, 10, 10, 10, 10};
  } else if (name == "realistic") {
    // ordered (tagp, lai, navail, sm, nuptake_total, random)
    sc.cost_vector = {25, 5, 20, 5, 20, 10};
  } else if (name == "exp-cost") {
    sc.cost_vector = {60, 60, 60, 60, 60, 60};
  } else if (name == "all-observed") {
    sc.cost_vector = {0, 0, 0, 0, 0, 0};
    sc.observability = Observability::all_observed;
  } else if (name == "none-observed") {
    sc.cost_vector = {0, 0, 0, 0, 0, 0};
    sc.observability = Observability::none_observed;
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return sc;
}

namespace {

nlohmann::ordered_json scenario_to_json(const ScenarioConfig& sc) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["name"] = sc.name;
  j["cost_vector"] = sc.cost_vector;
  j["beta"] = sc.beta;
  j["deployment_cost"] = sc.deployment_cost;
  j["n_levels"] = sc.n_levels;
  j["n_cap"] = sc.n_cap;
  j["weeks"] = sc.weeks;
  j["observability"] = to_string(sc.observability);
  j["gamma"] = sc.gamma;
  j["init_soil_mean"] = sc.init_soil_mean;
  j["init_soil_sd"] = sc.init_soil_sd;
  j["init_clip"] = {sc.init_clip_lo, sc.init_clip_hi};
  j["random_feature_mean"] = sc.random_feature_mean;
  j["random_feature_sd"] = sc.random_feature_sd;
  return j;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig sc;
  try {
    sc.name = j.at("name").get<std::string>();
    sc.cost_vector = j.at("cost_vector").get<std::array<double, kNumMeasurable>>();
    sc.beta = j.at("beta").get<double>();
    sc.deployment_cost = j.at("deployment_cost").get<double>();
    sc.n_levels = j.at("n_levels").get<std::vector<double>>();
    sc.n_cap = j.at("n_cap").get<double>();
    sc.weeks = j.at("weeks").get<int>();
    const std::string obs = j.at("observability").get<std::string>();
    if (obs == "afa") sc.observability = Observability::afa;
    else if (obs == "all_observed") sc.observability = Observability::all_observed;
    else if (obs == "none_observed") sc.observability = Observability::none_observed;
    else throw ConfigError("scenario json: unknown observability '" + obs + "'");
    sc.gamma = j.at("gamma").get<double>();
    sc.init_soil_mean = j.at("init_soil_mean").get<double>();
    sc.init_soil_sd = j.at("init_soil_sd").get<double>();
    sc.init_clip_lo = j.at("init_clip").at(0).get<double>();
    sc.init_clip_hi = j.at("init_clip").at(1).get<double>();
    sc.random_feature_mean = j.at("random_feature_mean").get<double>();
    sc.random_feature_sd = j.at("random_feature_sd").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario json: ") + e.what());
  }
  validate_scenario(sc);
  return sc;
}

}  // namespace

std::string scenario_to_json_string(const ScenarioConfig& sc) { return scenario_to_json(sc).dump(2); }

void scenario_to_json_file(const ScenarioConfig& sc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write scenario: " + path.string());
  out << scenario_to_json_string(sc) << '\n';
}

ScenarioConfig scenario_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

void NormalizationStats::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["slots"] = kFeatureSlotNames;
  j["mean"] = mean;
  j["sd"] = sd;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write normalization stats: " + path.string());
  out << j.dump(2) << '\n';
}

NormalizationStats NormalizationStats::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open normalization stats: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("normalization stats " + path.string() + ": " + e.what());
  }
  NormalizationStats st;
  try {
    st.mean = j.at("mean").get<std::array<double, kNumFeatureSlots>>();
    st.sd = j.at("sd").get<std::array<double, kNumFeatureSlots>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("normalization stats " + path.string() + ": " + e.what());
  }
  for (double s : st.sd)
    if (!(s >= kSdFloor)) throw DataError("normalization stats: sd below floor");
  return st;
}

double EpisodeRecord::total_reward() const {
  double sum = 0.0;
  for (const WeekRecord& w : weeks) sum += w.reward;
  return sum;
}

std::array<double, kNumMeasurable> EpisodeRecord::measure_counts() const {
  std::array<double, kNumMeasurable> counts{};
  for (const WeekRecord& w : weeks)
    for (std::size_t i = 0; i < kNumMeasurable; ++i) counts[i] += w.action.measure_mask[i];
  return counts;
}

void write_episode_csv(const EpisodeRecord& rec, std::ostream& out) {
  out << "week,dvs,twso,tagp,lai,sm,navail,nuptake,n_applied,cum_n,mask_bits,measure_cost,reward\n";
  for (const WeekRecord& w : rec.weeks) {
    std::string bits(kNumMeasurable, '0');
    for (std::size_t i = 0; i < kNumMeasurable; ++i)
      if (w.action.measure_mask[i]) bits[i] = '1';
    out << w.week << ',' << format_double(w.state_end.crop.dvs) << ','
        << format_double(w.state_end.crop.twso) << ',' << format_double(w.state_end.crop.tagp) << ','
        << format_double(w.state_end.crop.lai) << ',' << format_double(w.state_end.soil.sm) << ','
        << format_double(w.state_end.soil.navail) << ','
        << format_double(w.state_end.crop.n_uptake_total) << ',' << format_double(w.n_applied) << ','
        << format_double(w.cumulative_n) << ',' << bits << ',' << format_double(w.measurement_cost)
        << ',' << format_double(w.reward) << '\n';
  }
}

double measurement_cost(const std::array<std::uint8_t, kNumMeasurable>& mask, const ScenarioConfig& sc) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumMeasurable; ++i)
    if (mask[i]) sum += sc.cost_vector[i];
  return sum;
}

StepObservation assemble_observation(const std::vector<SimState>& week_states,
                                     const std::vector<WeatherDay>& week_weather,
                                     const std::array<std::uint8_t, kNumMeasurable>& mask,
                                     const NormalizationStats* stats, double random_value) {
  if (week_states.size() != kDaysPerWeek || week_weather.size() != kDaysPerWeek)
    throw ConfigError("assemble_observation expects exactly 7 daily states and weather days");

  const SimState& last = week_states.back();
  double irrad_sum = 0.0, tmin_sum = 0.0, rain_sum = 0.0;
  for (const WeatherDay& d : week_weather) {
    irrad_sum += d.irrad;
    tmin_sum += d.tmin;
    rain_sum += d.rain;
  }

  std::array<double, kNumFeatureSlots> feat{};
  feat[0] = last.crop.dvs;
  feat[1] = last.crop.tagp;
  feat[2] = last.crop.lai;
  feat[3] = last.soil.navail;
  feat[4] = last.soil.sm;
  feat[5] = last.crop.n_uptake_total;
  feat[6] = random_value;
  feat[7] = irrad_sum / kDaysPerWeek;
  feat[8] = tmin_sum / kDaysPerWeek;
  feat[9] = rain_sum / kDaysPerWeek;

  StepObservation obs;
  for (std::size_t i = 0; i < kNumFeatureSlots; ++i) {
    double v = feat[i];
    if (stats) v = (v - stats->mean[i]) / stats->sd[i];
    obs.values[i] = v;
  }
  for (std::size_t i = 0; i < kNumMeasurable; ++i) {
    const bool measured = mask[i] != 0;
    if (!measured) obs.values[kFirstMeasurableSlot + i] = 0.0;
    obs.values[kNumFeatureSlots + i] = measured ? 1.0 : 0.0;
  }
  return obs;
}

CropEnv::CropEnv(ScenarioConfig scenario, CgmParams params, std::optional<NormalizationStats> stats)
    : scenario_(std::move(scenario)), params_(std::move(params)), stats_(std::move(stats)) {
  validate_scenario(scenario_);
  validate_cgm_params(params_);
}

int CropEnv::measure_flags() const {
  return scenario_.observability == Observability::afa ? kNumMeasurable : 0;
}

CropEnv::InitDraw CropEnv::draw_initial_soil(const ScenarioConfig& sc, const CgmParams& params,
                                             std::uint64_t seed) {
  Rng rng = Rng::derive(seed, kInitStream);
  InitDraw d;
  // draw order is part of the contract: moisture percentage first, then navail
  d.moisture_pct_raw = rng.normal(sc.init_soil_mean, sc.init_soil_sd);
  d.navail_raw = rng.normal(sc.init_soil_mean, sc.init_soil_sd);
  const double pct = std::clamp(d.moisture_pct_raw, sc.init_clip_lo, sc.init_clip_hi);
  const double navail = std::clamp(d.navail_raw, sc.init_clip_lo, sc.init_clip_hi);
  // percentage of plant-available capacity: 0 -> wilting point, 100 -> field capacity
  d.soil.sm = params.sm_wp + (pct / 100.0) * (params.sm_fc - params.sm_wp);
  d.soil.navail = navail;
  return d;
}

std::array<std::uint8_t, kNumMeasurable> CropEnv::effective_mask(
    const std::array<std::uint8_t, kNumMeasurable>& requested) const {
  std::array<std::uint8_t, kNumMeasurable> mask{};
  switch (scenario_.observability) {
    case Observability::afa:
      for (std::size_t i = 0; i < kNumMeasurable; ++i) mask[i] = requested[i] ? 1 : 0;
      break;
    case Observability::all_observed:
      mask.fill(1);
      break;
    case Observability::none_observed:
      mask.fill(0);
      break;
  }
  return mask;
}

StepObservation CropEnv::reset(const WeatherYear* year, std::uint64_t seed) {
  if (year == nullptr) throw ConfigError("reset requires a weather year");
  validate_weather(*year);
  if (static_cast<int>(year->days.size()) < scenario_.weeks * kDaysPerWeek)
    throw DataError("weather '" + year->label + "' shorter than the episode");

  year_ = year;
  week_ = 0;
  cumulative_n_ = 0.0;

  const InitDraw draw = draw_initial_soil(scenario_, params_, seed);
  sim_ = initial_sim_state(draw.soil);
  random_feature_rng_ = Rng::derive(seed, kRandomFeatureStream);

  record_ = EpisodeRecord{};
  record_.scenario = scenario_.name;
  record_.weather_label = year->label;
  record_.seed = seed;

  // Week-0 observation: nothing has been measured and no week has elapsed, so
  // the measurable and weather slots read zero; dvs is always populated.
  const double random_raw =
      random_feature_rng_.normal(scenario_.random_feature_mean, scenario_.random_feature_sd);
  StepObservation obs;
  double dvs = sim_.crop.dvs;
  if (stats_) dvs = (dvs - stats_->mean[0]) / stats_->sd[0];
  obs.values[0] = dvs;
  const auto mask = effective_mask({});
  if (scenario_.observability == Observability::all_observed) {
    // fully observable scenarios see the (standardized) initial state
    std::array<double, kNumFeatureSlots> feat{};
    feat[1] = sim_.crop.tagp;
    feat[2] = sim_.crop.lai;
    feat[3] = sim_.soil.navail;
    feat[4] = sim_.soil.sm;
    feat[5] = sim_.crop.n_uptake_total;
    feat[6] = random_raw;
    for (std::size_t i = kFirstMeasurableSlot; i < kFirstMeasurableSlot + kNumMeasurable; ++i) {
      double v = feat[i];
      if (stats_) v = (v - stats_->mean[i]) / stats_->sd[i];
      obs.values[i] = v;
    }
  }
  for (std::size_t i = 0; i < kNumMeasurable; ++i)
    obs.values[kNumFeatureSlots + i] = mask[i] ? 1.0 : 0.0;
  return obs;
}

CropEnv::Step CropEnv::step(const AgentAction& action) {
  if (action.fert_index < 0 || action.fert_index >= fert_levels())
    throw ConfigError("fert_index " + std::to_string(action.fert_index) + " out of range");
  return step_impl(scenario_.n_levels[static_cast<std::size_t>(action.fert_index)],
                   action.fert_index, action.measure_mask);
}

CropEnv::Step CropEnv::step_dose(double requested_kg,
                                 const std::array<std::uint8_t, kNumMeasurable>& mask) {
  if (requested_kg < 0.0 || !std::isfinite(requested_kg))
    throw ConfigError("requested dose must be finite and >= 0");
  return step_impl(requested_kg, -1, mask);
}

CropEnv::Step CropEnv::step_impl(double requested_dose, int fert_index,
                                 const std::array<std::uint8_t, kNumMeasurable>& requested_mask) {
  if (year_ == nullptr) throw ConfigError("step before reset");
  if (done()) throw ConfigError("step after episode end");

  // cap enforcement by truncation; the assignment branch keeps cumulative_n
  // exactly at n_cap, never a rounding error above it
  const double remaining = scenario_.n_cap - cumulative_n_;
  double applied;
  if (requested_dose >= remaining) {
    applied = std::max(0.0, remaining);
    cumulative_n_ = scenario_.n_cap;
  } else {
    applied = requested_dose;
    cumulative_n_ += applied;
  }

  const double twso_before = sim_.crop.twso;
  std::vector<SimState> week_states;
  week_states.reserve(kDaysPerWeek);
  std::vector<WeatherDay> week_weather;
  week_weather.reserve(kDaysPerWeek);
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const auto& wd = year_->days[static_cast<std::size_t>(week_ * kDaysPerWeek + d)];
    // the week's dose lands on the first day
    sim_ = advance_day(sim_, wd, d == 0 ? applied : 0.0, params_);
    week_states.push_back(sim_);
    week_weather.push_back(wd);
  }

  const auto mask = effective_mask(requested_mask);
  const double cost = measurement_cost(mask, scenario_);
  const double delta_twso = sim_.crop.twso - twso_before;
  const double reward = delta_twso - scenario_.beta * applied -
                        (applied > 0.0 ? scenario_.deployment_cost : 0.0) - cost;

  const double random_raw =
      random_feature_rng_.normal(scenario_.random_feature_mean, scenario_.random_feature_sd);
  Step out;
  out.obs = assemble_observation(week_states, week_weather, mask,
                                 stats_ ? &*stats_ : nullptr, random_raw);
  out.reward = reward;

  WeekRecord rec;
  rec.week = week_;
  rec.state_end = sim_;
  rec.action.fert_index = fert_index;
  rec.action.measure_mask = mask;
  rec.requested_dose = requested_dose;
  rec.n_applied = applied;
  rec.cumulative_n = cumulative_n_;
  rec.measurement_cost = cost;
  rec.reward = reward;
  record_.weeks.push_back(rec);
  out.info = rec;

  ++week_;
  out.done = done();
  return out;
}

NormalizationStats calibrate_normalization(const ScenarioConfig& scenario, const CgmParams& params,
                                           const std::vector<const WeatherYear*>& weather_set,
                                           int episodes, std::uint64_t seed,
                                           std::vector<std::array<double, kNumFeatureSlots>>* raw_sink) {
  if (episodes < 1) throw ConfigError("calibration needs at least one episode");
  if (weather_set.empty()) throw ConfigError("calibration needs at least one weather year");

  ScenarioConfig cal = scenario;
  cal.cost_vector.fill(0.0);  // costs ignored while calibrating
  cal.observability = Observability::afa;
  CropEnv env(cal, params, std::nullopt);  // raw observations

  std::array<double, kNumFeatureSlots> mean{};
  std::array<double, kNumFeatureSlots> m2{};
  long n = 0;

  Rng policy_rng = Rng::derive(seed, 0xCA11B7A7Eull);
  AgentAction action;
  action.measure_mask.fill(1);

  for (int e = 0; e < episodes; ++e) {
    const std::size_t year_idx = static_cast<std::size_t>(policy_rng.uniform_int(weather_set.size()));
    env.reset(weather_set[year_idx],
              Rng::derive(seed, 0xEB15, static_cast<std::uint64_t>(e)).next_u64());
    while (!env.done()) {
      action.fert_index =
          static_cast<int>(policy_rng.uniform_int(static_cast<std::uint64_t>(env.fert_levels())));
      const CropEnv::Step s = env.step(action);
      ++n;
      if (raw_sink) {
        std::array<double, kNumFeatureSlots> raw;
        std::copy_n(s.obs.values.begin(), kNumFeatureSlots, raw.begin());
        raw_sink->push_back(raw);
      }
      for (std::size_t i = 0; i < kNumFeatureSlots; ++i) {
        // Welford
        const double x = s.obs.values[i];
        const double delta = x - mean[i];
        mean[i] += delta / static_cast<double>(n);
        m2[i] += delta * (x - mean[i]);
      }
    }
  }

  NormalizationStats stats;
  for (std::size_t i = 0; i < kNumFeatureSlots; ++i) {
    stats.mean[i] = mean[i];
    stats.sd[i] = std::max(NormalizationStats::kSdFloor,
                           std::sqrt(m2[i] / static_cast<double>(n)));
  }
  return stats;
}

}  // namespace croprl
