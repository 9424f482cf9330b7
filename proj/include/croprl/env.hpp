#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "croprl/cgm.hpp"
#include "croprl/rng.hpp"
#include "croprl/weather.hpp"

namespace croprl {

// Measurable feature order used everywhere: cost vectors, action masks,
// observation slots 1..6 and the trailing mask bits.
constexpr int kNumMeasurable = 6;
constexpr std::array<const char*, kNumMeasurable> kMeasurableNames = {
    "tagp", "lai", "navail", "sm", "nuptake_total", "random"};

// Observation layout: 10 feature slots followed by 6 mask bits, total 16.
constexpr int kNumFeatureSlots = 10;
constexpr int kObservationSize = 16;
constexpr std::array<const char*, kNumFeatureSlots> kFeatureSlotNames = {
    "dvs", "tagp", "lai", "navail", "sm", "nuptake_total", "random",
    "irrad_avg", "tmin_avg", "rain_avg"};
// dvs (slot 0) and the weather slots (7..9) are always observed and never masked.
constexpr int kFirstMeasurableSlot = 1;

enum class Observability { afa, all_observed, none_observed };

const char* to_string(Observability o);

struct ScenarioConfig {
  std::string name = "custom";
  // cost per measurement, ordered as kMeasurableNames
  std::array<double, kNumMeasurable> cost_vector{};
  double beta = 2.0;              // price ratio yield/fertilizer per kg
  double deployment_cost = 10.0;  // charged in any week with a nonzero dose
  std::vector<double> n_levels = {0, 10, 20, 30, 40, 50, 60};  // kg/ha
  double n_cap = 200.0;           // cumulative kg/ha per episode
  int weeks = kDefaultEpisodeWeeks;
  Observability observability = Observability::afa;
  double gamma = 1.0;  // objective discount; training may use its own
  double init_soil_mean = 15.0;
  double init_soil_sd = 15.0;
  double init_clip_lo = 0.0;
  double init_clip_hi = 100.0;
  double random_feature_mean = 10.0;
  double random_feature_sd = 10.0;
};

void validate_scenario(const ScenarioConfig& sc);

// Known presets: no-cost, flat-cost, realistic, exp-cost, all-observed, none-observed.
ScenarioConfig make_scenario(const std::string& name);
const std::vector<std::string>& scenario_names();

ScenarioConfig scenario_from_json_file(const std::filesystem::path& path);
void scenario_to_json_file(const ScenarioConfig& sc, const std::filesystem::path& path);
std::string scenario_to_json_string(const ScenarioConfig& sc);

struct AgentAction {
  int fert_index = 0;
  std::array<std::uint8_t, kNumMeasurable> measure_mask{};
};

struct StepObservation {
  std::array<double, kObservationSize> values{};
};

// Frozen standardization parameters for the 10 feature slots, derived from
// calibration runs and reused unchanged for training and evaluation.
struct NormalizationStats {
  std::array<double, kNumFeatureSlots> mean{};
  std::array<double, kNumFeatureSlots> sd{};  // floored at kSdFloor

  static constexpr double kSdFloor = 1e-6;

  void save(const std::filesystem::path& path) const;
  static NormalizationStats load(const std::filesystem::path& path);
};

struct WeekRecord {
  int week = 0;
  SimState state_end;  // true simulator state at week end
  AgentAction action;
  double requested_dose = 0.0;
  double n_applied = 0.0;     // after cap truncation
  double cumulative_n = 0.0;
  double measurement_cost = 0.0;
  double reward = 0.0;
};

struct EpisodeRecord {
  std::string scenario;
  std::string weather_label;
  std::uint64_t seed = 0;
  std::vector<WeekRecord> weeks;

  double final_twso() const { return weeks.empty() ? 0.0 : weeks.back().state_end.crop.twso; }
  double total_reward() const;
  double total_n_applied() const { return weeks.empty() ? 0.0 : weeks.back().cumulative_n; }
  std::array<double, kNumMeasurable> measure_counts() const;
};

// CSV schema: week,dvs,twso,tagp,lai,sm,navail,nuptake,n_applied,cum_n,mask_bits,measure_cost,reward
// mask_bits is a 6-char 0/1 string in kMeasurableNames order.
void write_episode_csv(const EpisodeRecord& rec, std::ostream& out);

double measurement_cost(const std::array<std::uint8_t, kNumMeasurable>& mask, const ScenarioConfig& sc);

// Weekly pooling of the daily simulator outputs into the 16-slot vector:
// weather slots are weekly means, crop slots take the last daily value, the
// random slot is drawn from the episode stream, every feature slot is
// standardized with the frozen stats (skipped when stats are absent, which is
// the calibration path), then unmeasured slots are zeroed and masks appended.
StepObservation assemble_observation(const std::vector<SimState>& week_states,
                                     const std::vector<WeatherDay>& week_weather,
                                     const std::array<std::uint8_t, kNumMeasurable>& mask,
                                     const NormalizationStats* stats, double random_value);

// The weekly decision-step environment over the daily simulator.
class CropEnv {
 public:
  struct Step {
    StepObservation obs;
    double reward = 0.0;
    bool done = false;
    WeekRecord info;
  };

  // stats == nullopt runs in raw-observation mode (calibration only).
  CropEnv(ScenarioConfig scenario, CgmParams params, std::optional<NormalizationStats> stats);

  // The weather year must outlive the episode.
  StepObservation reset(const WeatherYear* year, std::uint64_t seed);

  Step step(const AgentAction& action);
  // Baseline path: inject a dose directly, bypassing the level grid.
  Step step_dose(double requested_kg, const std::array<std::uint8_t, kNumMeasurable>& mask);

  bool done() const { return week_ >= scenario_.weeks; }
  int week() const { return week_; }
  const SimState& state() const { return sim_; }
  const EpisodeRecord& episode() const { return record_; }
  const ScenarioConfig& scenario() const { return scenario_; }
  const CgmParams& params() const { return params_; }

  int fert_levels() const { return static_cast<int>(scenario_.n_levels.size()); }
  // 6 in afa mode; 0 when the scenario fixes the masks (fertilize-only action space).
  int measure_flags() const;

  // Initial-soil generator: pre-clip draws and the mapped SoilState for a seed.
  struct InitDraw {
    double moisture_pct_raw = 0.0;
    double navail_raw = 0.0;
    SoilState soil;
  };
  static InitDraw draw_initial_soil(const ScenarioConfig& sc, const CgmParams& params,
                                    std::uint64_t seed);

 private:
  Step step_impl(double requested_dose, int fert_index,
                 const std::array<std::uint8_t, kNumMeasurable>& mask);
  std::array<std::uint8_t, kNumMeasurable> effective_mask(
      const std::array<std::uint8_t, kNumMeasurable>& requested) const;

  ScenarioConfig scenario_;
  CgmParams params_;
  std::optional<NormalizationStats> stats_;
  const WeatherYear* year_ = nullptr;
  SimState sim_;
  Rng random_feature_rng_{0};
  int week_ = 0;
  double cumulative_n_ = 0.0;
  EpisodeRecord record_;
};

// Runs seeded random-policy episodes with every feature measured and costs
// ignored, and freezes per-slot mean/sd over all weekly observations.
// raw_sink, when given, receives every raw (pre-standardization) feature
// vector the stats were computed from.
NormalizationStats calibrate_normalization(const ScenarioConfig& scenario, const CgmParams& params,
                                           const std::vector<const WeatherYear*>& weather_set,
                                           int episodes, std::uint64_t seed,
                                           std::vector<std::array<double, kNumFeatureSlots>>* raw_sink = nullptr);

}  // namespace croprl
