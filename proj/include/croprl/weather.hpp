#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace croprl {

constexpr int kDaysPerWeek = 7;
constexpr int kDefaultEpisodeWeeks = 47;
// An episode covers exactly 47 weeks from sowing; weather must cover at least this.
constexpr int kMinCoverageDays = kDefaultEpisodeWeeks * kDaysPerWeek;  // 329

// One day of driving variables. Units are fixed at ingestion and never change:
// irrad J/m^2/day, temperatures degC, rain cm/day. day_index counts days since
// sowing (day 0 = sowing, October 1st in the fixed episode calendar).
struct WeatherDay {
  int day_index = 0;
  double irrad = 0.0;
  double tmin = 0.0;
  double tmax = 0.0;
  double rain = 0.0;
};

enum class WeatherSource { csv, synthetic };

struct WeatherYear {
  std::string label;
  std::vector<WeatherDay> days;  // consecutive day_index starting at 0
  WeatherSource source = WeatherSource::synthetic;
  std::uint64_t seed = 0;  // meaningful for synthetic years only
};

// Parameters of the synthetic generator: sinusoidal seasonal cycle with the
// coldest day in mid-January relative to an October 1st sowing, plus seeded
// noise. Lowering tmean_annual produces a "cold year" with a reduced
// cumulative minimum temperature.
struct SyntheticClimateParams {
  double tmean_annual = 10.0;       // degC
  double seasonal_amplitude = 7.0;  // degC, winter-summer half-swing
  double diurnal_range = 7.0;       // degC, tmax - tmin baseline
  double temp_noise_sd = 2.0;       // degC, additive daily noise
  double irrad_mean = 1.05e7;       // J/m^2/day
  double irrad_amplitude = 8.5e6;   // J/m^2/day
  double irrad_noise = 0.35;        // multiplicative cloud factor in [1-x, 1]
  double wet_day_prob = 0.5;
  double mean_wet_rain_cm = 0.45;   // cm on wet days
  // Day of the annual temperature minimum relative to day 0. 105 puts the
  // coldest day in mid-January for an October 1st start; ~290 starts the
  // season in early spring instead (warmth and light from day 0).
  double coldest_day_offset = 105.0;
  int days = 365;

  static SyntheticClimateParams normal_preset();
  static SyntheticClimateParams cold_preset();
  // Spring-start variants: the growth window opens immediately and the wet
  // early weeks put drainage pressure on any nitrogen applied before demand.
  static SyntheticClimateParams spring_preset();
  static SyntheticClimateParams spring_cold_preset();
  static SyntheticClimateParams preset(const std::string& name);
};

// Documented cumulative-tmin bands for the presets (sum over the 329-day
// episode window). Used by tests and sanity checks.
constexpr double kNormalPresetTminSumLo = 1750.0;
constexpr double kNormalPresetTminSumHi = 2300.0;
constexpr double kColdPresetTminSumLo = 1250.0;
constexpr double kColdPresetTminSumHi = 1750.0;

// CSV schema (exact header): day,irrad_j_m2,tmin_c,tmax_c,rain_cm
// UTF-8, '.' decimal separator, one row per day, day starts at 0 and is consecutive.
WeatherYear load_weather_csv(const std::filesystem::path& path);
void write_weather_csv(const WeatherYear& year, const std::filesystem::path& path);

WeatherYear generate_synthetic_year(std::uint64_t seed, const SyntheticClimateParams& climate,
                                    const std::string& label = "");

// Sum of tmin over the episode window (first 329 days).
double cumulative_tmin(const WeatherYear& year);

// Throws DataError if any WeatherDay invariant is violated or coverage is short.
void validate_weather(const WeatherYear& year);

}  // namespace croprl
