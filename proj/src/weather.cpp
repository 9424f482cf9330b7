#include "croprl/weather.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "croprl/errors.hpp"
#include "croprl/rng.hpp"

namespace croprl {

namespace {

constexpr const char* kCsvHeader = "day,irrad_j_m2,tmin_c,tmax_c,rain_cm";

double parse_double(const std::string& field, int line_no, const char* col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw DataError("weather csv line " + std::to_string(line_no) + ": cannot parse " + col +
                    " from '" + field + "'");
  }
  if (pos != field.size()) {
    throw DataError("weather csv line " + std::to_string(line_no) + ": trailing junk in " + col +
                    " field '" + field + "'");
  }
  return v;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_day(const WeatherDay& d, int line_no) {
  const std::string where =
      line_no > 0 ? "weather csv line " + std::to_string(line_no) : "weather day " + std::to_string(d.day_index);
  if (!(std::isfinite(d.irrad) && std::isfinite(d.tmin) && std::isfinite(d.tmax) && std::isfinite(d.rain)))
    throw DataError(where + ": non-finite value");
  if (d.day_index < 0) throw DataError(where + ": day index must be >= 0");
  if (d.irrad < 0.0) throw DataError(where + ": irradiance must be >= 0");
  if (d.rain < 0.0) throw DataError(where + ": rain must be >= 0");
  if (d.tmax < d.tmin) throw DataError(where + ": tmax < tmin");
}

}  // namespace

SyntheticClimateParams SyntheticClimateParams::normal_preset() { return SyntheticClimateParams{}; }

SyntheticClimateParams SyntheticClimateParams::cold_preset() {
  SyntheticClimateParams p;
  p.tmean_annual = 8.5;
  return p;
}

SyntheticClimateParams SyntheticClimateParams::spring_preset() {
  SyntheticClimateParams p;
  p.coldest_day_offset = 290.0;
  p.wet_day_prob = 0.55;
  p.mean_wet_rain_cm = 0.6;
  return p;
}

SyntheticClimateParams SyntheticClimateParams::spring_cold_preset() {
  SyntheticClimateParams p = spring_preset();
  p.tmean_annual = 8.5;
  return p;
}

SyntheticClimateParams SyntheticClimateParams::preset(const std::string& name) {
  if (name == "normal") return normal_preset();
  if (name == "cold") return cold_preset();
  if (name == "spring") return spring_preset();
  if (name == "spring-cold") return spring_cold_preset();
  throw ConfigError("unknown climate preset '" + name +
                    "' (expected normal, cold, spring or spring-cold)");
}

void validate_weather(const WeatherYear& year) {
  if (static_cast<int>(year.days.size()) < kMinCoverageDays)
    throw DataError("weather '" + year.label + "': insufficient coverage for 47-week episode (have " +
                    std::to_string(year.days.size()) + " days, need " + std::to_string(kMinCoverageDays) + ")");
  int expect = 0;
  for (const WeatherDay& d : year.days) {
    check_day(d, 0);
    if (d.day_index != expect)
      throw DataError("weather '" + year.label + "': day sequence gap at index " + std::to_string(expect));
    ++expect;
  }
}

WeatherYear load_weather_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weather csv: " + path.string());

  WeatherYear year;
  year.label = path.stem().string();
  year.source = WeatherSource::csv;

  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw DataError("weather csv is empty: " + path.string());
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw DataError("weather csv header mismatch in " + path.string() + ": expected '" +
                    std::string(kCsvHeader) + "', got '" + line + "'");

  int expect_day = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    if (fields.size() != 5)
      throw DataError("weather csv line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    WeatherDay d;
    d.day_index = static_cast<int>(parse_double(fields[0], line_no, "day"));
    d.irrad = parse_double(fields[1], line_no, "irrad_j_m2");
    d.tmin = parse_double(fields[2], line_no, "tmin_c");
    d.tmax = parse_double(fields[3], line_no, "tmax_c");
    d.rain = parse_double(fields[4], line_no, "rain_cm");
    check_day(d, line_no);
    if (d.day_index != expect_day)
      throw DataError("weather csv line " + std::to_string(line_no) + ": day sequence gap (expected " +
                      std::to_string(expect_day) + ", got " + std::to_string(d.day_index) + ")");
    ++expect_day;
    year.days.push_back(d);
  }
  if (static_cast<int>(year.days.size()) < kMinCoverageDays)
    throw DataError("weather csv " + path.string() + ": insufficient coverage for 47-week episode (have " +
                    std::to_string(year.days.size()) + " days, need " + std::to_string(kMinCoverageDays) + ")");
  return year;
}

void write_weather_csv(const WeatherYear& year, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write weather csv: " + path.string());
  out << kCsvHeader << '\n';
  char buf[160];
  for (const WeatherDay& d : year.days) {
    // %.17g round-trips doubles exactly.
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", d.day_index, d.irrad, d.tmin,
                  d.tmax, d.rain);
    out << buf;
  }
  if (!out) throw DataError("failed writing weather csv: " + path.string());
}

WeatherYear generate_synthetic_year(std::uint64_t seed, const SyntheticClimateParams& climate,
                                    const std::string& label) {
  if (climate.days < kMinCoverageDays)
    throw ConfigError("synthetic climate must cover at least " + std::to_string(kMinCoverageDays) + " days");
  if (climate.temp_noise_sd < 0.0 || climate.irrad_noise < 0.0 || climate.irrad_noise > 1.0 ||
      climate.wet_day_prob < 0.0 || climate.wet_day_prob > 1.0 || climate.mean_wet_rain_cm < 0.0 ||
      climate.diurnal_range < 0.0 || climate.irrad_mean < 0.0 ||
      climate.irrad_amplitude > climate.irrad_mean)
    throw ConfigError("synthetic climate parameters out of range");

  WeatherYear year;
  year.label = label.empty() ? "synthetic-" + std::to_string(seed) : label;
  year.source = WeatherSource::synthetic;
  year.seed = seed;
  year.days.reserve(static_cast<std::size_t>(climate.days));

  Rng rng = Rng::derive(seed, 0x57454154u);  // weather stream
  const double half_range = 0.5 * climate.diurnal_range;
  for (int d = 0; d < climate.days; ++d) {
    const double phase =
        std::cos(2.0 * std::numbers::pi * (static_cast<double>(d) - climate.coldest_day_offset) / 365.0);
    const double tmean = climate.tmean_annual - climate.seasonal_amplitude * phase;
    const double n1 = climate.temp_noise_sd > 0.0 ? rng.normal(0.0, climate.temp_noise_sd) : 0.0;
    const double n2 = climate.temp_noise_sd > 0.0 ? rng.normal(0.0, climate.temp_noise_sd) : 0.0;

    WeatherDay day;
    day.day_index = d;
    day.tmin = tmean - half_range + n1;
    day.tmax = std::max(tmean + half_range + n2, day.tmin);

    const double irrad_clear = std::max(5.0e5, climate.irrad_mean - climate.irrad_amplitude * phase);
    const double cloud = rng.uniform(1.0 - climate.irrad_noise, 1.0);
    day.irrad = irrad_clear * cloud;

    day.rain = rng.bernoulli(climate.wet_day_prob) ? rng.exponential(climate.mean_wet_rain_cm) : 0.0;
    year.days.push_back(day);
  }
  return year;
}

double cumulative_tmin(const WeatherYear& year) {
  const int n = std::min<int>(kMinCoverageDays, static_cast<int>(year.days.size()));
  double sum = 0.0;
  for (int d = 0; d < n; ++d) sum += year.days[static_cast<std::size_t>(d)].tmin;
  return sum;
}

}  // namespace croprl
