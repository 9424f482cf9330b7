#include <cstdio>
#include <filesystem>
#include <fstream>

#include "croprl/errors.hpp"
#include "croprl/weather.hpp"
#include "doctest.h"
#include "support/test_util.hpp"

using namespace croprl;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("synthetic generator is deterministic per seed") {
  const auto a = generate_synthetic_year(42, SyntheticClimateParams::normal_preset());
  const auto b = generate_synthetic_year(42, SyntheticClimateParams::normal_preset());
  REQUIRE(a.days.size() == b.days.size());
  for (std::size_t i = 0; i < a.days.size(); ++i) {
    CHECK(a.days[i].irrad == b.days[i].irrad);
    CHECK(a.days[i].tmin == b.days[i].tmin);
    CHECK(a.days[i].tmax == b.days[i].tmax);
    CHECK(a.days[i].rain == b.days[i].rain);
  }
}

TEST_CASE("different seeds differ somewhere") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = generate_synthetic_year(s, SyntheticClimateParams::normal_preset());
    const auto b = generate_synthetic_year(s + 1000, SyntheticClimateParams::normal_preset());
    bool differ = false;
    for (std::size_t i = 0; i < a.days.size() && !differ; ++i)
      differ = a.days[i].tmin != b.days[i].tmin || a.days[i].rain != b.days[i].rain;
    CHECK(differ);
  }
}

TEST_CASE("zero noise amplitude gives a pure sinusoid with constant diurnal range") {
  SyntheticClimateParams climate = SyntheticClimateParams::normal_preset();
  climate.temp_noise_sd = 0.0;
  const auto year = generate_synthetic_year(7, climate);
  for (const auto& d : year.days)
    CHECK(d.tmax - d.tmin == doctest::Approx(climate.diurnal_range).epsilon(1e-12));
}

TEST_CASE("generated days satisfy invariants for many seeds") {
  for (std::uint64_t s = 0; s < 25; ++s) {
    const auto year = generate_synthetic_year(s, s % 2 ? SyntheticClimateParams::cold_preset()
                                                       : SyntheticClimateParams::normal_preset());
    REQUIRE_NOTHROW(validate_weather(year));
    for (const auto& d : year.days) {
      CHECK(d.irrad >= 0.0);
      CHECK(d.rain >= 0.0);
      CHECK(d.tmax >= d.tmin);
    }
  }
}

TEST_CASE("cold preset lowers the cumulative minimum temperature") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double normal = cumulative_tmin(generate_synthetic_year(s, SyntheticClimateParams::normal_preset()));
    const double cold = cumulative_tmin(generate_synthetic_year(s, SyntheticClimateParams::cold_preset()));
    CHECK(cold < normal);
    // documented preset bands
    CHECK(normal > kNormalPresetTminSumLo);
    CHECK(normal < kNormalPresetTminSumHi);
    CHECK(cold > kColdPresetTminSumLo);
    CHECK(cold < kColdPresetTminSumHi);
  }
}

TEST_CASE("cumulative_tmin sums the episode window") {
  WeatherYear year;
  year.label = "flat";
  SUBCASE("all zero") {
    for (int d = 0; d < 340; ++d) year.days.push_back({d, 1e6, 0.0, 0.0, 0.0});
    CHECK(cumulative_tmin(year) == 0.0);
  }
  SUBCASE("constant five") {
    for (int d = 0; d < 340; ++d) year.days.push_back({d, 1e6, 5.0, 5.0, 0.0});
    // 329 days in the window
    CHECK(cumulative_tmin(year) == doctest::Approx(1645.0).epsilon(1e-12));
  }
  SUBCASE("direct summation oracle on a synthetic year") {
    const auto y = generate_synthetic_year(3, SyntheticClimateParams::normal_preset());
    double expect = 0.0;
    for (int d = 0; d < kMinCoverageDays; ++d) expect += y.days[static_cast<std::size_t>(d)].tmin;
    CHECK(cumulative_tmin(y) == expect);
  }
}

TEST_CASE("csv round trip reproduces every field") {
  const auto year = generate_synthetic_year(11, SyntheticClimateParams::normal_preset());
  const auto path = temp_file("croprl_weather_roundtrip.csv");
  write_weather_csv(year, path);
  const auto loaded = load_weather_csv(path);
  REQUIRE(loaded.days.size() == year.days.size());
  for (std::size_t i = 0; i < year.days.size(); ++i) {
    CHECK(loaded.days[i].day_index == year.days[i].day_index);
    CHECK(loaded.days[i].irrad == year.days[i].irrad);
    CHECK(loaded.days[i].tmin == year.days[i].tmin);
    CHECK(loaded.days[i].tmax == year.days[i].tmax);
    CHECK(loaded.days[i].rain == year.days[i].rain);
  }
  // write(load(f)) reproduces f byte for byte as well
  const auto path2 = temp_file("croprl_weather_roundtrip2.csv");
  write_weather_csv(loaded, path2);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("csv loader reports malformed input") {
  const auto path = temp_file("croprl_weather_bad.csv");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_weather_csv(temp_file("croprl_no_such_file.csv")), DataError);
  }
  SUBCASE("bad header") {
    std::ofstream(path) << "day,irrad,tmin,tmax,rain\n";
    CHECK_THROWS_AS(load_weather_csv(path), DataError);
  }
  SUBCASE("tmax below tmin names the row") {
    std::ofstream out(path);
    out << "day,irrad_j_m2,tmin_c,tmax_c,rain_cm\n";
    for (int d = 0; d < 335; ++d) {
      if (d == 17)
        out << d << ",1e6,10.0,3.0,0.1\n";  // violation on csv line 19
      else
        out << d << ",1e6,2.0,9.0,0.1\n";
    }
    out.close();
    try {
      load_weather_csv(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 19") != std::string::npos);
      CHECK(std::string(e.what()).find("tmax < tmin") != std::string::npos);
    }
  }
  SUBCASE("200 rows is insufficient coverage") {
    std::ofstream out(path);
    out << "day,irrad_j_m2,tmin_c,tmax_c,rain_cm\n";
    for (int d = 0; d < 200; ++d) out << d << ",1e6,2.0,9.0,0.1\n";
    out.close();
    try {
      load_weather_csv(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("insufficient coverage for 47-week episode") !=
            std::string::npos);
    }
  }
  SUBCASE("gap in day sequence") {
    std::ofstream out(path);
    out << "day,irrad_j_m2,tmin_c,tmax_c,rain_cm\n";
    for (int d = 0; d < 335; ++d) out << (d == 100 ? d + 1 : d) << ",1e6,2.0,9.0,0.1\n";
    out.close();
    CHECK_THROWS_AS(load_weather_csv(path), DataError);
  }
  SUBCASE("negative rain") {
    std::ofstream out(path);
    out << "day,irrad_j_m2,tmin_c,tmax_c,rain_cm\n";
    for (int d = 0; d < 335; ++d) out << d << ",1e6,2.0,9.0," << (d == 5 ? "-0.1" : "0.1") << "\n";
    out.close();
    CHECK_THROWS_AS(load_weather_csv(path), DataError);
  }
  SUBCASE("malformed field reports the line") {
    std::ofstream out(path);
    out << "day,irrad_j_m2,tmin_c,tmax_c,rain_cm\n";
    out << "0,1e6,abc,9.0,0.1\n";
    out.close();
    try {
      load_weather_csv(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("well formed 365 row file loads every day") {
  const auto path = temp_file("croprl_weather_365.csv");
  std::ofstream out(path);
  out << "day,irrad_j_m2,tmin_c,tmax_c,rain_cm\n";
  for (int d = 0; d < 365; ++d) out << d << ",8.5e6,4.25,11.5,0.2\n";
  out.close();
  const auto year = load_weather_csv(path);
  CHECK(year.days.size() == 365);
  CHECK(year.source == WeatherSource::csv);
  std::filesystem::remove(path);
}
