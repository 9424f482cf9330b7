#pragma once

#include <vector>

#include "croprl/cgm.hpp"
#include "croprl/env.hpp"
#include "croprl/weather.hpp"

namespace croprl::test {

inline const CgmParams& default_params() {
  static const CgmParams params = load_cgm_params(default_cgm_params_path());
  return params;
}

inline const WeatherYear& normal_year(std::uint64_t seed = 1) {
  static std::vector<WeatherYear> cache;
  for (const auto& y : cache)
    if (y.seed == seed) return y;
  cache.push_back(generate_synthetic_year(seed, SyntheticClimateParams::normal_preset(),
                                          "normal-" + std::to_string(seed)));
  return cache.back();
}

inline const WeatherYear& cold_year(std::uint64_t seed = 1) {
  static std::vector<WeatherYear> cache;
  for (const auto& y : cache)
    if (y.seed == seed) return y;
  cache.push_back(generate_synthetic_year(seed, SyntheticClimateParams::cold_preset(),
                                          "cold-" + std::to_string(seed)));
  return cache.back();
}

}  // namespace croprl::test
