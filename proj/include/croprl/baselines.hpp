#pragma once

#include <cstdint>
#include <map>

#include "croprl/env.hpp"
#include "croprl/rng.hpp"

namespace croprl {

// Fixed-date schedule: 66.67 kg/ha in the weeks containing Jan 1, Mar 1 and
// May 1 of the fixed non-leap episode calendar (sowing on Oct 1 = day 0, so
// weeks 13, 21 and 30). Weather independent; never measures.
std::map<int, double> standard_practice_schedule(int weeks = kDefaultEpisodeWeeks);

constexpr double kStandardPracticeDose = 66.67;

// Random allocation of exactly `total` kg/ha across the weeks: uniform simplex
// draw rounded to 0.01 kg with largest-remainder correction, so the doses sum
// to the total exactly at cent resolution. Never measures.
std::map<int, double> random_spread_schedule(Rng& rng, int weeks = kDefaultEpisodeWeeks,
                                             double total = 200.0);

// Plays a dose schedule through the environment (dose-injection path, masks
// all zero) and returns the finished episode.
EpisodeRecord run_schedule_episode(CropEnv& env, const WeatherYear* year, std::uint64_t seed,
                                   const std::map<int, double>& week_doses);

}  // namespace croprl
