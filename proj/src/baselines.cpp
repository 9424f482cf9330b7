#include "croprl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "croprl/errors.hpp"

namespace croprl {

std::map<int, double> standard_practice_schedule(int weeks) {
  // day offsets of Jan 1 / Mar 1 / May 1 from an Oct 1 sowing, non-leap year
  static constexpr int kFertDays[3] = {92, 151, 212};
  std::map<int, double> sched;
  for (int day : kFertDays) {
    const int week = day / kDaysPerWeek;
    if (week < weeks) sched[week] = kStandardPracticeDose;
  }
  return sched;
}

std::map<int, double> random_spread_schedule(Rng& rng, int weeks, double total) {
  if (weeks < 1) throw ConfigError("random spread needs at least one week");
  if (!(total > 0.0)) throw ConfigError("random spread total must be positive");

  // uniform simplex via sorted cut points
  std::vector<double> cuts(static_cast<std::size_t>(weeks - 1));
  for (double& c : cuts) c = rng.uniform() * total;
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> shares(static_cast<std::size_t>(weeks));
  double prev = 0.0;
  for (int w = 0; w < weeks - 1; ++w) {
    shares[static_cast<std::size_t>(w)] = cuts[static_cast<std::size_t>(w)] - prev;
    prev = cuts[static_cast<std::size_t>(w)];
  }
  shares[static_cast<std::size_t>(weeks - 1)] = total - prev;

  // largest-remainder rounding to cents; the cent sum is exact by construction
  const long total_cents = std::lround(total * 100.0);
  std::vector<long> cents(static_cast<std::size_t>(weeks));
  std::vector<std::pair<double, int>> fracs(static_cast<std::size_t>(weeks));
  long assigned = 0;
  for (int w = 0; w < weeks; ++w) {
    const double target = shares[static_cast<std::size_t>(w)] * 100.0;
    cents[static_cast<std::size_t>(w)] = static_cast<long>(std::floor(target));
    assigned += cents[static_cast<std::size_t>(w)];
    fracs[static_cast<std::size_t>(w)] = {target - std::floor(target), w};
  }
  long deficit = total_cents - assigned;
  std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // stable tie-break for determinism
  });
  for (long k = 0; k < deficit; ++k) ++cents[static_cast<std::size_t>(fracs[static_cast<std::size_t>(k)].second)];

  std::map<int, double> sched;
  for (int w = 0; w < weeks; ++w)
    if (cents[static_cast<std::size_t>(w)] > 0)
      sched[w] = static_cast<double>(cents[static_cast<std::size_t>(w)]) / 100.0;
  return sched;
}

EpisodeRecord run_schedule_episode(CropEnv& env, const WeatherYear* year, std::uint64_t seed,
                                   const std::map<int, double>& week_doses) {
  env.reset(year, seed);
  const std::array<std::uint8_t, kNumMeasurable> no_mask{};
  while (!env.done()) {
    const auto it = week_doses.find(env.week());
    const double dose = it == week_doses.end() ? 0.0 : it->second;
    env.step_dose(dose, no_mask);
  }
  return env.episode();
}

}  // namespace croprl
