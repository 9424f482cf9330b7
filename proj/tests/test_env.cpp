#include <cmath>
#include <sstream>

#include "croprl/env.hpp"
#include "croprl/errors.hpp"
#include "croprl/rng.hpp"
#include "doctest.h"
#include "support/test_util.hpp"

using namespace croprl;
using croprl::test::default_params;

namespace {

NormalizationStats identity_stats() {
  NormalizationStats st;
  st.mean.fill(0.0);
  st.sd.fill(1.0);
  return st;
}

AgentAction act(int fert, std::array<std::uint8_t, kNumMeasurable> mask = {}) {
  AgentAction a;
  a.fert_index = fert;
  a.measure_mask = mask;
  return a;
}

}  // namespace

TEST_CASE("measurement costs follow the scenario cost vectors") {
  const auto realistic = make_scenario("realistic");
  const auto flat = make_scenario("flat-cost");
  const auto exp_cost = make_scenario("exp-cost");
  const auto none = make_scenario("no-cost");

  CHECK(realistic.cost_vector == std::array<double, 6>{25, 5, 20, 5, 20, 10});
  CHECK(none.cost_vector == std::array<double, 6>{0, 0, 0, 0, 0, 0});

  std::array<std::uint8_t, kNumMeasurable> zeros{};
  std::array<std::uint8_t, kNumMeasurable> ones;
  ones.fill(1);
  CHECK(measurement_cost(zeros, realistic) == 0.0);
  CHECK(measurement_cost(ones, realistic) == 85.0);
  CHECK(measurement_cost(ones, flat) == 60.0);
  CHECK(measurement_cost(ones, exp_cost) == 360.0);

  // lai and sm measured under realistic costs: 5 + 5
  std::array<std::uint8_t, kNumMeasurable> lai_sm{0, 1, 0, 1, 0, 0};
  CHECK(measurement_cost(lai_sm, realistic) == 10.0);
  // the reward formula of the worked example: 500 - 2*40 - 10 - (5+5) = 400
  CHECK(500.0 - 2.0 * 40.0 - 10.0 - measurement_cost(lai_sm, realistic) == 400.0);

  CHECK_THROWS_AS(make_scenario("bogus"), ConfigError);
}

TEST_CASE("scenario json round trip") {
  const auto sc = make_scenario("realistic");
  const auto tmp = std::filesystem::temp_directory_path() / "croprl_scenario_rt.json";
  scenario_to_json_file(sc, tmp);
  const auto sc2 = scenario_from_json_file(tmp);
  CHECK(sc2.name == sc.name);
  CHECK(sc2.cost_vector == sc.cost_vector);
  CHECK(sc2.n_levels == sc.n_levels);
  CHECK(sc2.observability == sc.observability);
  std::filesystem::remove(tmp);
}

TEST_CASE("reset is deterministic and honors the clip range") {
  const auto sc = make_scenario("no-cost");
  const CgmParams& p = default_params();

  const auto a = CropEnv::draw_initial_soil(sc, p, 99);
  const auto b = CropEnv::draw_initial_soil(sc, p, 99);
  CHECK(a.soil.sm == b.soil.sm);
  CHECK(a.soil.navail == b.soil.navail);

  // all-negative draws clip to the lower bound
  ScenarioConfig neg = sc;
  neg.init_soil_mean = -1000.0;
  neg.init_soil_sd = 1.0;
  const auto c = CropEnv::draw_initial_soil(neg, p, 5);
  CHECK(c.navail_raw < 0.0);
  CHECK(c.soil.navail == 0.0);
  CHECK(c.soil.sm == p.sm_wp);

  CropEnv env1(sc, p, identity_stats());
  CropEnv env2(sc, p, identity_stats());
  const auto o1 = env1.reset(&croprl::test::normal_year(1), 7);
  const auto o2 = env2.reset(&croprl::test::normal_year(1), 7);
  CHECK(o1.values == o2.values);
  CHECK(env1.state().soil.sm == env2.state().soil.sm);
}

TEST_CASE("initial soil generator matches its declared distribution") {
  const auto sc = make_scenario("no-cost");
  const CgmParams& p = default_params();
  double sum_m = 0.0, sum_n = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto d = CropEnv::draw_initial_soil(sc, p, 10'000 + static_cast<std::uint64_t>(i));
    sum_m += d.moisture_pct_raw;
    sum_n += d.navail_raw;
  }
  CHECK(std::abs(sum_m / n - 15.0) < 1.5);
  CHECK(std::abs(sum_n / n - 15.0) < 1.5);
}

TEST_CASE("week zero observation masks everything and keeps dvs") {
  const CgmParams& p = default_params();
  CropEnv env(make_scenario("realistic"), p, identity_stats());
  const auto obs = env.reset(&croprl::test::normal_year(1), 3);
  CHECK(obs.values[0] == doctest::Approx(-0.1));  // identity stats keep raw dvs
  for (int i = kFirstMeasurableSlot; i < kFirstMeasurableSlot + kNumMeasurable; ++i)
    CHECK(obs.values[static_cast<std::size_t>(i)] == 0.0);
  for (int i = kNumFeatureSlots; i < kObservationSize; ++i)
    CHECK(obs.values[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("step reward composition and deployment cost") {
  const CgmParams& p = default_params();
  CropEnv env(make_scenario("realistic"), p, identity_stats());
  env.reset(&croprl::test::normal_year(1), 3);

  // week 0, no dose, no measurements, crop not yet growing: reward is exactly 0
  const auto s0 = env.step(act(0));
  CHECK(s0.info.n_applied == 0.0);
  CHECK(s0.info.measurement_cost == 0.0);
  CHECK(s0.reward == 0.0);

  // dose of 40 with lai+sm measured: reward = dTWSO - 2*40 - 10 - 10
  const double twso_before = env.state().crop.twso;
  const auto s1 = env.step(act(4, {0, 1, 0, 1, 0, 0}));
  const double d_twso = env.state().crop.twso - twso_before;
  CHECK(s1.info.n_applied == 40.0);
  CHECK(s1.info.measurement_cost == 10.0);
  CHECK(s1.reward == doctest::Approx(d_twso - 80.0 - 10.0 - 10.0).epsilon(1e-12));
}

TEST_CASE("nitrogen cap truncates the dose and the billing") {
  const CgmParams& p = default_params();
  CropEnv env(make_scenario("no-cost"), p, identity_stats());
  env.reset(&croprl::test::normal_year(1), 3);

  for (int k = 0; k < 3; ++k) env.step(act(6));  // 3 x 60 = 180
  const double twso_before = env.state().crop.twso;
  const auto s = env.step(act(6));  // requests 60, only 20 remain
  CHECK(s.info.requested_dose == 60.0);
  CHECK(s.info.n_applied == 20.0);
  CHECK(s.info.cumulative_n == 200.0);
  const double d_twso = env.state().crop.twso - twso_before;
  CHECK(s.reward == doctest::Approx(d_twso - 2.0 * 20.0 - 10.0).epsilon(1e-12));

  // once capped, further requests apply nothing and pay no deployment cost
  const double twso2 = env.state().crop.twso;
  const auto s2 = env.step(act(6));
  CHECK(s2.info.n_applied == 0.0);
  CHECK(s2.info.cumulative_n == 200.0);
  CHECK(s2.reward == doctest::Approx(env.state().crop.twso - twso2).epsilon(1e-12));
}

TEST_CASE("episodes run exactly 47 weeks and refuse extra steps") {
  const CgmParams& p = default_params();
  CropEnv env(make_scenario("no-cost"), p, identity_stats());
  env.reset(&croprl::test::normal_year(1), 11);
  int steps = 0;
  while (!env.done()) {
    const auto s = env.step(act(1));
    ++steps;
    CHECK(s.done == (steps == kDefaultEpisodeWeeks));
  }
  CHECK(steps == 47);
  CHECK(env.episode().weeks.size() == 47);
  CHECK_THROWS_AS(env.step(act(0)), ConfigError);
  CHECK_THROWS_AS(env.step(act(99)), ConfigError);
}

TEST_CASE("observation invariants hold under fuzzing") {
  const CgmParams& p = default_params();
  CropEnv env(make_scenario("flat-cost"), p, identity_stats());
  Rng rng(1234);
  for (int ep = 0; ep < 10; ++ep) {
    env.reset(&croprl::test::normal_year(ep % 3 + 1), 100 + static_cast<std::uint64_t>(ep));
    while (!env.done()) {
      AgentAction a;
      a.fert_index = static_cast<int>(rng.uniform_int(7));
      for (auto& m : a.measure_mask) m = rng.bernoulli(0.4) ? 1 : 0;
      const auto s = env.step(a);
      for (std::size_t i = 0; i < kNumMeasurable; ++i) {
        const double mask_bit = s.obs.values[kNumFeatureSlots + i];
        CHECK((mask_bit == 0.0 || mask_bit == 1.0));
        CHECK(mask_bit == (a.measure_mask[i] ? 1.0 : 0.0));
        if (!a.measure_mask[i]) CHECK(s.obs.values[kFirstMeasurableSlot + i] == 0.0);
      }
    }
  }
}

TEST_CASE("measuring never alters the hidden state trajectory") {
  const CgmParams& p = default_params();
  Rng rng(777);
  for (int pair = 0; pair < 10; ++pair) {
    const std::uint64_t seed = 500 + static_cast<std::uint64_t>(pair);
    std::vector<int> ferts;
    for (int w = 0; w < 47; ++w) ferts.push_back(static_cast<int>(rng.uniform_int(7)));

    CropEnv env_a(make_scenario("no-cost"), p, identity_stats());
    CropEnv env_b(make_scenario("no-cost"), p, identity_stats());
    env_a.reset(&croprl::test::normal_year(2), seed);
    env_b.reset(&croprl::test::normal_year(2), seed);
    for (int w = 0; w < 47; ++w) {
      AgentAction a = act(ferts[static_cast<std::size_t>(w)]);
      AgentAction b = a;
      for (auto& m : a.measure_mask) m = rng.bernoulli(0.5) ? 1 : 0;
      for (auto& m : b.measure_mask) m = rng.bernoulli(0.5) ? 1 : 0;
      env_a.step(a);
      env_b.step(b);
      const SimState& sa = env_a.state();
      const SimState& sb = env_b.state();
      CHECK(sa.crop.tagp == sb.crop.tagp);
      CHECK(sa.crop.twso == sb.crop.twso);
      CHECK(sa.crop.lai == sb.crop.lai);
      CHECK(sa.soil.sm == sb.soil.sm);
      CHECK(sa.soil.navail == sb.soil.navail);
    }
    CHECK(env_a.episode().final_twso() == env_b.episode().final_twso());
  }
}

TEST_CASE("reward ledger closes over full episodes") {
  const CgmParams& p = default_params();
  Rng rng(31337);
  for (const char* name : {"no-cost", "flat-cost", "realistic", "exp-cost"}) {
    CropEnv env(make_scenario(name), p, identity_stats());
    env.reset(&croprl::test::normal_year(1), rng.next_u64());
    double cost_sum = 0.0;
    int fert_weeks = 0;
    double n_sum = 0.0;
    while (!env.done()) {
      AgentAction a;
      a.fert_index = static_cast<int>(rng.uniform_int(7));
      for (auto& m : a.measure_mask) m = rng.bernoulli(0.3) ? 1 : 0;
      const auto s = env.step(a);
      cost_sum += s.info.measurement_cost;
      n_sum += s.info.n_applied;
      if (s.info.n_applied > 0.0) ++fert_weeks;
    }
    const auto& rec = env.episode();
    const double lhs = rec.total_reward();
    const double rhs = rec.final_twso() - 2.0 * n_sum - 10.0 * fert_weeks - cost_sum;
    CHECK(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)) < 1e-9);
    CHECK(rec.total_n_applied() <= 200.0);
  }
}

TEST_CASE("all-observed and none-observed fix the masks and the action space") {
  const CgmParams& p = default_params();

  CropEnv all_env(make_scenario("all-observed"), p, identity_stats());
  CHECK(all_env.measure_flags() == 0);
  all_env.reset(&croprl::test::normal_year(1), 5);
  auto s = all_env.step(act(3));
  for (std::size_t i = 0; i < kNumMeasurable; ++i) {
    CHECK(s.obs.values[kNumFeatureSlots + i] == 1.0);
  }
  CHECK(s.info.measurement_cost == 0.0);

  CropEnv none_env(make_scenario("none-observed"), p, identity_stats());
  CHECK(none_env.measure_flags() == 0);
  none_env.reset(&croprl::test::normal_year(1), 5);
  while (!none_env.done()) {
    AgentAction a = act(2);
    a.measure_mask.fill(1);  // ignored by the scenario
    const auto st = none_env.step(a);
    for (std::size_t i = 0; i < kNumMeasurable; ++i) {
      CHECK(st.obs.values[kFirstMeasurableSlot + i] == 0.0);
      CHECK(st.obs.values[kNumFeatureSlots + i] == 0.0);
    }
  }
}

TEST_CASE("calibration is deterministic and self-consistent") {
  const CgmParams& p = default_params();
  const auto sc = make_scenario("realistic");
  std::vector<const WeatherYear*> years{&croprl::test::normal_year(1), &croprl::test::normal_year(2),
                                        &croprl::test::cold_year(1)};

  const auto s1 = calibrate_normalization(sc, p, years, 10, 99);
  const auto s2 = calibrate_normalization(sc, p, years, 10, 99);
  CHECK(s1.mean == s2.mean);
  CHECK(s1.sd == s2.sd);

  // standardizing the calibration corpus with its own stats recovers mean 0, sd 1
  std::vector<std::array<double, kNumFeatureSlots>> raw;
  const auto stats = calibrate_normalization(sc, p, years, 50, 7, &raw);
  REQUIRE(raw.size() == 50u * 47u);
  for (std::size_t i = 0; i < kNumFeatureSlots; ++i) {
    double mean = 0.0;
    for (const auto& r : raw) mean += (r[i] - stats.mean[i]) / stats.sd[i];
    mean /= static_cast<double>(raw.size());
    double var = 0.0;
    for (const auto& r : raw) {
      const double z = (r[i] - stats.mean[i]) / stats.sd[i];
      var += (z - mean) * (z - mean);
    }
    var /= static_cast<double>(raw.size());
    CHECK(std::abs(mean) < 0.1);
    CHECK(std::sqrt(var) > 0.9);
    CHECK(std::sqrt(var) < 1.1);
  }

  // save/load round trip
  const auto tmp = std::filesystem::temp_directory_path() / "croprl_stats_rt.json";
  stats.save(tmp);
  const auto loaded = NormalizationStats::load(tmp);
  CHECK(loaded.mean == stats.mean);
  CHECK(loaded.sd == stats.sd);
  std::filesystem::remove(tmp);
}

TEST_CASE("degenerate calibration floors the standard deviation") {
  // a single-episode calibration still yields usable, floored stats
  const CgmParams& p = default_params();
  ScenarioConfig sc = make_scenario("no-cost");
  std::vector<const WeatherYear*> years{&croprl::test::normal_year(1)};
  const auto stats = calibrate_normalization(sc, p, years, 1, 0);
  for (double sd : stats.sd) CHECK(sd >= NormalizationStats::kSdFloor);
}

TEST_CASE("episode csv export carries the declared schema") {
  const CgmParams& p = default_params();
  CropEnv env(make_scenario("realistic"), p, identity_stats());
  env.reset(&croprl::test::normal_year(1), 17);
  Rng rng(5);
  while (!env.done()) {
    AgentAction a;
    a.fert_index = static_cast<int>(rng.uniform_int(7));
    for (auto& m : a.measure_mask) m = rng.bernoulli(0.5) ? 1 : 0;
    env.step(a);
  }
  std::ostringstream out;
  write_episode_csv(env.episode(), out);
  const std::string text = out.str();
  CHECK(text.substr(0, text.find('\n')) ==
        "week,dvs,twso,tagp,lai,sm,navail,nuptake,n_applied,cum_n,mask_bits,measure_cost,reward");
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 48);  // header + 47 weeks
}

TEST_CASE("weekly observation pooling matches the daily trace") {
  // assemble_observation: weather slots are means, crop slots last values
  std::vector<SimState> states(7);
  std::vector<WeatherDay> weather(7);
  for (int d = 0; d < 7; ++d) {
    states[static_cast<std::size_t>(d)].crop.dvs = 0.1 * d;
    states[static_cast<std::size_t>(d)].crop.tagp = 100.0 * d;
    states[static_cast<std::size_t>(d)].soil.sm = 0.2;
    weather[static_cast<std::size_t>(d)] = WeatherDay{d, 1e6 * d, static_cast<double>(d), d + 5.0, 0.1 * d};
  }
  std::array<std::uint8_t, kNumMeasurable> ones;
  ones.fill(1);
  const auto obs = assemble_observation(states, weather, ones, nullptr, 42.0);
  CHECK(obs.values[0] == doctest::Approx(0.6));
  CHECK(obs.values[1] == doctest::Approx(600.0));
  CHECK(obs.values[6] == 42.0);
  CHECK(obs.values[7] == doctest::Approx(3e6));
  CHECK(obs.values[8] == doctest::Approx(3.0));
  CHECK(obs.values[9] == doctest::Approx(0.3));
  CHECK_THROWS_AS(assemble_observation({}, {}, ones, nullptr, 0.0), ConfigError);
}
