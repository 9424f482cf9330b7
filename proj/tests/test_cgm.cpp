#include <cmath>
#include <filesystem>
#include <map>

#include "croprl/cgm.hpp"
#include "croprl/errors.hpp"
#include "croprl/rng.hpp"
#include "doctest.h"
#include "support/test_util.hpp"

using namespace croprl;
using croprl::test::default_params;

namespace {

SoilState mid_soil(const CgmParams& p, double navail = 15.0) {
  return SoilState{0.5 * (p.sm_wp + p.sm_fc), navail};
}

// random season driver shared by the balance/invariant suites
struct SeasonSample {
  WeatherYear year;
  std::map<int, double> schedule;
  SoilState init;
};

SeasonSample random_season(std::uint64_t seed, const CgmParams& p) {
  Rng rng = Rng::derive(seed, 0x7E57);
  SeasonSample s;
  s.year = generate_synthetic_year(seed, rng.bernoulli(0.3) ? SyntheticClimateParams::cold_preset()
                                                            : SyntheticClimateParams::normal_preset());
  const int n_apps = static_cast<int>(rng.uniform_int(6));
  for (int k = 0; k < n_apps; ++k)
    s.schedule[static_cast<int>(rng.uniform_int(kMinCoverageDays))] = rng.uniform(0.0, 60.0);
  s.init.sm = rng.uniform(p.sm_wp, p.sm_fc);
  s.init.navail = rng.uniform(0.0, 100.0);
  return s;
}

}  // namespace

TEST_CASE("piecewise linear interpolation clamps and interpolates") {
  PiecewiseLinear t({{0.0, 1.0}, {1.0, 3.0}, {2.0, 0.0}});
  CHECK(t(-5.0) == 1.0);
  CHECK(t(0.0) == 1.0);
  CHECK(t(0.5) == doctest::Approx(2.0));
  CHECK(t(1.5) == doctest::Approx(1.5));
  CHECK(t(9.0) == 0.0);
  CHECK_THROWS_AS(PiecewiseLinear({{1.0, 0.0}, {1.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(PiecewiseLinear(std::vector<std::pair<double, double>>{}), ConfigError);
}

TEST_CASE("default parameter file loads and validates") {
  const CgmParams& p = default_params();
  REQUIRE_NOTHROW(validate_cgm_params(p));
  CHECK(p.drain_day_n_loss > 0.0);  // drainage losses are part of the default model

  // save/load round trip
  const auto tmp = std::filesystem::temp_directory_path() / "croprl_params_rt.json";
  save_cgm_params(p, tmp);
  const CgmParams q = load_cgm_params(tmp);
  CHECK(q.lue == p.lue);
  CHECK(q.tsum1 == p.tsum1);
  CHECK(q.n_conc_target(0.5) == p.n_conc_target(0.5));
  std::filesystem::remove(tmp);
}

TEST_CASE("zero forcing day leaves development and biomass unchanged") {
  const CgmParams& p = default_params();
  SimState s0 = initial_sim_state(mid_soil(p));
  WeatherDay d{0, 0.0, p.t_base, p.t_base, 0.0};
  DayFluxes fl;
  const SimState s1 = advance_day(s0, d, 0.0, p, &fl);
  CHECK(s1.crop.dvs == s0.crop.dvs);
  CHECK(s1.crop.tagp == s0.crop.tagp);
  CHECK(s1.crop.twso == 0.0);
  // bare soil, zero irradiance: moisture falls only by the floor evaporation
  CHECK(fl.transp_m == 0.0);
  CHECK(fl.drain_m == 0.0);
  CHECK(fl.evap_m == doctest::Approx(p.evap_coeff * p.evap_floor_mm * 1e-3).epsilon(1e-12));
  CHECK(s0.soil.sm - s1.soil.sm == doctest::Approx(fl.evap_m / p.bucket_depth).epsilon(1e-12));
}

TEST_CASE("nitrogen starvation floors uptake and slows growth") {
  CgmParams p = default_params();
  p.n_mineralization_rate = 0.0;
  SimState s = initial_sim_state(mid_soil(p, 0.0));
  s.crop.dvs = 0.5;
  s.crop.emerged = true;
  s.crop.lai = 2.0;
  s.crop.tagp = 3000.0;
  s.crop.n_uptake_total = 20.0;  // well below the target concentration
  s.thermal_time = p.tsum_emergence + 0.5 * p.tsum1;

  WeatherDay d{100, 1.2e7, 8.0, 16.0, 0.0};
  DayFluxes fl;
  const SimState starved = advance_day(s, d, 0.0, p, &fl);
  CHECK(fl.n_uptake == 0.0);
  const double growth_starved = starved.crop.tagp - s.crop.tagp;

  SimState rich = s;
  rich.soil.navail = 500.0;
  const SimState fed = advance_day(rich, d, 0.0, p);
  const double growth_fed = fed.crop.tagp - rich.crop.tagp;
  CHECK(growth_starved < growth_fed);
  CHECK(growth_starved >= 0.0);

  // demand exists, supply is zero, so the stress ratio stays below one
  const double conc = p.n_conc_target(starved.crop.dvs);
  CHECK(starved.crop.n_uptake_total / (conc * starved.crop.tagp) < 1.0);
}

TEST_CASE("full season with recommended dose lands in the plausibility band") {
  const CgmParams& p = default_params();
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto year = generate_synthetic_year(seed, SyntheticClimateParams::normal_preset());
    // the recommended dressing window: doses land inside the demand flush
    std::map<int, double> sched{{150, 50.0}, {170, 50.0}, {190, 50.0}, {210, 50.0}};
    const auto traj = run_season(year, sched, p, mid_soil(p));
    const double twso = traj.back().crop.twso;
    const double tagp = traj.back().crop.tagp;
    CHECK(twso >= 4000.0);
    CHECK(twso <= 12000.0);
    CHECK(twso / tagp >= 0.3);
    CHECK(twso / tagp <= 0.6);
  }
}

TEST_CASE("yield responds monotonically to nitrogen") {
  const CgmParams& p = default_params();
  const auto& year = croprl::test::normal_year(2);
  std::map<int, double> none;
  std::map<int, double> full{{150, 50.0}, {170, 50.0}, {190, 50.0}, {210, 50.0}};
  const auto t0 = run_season(year, none, p, mid_soil(p));
  const auto t1 = run_season(year, full, p, mid_soil(p));
  CHECK(t0.back().crop.twso <= t1.back().crop.twso);
}

TEST_CASE("empty schedule equals a schedule of zero applications") {
  const CgmParams& p = default_params();
  const auto& year = croprl::test::normal_year(3);
  std::map<int, double> zeros;
  for (int d = 0; d < kMinCoverageDays; d += 11) zeros[d] = 0.0;
  const auto a = run_season(year, {}, p, mid_soil(p));
  const auto b = run_season(year, zeros, p, mid_soil(p));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].crop.tagp == b[i].crop.tagp);
    CHECK(a[i].soil.navail == b[i].soil.navail);
    CHECK(a[i].soil.sm == b[i].soil.sm);
  }
}

TEST_CASE("cold year delays flowering under identical management") {
  const CgmParams& p = default_params();
  std::map<int, double> sched{{150, 50.0}, {170, 50.0}, {190, 50.0}, {210, 50.0}};
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto normal = run_season(croprl::test::normal_year(seed), sched, p, mid_soil(p));
    const auto cold = run_season(croprl::test::cold_year(seed), sched, p, mid_soil(p));
    auto first_flowering = [](const std::vector<SimState>& traj) {
      for (const auto& s : traj)
        if (s.crop.dvs >= 1.0) return s.day;
      return -1;
    };
    const int fn = first_flowering(normal);
    const int fc = first_flowering(cold);
    REQUIRE(fn > 0);
    if (fc < 0) {
      CHECK(true);  // cold year never flowered, an even stronger delay
    } else {
      CHECK(fc > fn);
    }
  }
}

TEST_CASE("dvs is monotone and bounded over random seasons") {
  const CgmParams& p = default_params();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = random_season(seed, p);
    const auto traj = run_season(s.year, s.schedule, p, s.init);
    for (std::size_t i = 1; i < traj.size(); ++i) {
      CHECK(traj[i].crop.dvs >= traj[i - 1].crop.dvs);
      CHECK(traj[i].crop.dvs >= -0.1);
      CHECK(traj[i].crop.dvs <= 2.0);
      CHECK(traj[i].crop.twso >= traj[i - 1].crop.twso);
      CHECK(traj[i].crop.twso <= traj[i].crop.tagp);
      CHECK(traj[i].crop.n_uptake_total >= traj[i - 1].crop.n_uptake_total);
      CHECK(traj[i].crop.lai >= 0.0);
      CHECK(traj[i].soil.sm >= 0.0);
      CHECK(traj[i].soil.sm <= p.sm_saturation);
      CHECK(traj[i].soil.navail >= 0.0);
    }
  }
}

TEST_CASE("water and nitrogen balances close to 1e-9 relative") {
  CgmParams p = default_params();
  SUBCASE("default parameters with drainage losses") {}
  SUBCASE("closed nitrogen system") { p.drain_day_n_loss = 0.0; }
  SUBCASE("with drainage nitrogen losses") { p.drain_day_n_loss = 1.5; p.drain_day_n_frac = 0.02; }

  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto s = random_season(seed, p);
    SimState state = initial_sim_state(s.init);
    double rain = 0, evap = 0, transp = 0, drain = 0;
    double fert_in = 0, mineral = 0, leached = 0;
    for (int d = 0; d < kMinCoverageDays; ++d) {
      const auto it = s.schedule.find(d);
      DayFluxes fl;
      state = advance_day(state, s.year.days[static_cast<std::size_t>(d)],
                          it == s.schedule.end() ? 0.0 : it->second, p, &fl);
      rain += fl.rain_m;
      evap += fl.evap_m;
      transp += fl.transp_m;
      drain += fl.drain_m;
      fert_in += fl.n_fert_in;
      mineral += fl.n_mineralized;
      leached += fl.n_leached;
    }
    const double water_lhs = (state.soil.sm - s.init.sm) * p.bucket_depth;
    const double water_rhs = rain - evap - transp - drain;
    const double water_scale = std::max(1e-6, std::abs(rain) + std::abs(evap) + std::abs(transp));
    CHECK(std::abs(water_lhs - water_rhs) / water_scale < 1e-9);

    const double n_lhs = state.soil.navail + state.crop.n_uptake_total;
    const double n_rhs = s.init.navail + fert_in + mineral - leached;
    const double n_scale = std::max(1.0, std::abs(n_rhs));
    CHECK(std::abs(n_lhs - n_rhs) / n_scale < 1e-9);
  }
}

TEST_CASE("growth is monotone in the stress factors") {
  const CgmParams& p = default_params();
  SimState base = initial_sim_state(SoilState{p.sm_crit, 50.0});
  base.crop.dvs = 0.6;
  base.crop.emerged = true;
  base.crop.lai = 2.5;
  base.crop.tagp = 4000.0;
  base.crop.n_uptake_total = p.n_conc_target(0.6) * 4000.0;  // fully fed
  base.thermal_time = p.tsum_emergence + 0.6 * p.tsum1;
  WeatherDay d{120, 1.4e7, 9.0, 17.0, 0.0};

  // drier soil means more water stress and less growth
  SimState wet = base;
  wet.soil.sm = p.sm_crit;
  SimState dry = base;
  dry.soil.sm = p.sm_wp + 0.25 * (p.sm_crit - p.sm_wp);
  const double g_wet = advance_day(wet, d, 0.0, p).crop.tagp - wet.crop.tagp;
  const double g_dry = advance_day(dry, d, 0.0, p).crop.tagp - dry.crop.tagp;
  CHECK(g_dry < g_wet);

  // less accumulated nitrogen means more nitrogen stress and less growth
  SimState fed = base;
  SimState lean = base;
  lean.crop.n_uptake_total *= 0.4;
  lean.soil.navail = 0.0;
  CgmParams p_no_min = p;
  p_no_min.n_mineralization_rate = 0.0;
  const double g_fed = advance_day(fed, d, 0.0, p_no_min).crop.tagp - fed.crop.tagp;
  const double g_lean = advance_day(lean, d, 0.0, p_no_min).crop.tagp - lean.crop.tagp;
  CHECK(g_lean < g_fed);
}

TEST_CASE("advance_day rejects non-finite state instead of clamping") {
  const CgmParams& p = default_params();
  SimState s = initial_sim_state(mid_soil(p));
  s.soil.sm = std::numeric_limits<double>::quiet_NaN();
  WeatherDay d{0, 1e6, 2.0, 9.0, 0.1};
  CHECK_THROWS_AS(advance_day(s, d, 0.0, p), NumericError);
  SimState s2 = initial_sim_state(mid_soil(p));
  CHECK_THROWS_AS(advance_day(s2, d, -1.0, p), ConfigError);
}

TEST_CASE("run_season validates the schedule window") {
  const CgmParams& p = default_params();
  const auto& year = croprl::test::normal_year(1);
  CHECK_THROWS_AS(run_season(year, {{400, 10.0}}, p, mid_soil(p)), ConfigError);
  CHECK_THROWS_AS(run_season(year, {{10, -5.0}}, p, mid_soil(p)), ConfigError);
  const auto traj = run_season(year, {}, p, mid_soil(p));
  CHECK(traj.size() == kMinCoverageDays + 1);
}
