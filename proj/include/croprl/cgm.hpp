#pragma once

#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "croprl/weather.hpp"

namespace croprl {

// Breakpoint table with linear interpolation, clamped at both ends.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> points);

  double operator()(double x) const;
  const std::vector<std::pair<double, double>>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

 private:
  std::vector<std::pair<double, double>> points_;  // strictly increasing x
};

// Crop compartment of the daily state. dvs runs from -0.1 (sowing) through 0
// (emergence) and 1 (flowering) to 2 (maturity) and is non-decreasing; twso
// (grain) is a sub-pool of tagp (all above-ground biomass), so twso <= tagp.
struct CropState {
  double dvs = -0.1;
  double lai = 0.0;
  double tagp = 0.0;           // kg/ha
  double twso = 0.0;           // kg/ha
  double n_uptake_total = 0.0; // kg/ha, cumulative
  bool emerged = false;
  bool mature = false;
};

struct SoilState {
  double sm = 0.0;      // volumetric fraction of the root-zone bucket
  double navail = 0.0;  // plant-available nitrogen, kg/ha
};

struct SimState {
  CropState crop;
  SoilState soil;
  int day = 0;
  double thermal_time = 0.0;  // degC*day above t_base since sowing
};

// Full parameter set of the surrogate model. All values ship in a versioned
// JSON file (see data/params); nothing here is hard-coded in the update rule.
struct CgmParams {
  // development
  double t_base = 0.0;
  double tsum_emergence = 120.0;  // sowing -> emergence, degC*day
  double tsum1 = 1690.0;          // emergence -> flowering
  double tsum2 = 1100.0;          // flowering -> maturity
  // light and growth
  double k_ext = 0.6;
  double lue = 28.0;          // kg/ha biomass per MJ/m^2 intercepted PAR
  double par_fraction = 0.5;  // PAR share of global irradiance
  double sla = 0.002;         // LAI per kg/ha of leaf biomass
  PiecewiseLinear leaf_partition;   // dvs -> leaf share of daily growth
  PiecewiseLinear grain_partition;  // dvs -> grain share of daily growth (dvs >= 1)
  double lai_senescence_rate = 0.025;  // per day once past senescence_dvs
  double senescence_dvs = 1.35;
  // emergence seed pools; the exponential light/N feedbacks need a nonzero start
  double lai_init = 0.06;
  double tagp_init = 30.0;  // kg/ha
  // soil water bucket
  double sm_wp = 0.12;          // wilting point
  double sm_crit = 0.22;        // below this transpiration/growth is water-limited
  double sm_fc = 0.36;          // field capacity; excess drains same day
  double sm_saturation = 0.45;
  double sm_residual = 0.05;    // evaporation cannot dry below this
  double bucket_depth = 0.6;    // m
  double evap_coeff = 0.5;      // soil evaporation scale on radiation-driven demand
  double transp_coeff = 0.62;   // canopy transpiration scale on radiation-driven demand
  double evap_floor_mm = 0.15;  // minimum evaporative demand, mm/day
  // nitrogen
  double n_mineralization_rate = 0.22;  // kg/ha/day
  double fert_recovery = 0.7;           // fraction of applied N that reaches navail
  PiecewiseLinear n_conc_target;        // dvs -> target N concentration of tagp
  double n_stress_exponent = 1.6;
  // Nitrogen washed from navail on any day with drainage, capped by the pool:
  // loss = min(navail, drain_day_n_loss + drain_day_n_frac * navail).
  // The proportional part drains large surpluses, the floor keeps eating
  // trickles and residues while water keeps moving.
  double drain_day_n_loss = 0.0;  // kg/ha per drainage day
  double drain_day_n_frac = 0.0;  // fraction of the pool per drainage day
};

// Per-day flux accounting, filled on request by advance_day. Water in metres
// over the bucket area, nitrogen in kg/ha. These close the balances exactly:
//   d(sm*depth) = rain - evap - transp - drain
//   d(navail + n_uptake_total) = n_fert_in + n_mineralized - n_leached
struct DayFluxes {
  double rain_m = 0.0;
  double evap_m = 0.0;
  double transp_m = 0.0;
  double drain_m = 0.0;
  double n_fert_in = 0.0;
  double n_mineralized = 0.0;
  double n_uptake = 0.0;
  double n_leached = 0.0;
};

constexpr double kCgmEps = 1e-12;

CgmParams load_cgm_params(const std::filesystem::path& path);
void save_cgm_params(const CgmParams& params, const std::filesystem::path& path);
void validate_cgm_params(const CgmParams& params);

// Path of the default parameter file shipped with the repository.
std::filesystem::path default_cgm_params_path();

// One day of the surrogate model, fixed update order:
// development -> soil water -> water stress -> nitrogen -> growth ->
// partitioning -> senescence. Throws NumericError if any intermediate value
// turns non-finite.
SimState advance_day(const SimState& state, const WeatherDay& weather, double n_applied_today,
                     const CgmParams& params, DayFluxes* fluxes = nullptr);

// Daily fold over the 329-day episode window. n_schedule maps day index to a
// dose in kg/ha. Returns the trajectory including the initial state
// (330 entries).
std::vector<SimState> run_season(const WeatherYear& weather, const std::map<int, double>& n_schedule,
                                 const CgmParams& params, const SoilState& init);

SimState initial_sim_state(const SoilState& init);

}  // namespace croprl
