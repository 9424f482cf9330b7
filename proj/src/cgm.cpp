#include "croprl/cgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "croprl/errors.hpp"
#include "json.hpp"

namespace croprl {

namespace {

// Radiation-equivalent evaporation: mm of water per MJ/m^2 (latent heat 2.45 MJ/kg).
constexpr double kMmPerMj = 1.0 / 2.45;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double water_stress(double sm, const CgmParams& p) {
  return clamp01((sm - p.sm_wp) / (p.sm_crit - p.sm_wp));
}

double dvs_from_thermal(double tt, const CgmParams& p) {
  double dvs;
  if (tt < p.tsum_emergence) {
    dvs = -0.1 + 0.1 * tt / p.tsum_emergence;
  } else if (tt < p.tsum_emergence + p.tsum1) {
    dvs = (tt - p.tsum_emergence) / p.tsum1;
  } else {
    dvs = 1.0 + (tt - p.tsum_emergence - p.tsum1) / p.tsum2;
  }
  return std::min(dvs, 2.0);
}

void require_finite(double v, const char* what, int day) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite ") + what + " at day " + std::to_string(day));
}

PiecewiseLinear table_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array()) throw DataError("cgm params: " + name + " must be a breakpoint array");
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 2)
      throw DataError("cgm params: " + name + " breakpoints must be [dvs, value] pairs");
    pts.emplace_back(row[0].get<double>(), row[1].get<double>());
  }
  return PiecewiseLinear(std::move(pts));
}

nlohmann::json table_to_json(const PiecewiseLinear& t) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [x, y] : t.points()) j.push_back({x, y});
  return j;
}

}  // namespace

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("breakpoint table must not be empty");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].first > points_[i - 1].first))
      throw ConfigError("breakpoint table x values must be strictly increasing");
  }
}

double PiecewiseLinear::operator()(double x) const {
  if (x <= points_.front().first) return points_.front().second;
  if (x >= points_.back().first) return points_.back().second;
  std::size_t hi = 1;
  while (points_[hi].first < x) ++hi;
  const auto& [x0, y0] = points_[hi - 1];
  const auto& [x1, y1] = points_[hi];
  const double t = (x - x0) / (x1 - x0);
  return y0 + t * (y1 - y0);
}

void validate_cgm_params(const CgmParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("cgm params: ") + name + " must be positive and finite");
  };
  positive(p.tsum_emergence, "tsum_emergence");
  positive(p.tsum1, "tsum1");
  positive(p.tsum2, "tsum2");
  positive(p.k_ext, "k_ext");
  positive(p.lue, "lue");
  positive(p.par_fraction, "par_fraction");
  positive(p.sla, "sla");
  positive(p.bucket_depth, "bucket_depth");
  positive(p.evap_coeff, "evap_coeff");
  positive(p.transp_coeff, "transp_coeff");
  positive(p.fert_recovery, "fert_recovery");
  positive(p.n_stress_exponent, "n_stress_exponent");
  positive(p.lai_init, "lai_init");
  positive(p.tagp_init, "tagp_init");
  if (p.n_mineralization_rate < 0.0) throw ConfigError("cgm params: n_mineralization_rate must be >= 0");
  if (p.evap_floor_mm < 0.0) throw ConfigError("cgm params: evap_floor_mm must be >= 0");
  if (p.drain_day_n_loss < 0.0) throw ConfigError("cgm params: drain_day_n_loss must be >= 0");
  if (!(p.drain_day_n_frac >= 0.0 && p.drain_day_n_frac < 1.0))
    throw ConfigError("cgm params: drain_day_n_frac must be in [0,1)");
  if (!(p.lai_senescence_rate >= 0.0 && p.lai_senescence_rate < 1.0))
    throw ConfigError("cgm params: lai_senescence_rate must be in [0,1)");
  if (!(p.sm_residual >= 0.0 && p.sm_residual < p.sm_wp))
    throw ConfigError("cgm params: require 0 <= sm_residual < sm_wp");
  if (!(p.sm_wp < p.sm_crit && p.sm_crit <= p.sm_fc && p.sm_fc <= p.sm_saturation))
    throw ConfigError("cgm params: require sm_wp < sm_crit <= sm_fc <= sm_saturation");
  if (p.leaf_partition.empty() || p.grain_partition.empty() || p.n_conc_target.empty())
    throw ConfigError("cgm params: partition and n_conc_target tables are required");
  // Shares must stay in [0,1] and never dispose of more than the day's growth.
  for (double dvs = -0.1; dvs <= 2.0; dvs += 0.01) {
    const double lf = p.leaf_partition(dvs);
    const double gf = p.grain_partition(dvs);
    if (lf < 0.0 || lf > 1.0 || gf < 0.0 || gf > 1.0 || lf + gf > 1.0 + 1e-9)
      throw ConfigError("cgm params: partition tables must map [-0.1,2] into [0,1] with leaf+grain <= 1");
    if (p.n_conc_target(dvs) <= 0.0)
      throw ConfigError("cgm params: n_conc_target must be positive over [-0.1,2]");
  }
}

SimState initial_sim_state(const SoilState& init) {
  SimState s;
  s.soil = init;
  return s;
}

SimState advance_day(const SimState& state, const WeatherDay& weather, double n_applied_today,
                     const CgmParams& p, DayFluxes* fluxes) {
  if (n_applied_today < 0.0 || !std::isfinite(n_applied_today))
    throw ConfigError("n_applied_today must be finite and >= 0");

  SimState s = state;
  DayFluxes fl;

  // (1) development: thermal time above base, piecewise-linear dvs mapping
  const double tmean = 0.5 * (weather.tmin + weather.tmax);
  s.thermal_time += std::max(0.0, tmean - p.t_base);
  s.crop.dvs = dvs_from_thermal(s.thermal_time, p);
  const bool newly_emerged = !s.crop.emerged && s.crop.dvs >= 0.0;
  s.crop.emerged = s.crop.dvs >= 0.0;
  s.crop.mature = s.crop.dvs >= 2.0;
  if (newly_emerged) {
    s.crop.lai = std::max(s.crop.lai, p.lai_init);
    s.crop.tagp = std::max(s.crop.tagp, p.tagp_init);
  }

  const double intercepted = 1.0 - std::exp(-p.k_ext * s.crop.lai);
  const double exposed = 1.0 - intercepted;
  const double irrad_mj = weather.irrad * 1e-6;

  // (2) soil water bucket, sequential within the day: rain in, evaporation,
  // transpiration, then drainage of anything above field capacity
  const double depth = p.bucket_depth;
  double sm = s.soil.sm;
  fl.rain_m = weather.rain * 1e-2;
  sm += fl.rain_m / depth;

  const double demand_m = std::max(p.evap_floor_mm * 1e-3, irrad_mj * kMmPerMj * 1e-3);
  const double evap_demand = p.evap_coeff * exposed * demand_m;
  fl.evap_m = std::min(evap_demand, std::max(0.0, (sm - p.sm_residual) * depth));
  sm -= fl.evap_m / depth;

  const double transp_demand = p.transp_coeff * intercepted * demand_m * water_stress(sm, p);
  fl.transp_m = std::min(transp_demand, std::max(0.0, (sm - p.sm_wp) * depth));
  sm -= fl.transp_m / depth;

  fl.drain_m = std::max(0.0, (sm - p.sm_fc) * depth);
  sm -= fl.drain_m / depth;
  s.soil.sm = sm;

  // (3) water stress for growth, from end-of-day moisture
  const double f_w = water_stress(sm, p);

  // (4) nitrogen pools: supply, optional leaching with drainage, then uptake
  fl.n_fert_in = p.fert_recovery * n_applied_today;
  fl.n_mineralized = p.n_mineralization_rate;
  double navail = s.soil.navail + fl.n_fert_in + fl.n_mineralized;
  if ((p.drain_day_n_loss > 0.0 || p.drain_day_n_frac > 0.0) && fl.drain_m > 0.0) {
    fl.n_leached = std::min(navail, p.drain_day_n_loss + p.drain_day_n_frac * navail);
    navail -= fl.n_leached;
  }
  const double conc = p.n_conc_target(s.crop.dvs);
  const double demand_n = std::max(0.0, conc * s.crop.tagp - s.crop.n_uptake_total);
  fl.n_uptake = std::min(demand_n, navail);
  navail -= fl.n_uptake;
  s.soil.navail = navail;
  s.crop.n_uptake_total += fl.n_uptake;
  const double f_n =
      std::pow(clamp01(s.crop.n_uptake_total / std::max(kCgmEps, conc * s.crop.tagp)), p.n_stress_exponent);

  // (5) light-limited growth, shut off outside the [emergence, maturity) window
  double dw = 0.0;
  if (s.crop.dvs >= 0.0 && s.crop.dvs < 2.0) {
    dw = p.lue * p.par_fraction * irrad_mj * intercepted * f_w * f_n;
  }

  // (6) partitioning: leaves drive LAI, grain pool fills after flowering
  if (dw > 0.0) {
    const double leaf_share = p.leaf_partition(s.crop.dvs);
    s.crop.lai += p.sla * leaf_share * dw;
    if (s.crop.dvs >= 1.0) {
      s.crop.twso += p.grain_partition(s.crop.dvs) * dw;
    }
    s.crop.tagp += dw;
  }

  // (7) leaf senescence late in the season
  if (s.crop.dvs > p.senescence_dvs) {
    s.crop.lai *= (1.0 - p.lai_senescence_rate);
  }

  s.day += 1;

  require_finite(s.thermal_time, "thermal time", s.day);
  require_finite(s.crop.dvs, "dvs", s.day);
  require_finite(s.crop.lai, "lai", s.day);
  require_finite(s.crop.tagp, "tagp", s.day);
  require_finite(s.crop.twso, "twso", s.day);
  require_finite(s.crop.n_uptake_total, "n uptake", s.day);
  require_finite(s.soil.sm, "soil moisture", s.day);
  require_finite(s.soil.navail, "soil nitrogen", s.day);

  if (fluxes) *fluxes = fl;
  return s;
}

std::vector<SimState> run_season(const WeatherYear& weather, const std::map<int, double>& n_schedule,
                                 const CgmParams& params, const SoilState& init) {
  validate_weather(weather);
  for (const auto& [day, dose] : n_schedule) {
    if (day < 0 || day >= kMinCoverageDays)
      throw ConfigError("n_schedule day " + std::to_string(day) + " outside episode window");
    if (dose < 0.0) throw ConfigError("n_schedule dose must be >= 0");
  }
  std::vector<SimState> traj;
  traj.reserve(kMinCoverageDays + 1);
  traj.push_back(initial_sim_state(init));
  for (int d = 0; d < kMinCoverageDays; ++d) {
    const auto it = n_schedule.find(d);
    const double dose = it == n_schedule.end() ? 0.0 : it->second;
    traj.push_back(advance_day(traj.back(), weather.days[static_cast<std::size_t>(d)], dose, params));
  }
  return traj;
}

CgmParams load_cgm_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cgm params: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cgm params " + path.string() + ": " + e.what());
  }
  CgmParams p;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != 1) throw DataError("cgm params: unsupported schema_version");
    p.t_base = j.at("t_base").get<double>();
    p.tsum_emergence = j.at("tsum_emergence").get<double>();
    p.tsum1 = j.at("tsum1").get<double>();
    p.tsum2 = j.at("tsum2").get<double>();
    p.k_ext = j.at("k_ext").get<double>();
    p.lue = j.at("lue").get<double>();
    p.par_fraction = j.at("par_fraction").get<double>();
    p.sla = j.at("sla").get<double>();
    p.leaf_partition = table_from_json(j.at("leaf_partition"), "leaf_partition");
    p.grain_partition = table_from_json(j.at("grain_partition"), "grain_partition");
    p.lai_senescence_rate = j.at("lai_senescence_rate").get<double>();
    p.senescence_dvs = j.at("senescence_dvs").get<double>();
    p.lai_init = j.at("lai_init").get<double>();
    p.tagp_init = j.at("tagp_init").get<double>();
    p.sm_wp = j.at("sm_wp").get<double>();
    p.sm_crit = j.at("sm_crit").get<double>();
    p.sm_fc = j.at("sm_fc").get<double>();
    p.sm_saturation = j.at("sm_saturation").get<double>();
    p.sm_residual = j.at("sm_residual").get<double>();
    p.bucket_depth = j.at("bucket_depth").get<double>();
    p.evap_coeff = j.at("evap_coeff").get<double>();
    p.transp_coeff = j.at("transp_coeff").get<double>();
    p.evap_floor_mm = j.at("evap_floor_mm").get<double>();
    p.n_mineralization_rate = j.at("n_mineralization_rate").get<double>();
    p.fert_recovery = j.at("fert_recovery").get<double>();
    p.n_conc_target = table_from_json(j.at("n_conc_target"), "n_conc_target");
    p.n_stress_exponent = j.at("n_stress_exponent").get<double>();
    p.drain_day_n_loss = j.value("drain_day_n_loss", 0.0);
    p.drain_day_n_frac = j.value("drain_day_n_frac", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cgm params " + path.string() + ": " + e.what());
  }
  validate_cgm_params(p);
  return p;
}

void save_cgm_params(const CgmParams& p, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["t_base"] = p.t_base;
  j["tsum_emergence"] = p.tsum_emergence;
  j["tsum1"] = p.tsum1;
  j["tsum2"] = p.tsum2;
  j["k_ext"] = p.k_ext;
  j["lue"] = p.lue;
  j["par_fraction"] = p.par_fraction;
  j["sla"] = p.sla;
  j["leaf_partition"] = table_to_json(p.leaf_partition);
  j["grain_partition"] = table_to_json(p.grain_partition);
  j["lai_senescence_rate"] = p.lai_senescence_rate;
  j["senescence_dvs"] = p.senescence_dvs;
  j["lai_init"] = p.lai_init;
  j["tagp_init"] = p.tagp_init;
  j["sm_wp"] = p.sm_wp;
  j["sm_crit"] = p.sm_crit;
  j["sm_fc"] = p.sm_fc;
  j["sm_saturation"] = p.sm_saturation;
  j["sm_residual"] = p.sm_residual;
  j["bucket_depth"] = p.bucket_depth;
  j["evap_coeff"] = p.evap_coeff;
  j["transp_coeff"] = p.transp_coeff;
  j["evap_floor_mm"] = p.evap_floor_mm;
  j["n_mineralization_rate"] = p.n_mineralization_rate;
  j["fert_recovery"] = p.fert_recovery;
  j["n_conc_target"] = table_to_json(p.n_conc_target);
  j["n_stress_exponent"] = p.n_stress_exponent;
  j["drain_day_n_loss"] = p.drain_day_n_loss;
  j["drain_day_n_frac"] = p.drain_day_n_frac;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write cgm params: " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path default_cgm_params_path() {
#ifdef CROPRL_DATA_DIR
  return std::filesystem::path(CROPRL_DATA_DIR) / "params" / "nl_winter_wheat_default.json";
#else
  return std::filesystem::path("data") / "params" / "nl_winter_wheat_default.json";
#endif
}

}  // namespace croprl
