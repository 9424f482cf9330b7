#include "croprl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "croprl/errors.hpp"
#include "croprl/rng.hpp"

namespace croprl {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double quantile(std::vector<double> samples, double p) {
  if (samples.empty()) throw ConfigError("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw ConfigError("quantile p must be in [0,1]");
  std::sort(samples.begin(), samples.end());
  const double h = (static_cast<double>(samples.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(samples.size() - 1, lo + 1);
  const double frac = h - std::floor(h);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

double median(std::vector<double> samples) { return quantile(std::move(samples), 0.5); }

double iqr(std::vector<double> samples) {
  if (samples.empty()) throw ConfigError("iqr of empty sample");
  std::sort(samples.begin(), samples.end());
  const double h25 = (static_cast<double>(samples.size()) - 1.0) * 0.25;
  const double h75 = (static_cast<double>(samples.size()) - 1.0) * 0.75;
  auto interp = [&samples](double h) {
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(samples.size() - 1, lo + 1);
    return samples[lo] + (h - std::floor(h)) * (samples[hi] - samples[lo]);
  };
  return interp(h75) - interp(h25);
}

std::pair<double, double> bootstrap_median_ci(const std::vector<double>& samples, int resamples,
                                              double level, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n < 2) throw ConfigError("bootstrap needs at least two samples");
  if (resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must be in (0,1)");

  // sort first so the result is invariant to the input ordering
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());

  Rng rng = Rng::derive(seed, 0xB007);
  std::vector<double> medians(static_cast<std::size_t>(resamples));
  std::vector<double> scratch(n);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = sorted[rng.uniform_int(n)];
    const std::size_t mid = n / 2;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
    double med = scratch[mid];
    if (n % 2 == 0) {
      const double below =
          *std::max_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid));
      med = 0.5 * (below + med);
    }
    medians[static_cast<std::size_t>(b)] = med;
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = (1.0 - level) / 2.0;
  auto nearest_rank = [&medians, resamples](double a) {
    long k = static_cast<long>(std::ceil(a * resamples));
    k = std::clamp(k, 1L, static_cast<long>(resamples));
    return medians[static_cast<std::size_t>(k - 1)];
  };
  return {nearest_rank(alpha), nearest_rank(1.0 - alpha)};
}

YieldSummary summarize_yields(const std::vector<EpisodeRecord>& records, int resamples,
                              double level, std::uint64_t seed) {
  if (records.empty()) throw ConfigError("summarize_yields on empty record set");
  std::vector<double> yields;
  yields.reserve(records.size());
  for (const EpisodeRecord& r : records) yields.push_back(r.final_twso() / 1000.0);

  YieldSummary s;
  s.n = static_cast<int>(yields.size());
  s.median_t_ha = median(yields);
  s.iqr_t_ha = iqr(yields);
  if (yields.size() >= 2) {
    const auto [lo, hi] = bootstrap_median_ci(yields, resamples, level, seed);
    s.ci_low = lo;
    s.ci_high = hi;
  } else {
    s.ci_low = s.ci_high = s.median_t_ha;
  }
  return s;
}

MeasureSummary summarize_measures(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw ConfigError("summarize_measures on empty record set");
  MeasureSummary s;
  s.n = static_cast<int>(records.size());
  std::array<std::vector<double>, kNumMeasurable> counts;
  for (auto& c : counts) c.reserve(records.size());
  for (const EpisodeRecord& r : records) {
    const auto c = r.measure_counts();
    for (std::size_t i = 0; i < kNumMeasurable; ++i) counts[i].push_back(c[i]);
  }
  for (std::size_t i = 0; i < kNumMeasurable; ++i) {
    double mean = 0.0;
    for (double v : counts[i]) mean += v;
    mean /= static_cast<double>(counts[i].size());
    double mad = 0.0;
    for (double v : counts[i]) mad += std::abs(v - mean);
    mad /= static_cast<double>(counts[i].size());
    s.mean_counts[i] = mean;
    s.mad_counts[i] = mad;
  }
  return s;
}

TemporalProfile temporal_profile(const std::vector<EpisodeRecord>& records, int bins) {
  if (records.empty()) throw ConfigError("temporal_profile on empty record set");
  if (bins < 1) throw ConfigError("temporal_profile needs at least one bin");

  TemporalProfile p;
  p.bins = bins;
  for (auto& f : p.frequency) f.assign(static_cast<std::size_t>(bins), 0.0);

  double flowering_sum = 0.0;
  long flowering_n = 0;
  for (const EpisodeRecord& r : records) {
    const int weeks = static_cast<int>(r.weeks.size());
    bool flowered = false;
    for (const WeekRecord& w : r.weeks) {
      const int bin = std::min(bins - 1, w.week * bins / std::max(1, weeks));
      for (std::size_t i = 0; i < kNumMeasurable; ++i)
        if (w.action.measure_mask[i]) p.frequency[i][static_cast<std::size_t>(bin)] += 1.0;
      if (!flowered && w.state_end.crop.dvs >= 1.0) {
        flowering_sum += w.week;
        ++flowering_n;
        flowered = true;
      }
    }
  }
  for (auto& f : p.frequency) {
    double total = 0.0;
    for (double v : f) total += v;
    if (total > 0.0)
      for (double& v : f) v /= total;
  }
  p.flowering_week = flowering_n > 0 ? flowering_sum / static_cast<double>(flowering_n) : -1.0;
  return p;
}

void export_trace(const EpisodeRecord& record, std::ostream& out) {
  out << "week,lai,n_applied";
  for (const char* name : kMeasurableNames) out << ",mask_" << name;
  out << "\n";
  for (const WeekRecord& w : record.weeks) {
    out << w.week << ',' << fmt(w.state_end.crop.lai) << ',' << fmt(w.n_applied);
    for (std::size_t i = 0; i < kNumMeasurable; ++i)
      out << ',' << (w.action.measure_mask[i] ? 1 : 0);
    out << "\n";
  }
}

void write_yields_csv(const YieldSummary& s, const std::string& scenario, std::ostream& out) {
  out << "scenario,median_t_ha,iqr,ci_low,ci_high,n\n";
  out << scenario << ',' << fmt(s.median_t_ha) << ',' << fmt(s.iqr_t_ha) << ',' << fmt(s.ci_low)
      << ',' << fmt(s.ci_high) << ',' << s.n << "\n";
}

void write_measures_csv(const MeasureSummary& s, std::ostream& out) {
  out << "feature,mean_count,mad\n";
  for (std::size_t i = 0; i < kNumMeasurable; ++i)
    out << kMeasurableNames[i] << ',' << fmt(s.mean_counts[i]) << ',' << fmt(s.mad_counts[i])
        << "\n";
}

void write_temporal_profile_csv(const TemporalProfile& p, std::ostream& out) {
  out << "feature,bin,frequency\n";
  for (std::size_t i = 0; i < kNumMeasurable; ++i)
    for (int b = 0; b < p.bins; ++b)
      out << kMeasurableNames[i] << ',' << b << ',' << fmt(p.frequency[i][static_cast<std::size_t>(b)])
          << "\n";
  out << "flowering_week,," << fmt(p.flowering_week) << "\n";
}

void write_episodes_csv_header(std::ostream& out) {
  out << "scenario,weather,seed,final_twso_kg_ha,total_reward,total_n";
  for (const char* name : kMeasurableNames) out << ",count_" << name;
  out << "\n";
}

void write_episodes_csv_row(const EpisodeRecord& rec, std::ostream& out) {
  out << rec.scenario << ',' << rec.weather_label << ',' << rec.seed << ','
      << fmt(rec.final_twso()) << ',' << fmt(rec.total_reward()) << ','
      << fmt(rec.total_n_applied());
  const auto counts = rec.measure_counts();
  for (std::size_t i = 0; i < kNumMeasurable; ++i) out << ',' << fmt(counts[i]);
  out << "\n";
}

}  // namespace croprl
