#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "croprl/env.hpp"

namespace croprl {

// Quantile with linear interpolation between order statistics
// (h = (n-1)p, the numpy/R-7 rule). Input need not be sorted.
double quantile(std::vector<double> samples, double p);
double median(std::vector<double> samples);
double iqr(std::vector<double> samples);

// Percentile bootstrap of the median; bounds are nearest-rank order statistics
// of the resampled medians (rank ceil(alpha*B), clamped to [1,B]).
// Deterministic per seed. Requires n >= 2.
std::pair<double, double> bootstrap_median_ci(const std::vector<double>& samples, int resamples,
                                              double level, std::uint64_t seed);

struct YieldSummary {
  double median_t_ha = 0.0;
  double iqr_t_ha = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
};

// Yields read from each episode's final twso, converted kg/ha -> t/ha.
YieldSummary summarize_yields(const std::vector<EpisodeRecord>& records, int resamples = 10000,
                              double level = 0.95, std::uint64_t seed = 0);

struct MeasureSummary {
  // per feature, ordered as kMeasurableNames
  std::array<double, kNumMeasurable> mean_counts{};
  std::array<double, kNumMeasurable> mad_counts{};  // mean absolute deviation around the mean
  int n = 0;
};

MeasureSummary summarize_measures(const std::vector<EpisodeRecord>& records);

struct TemporalProfile {
  int bins = 0;
  // [feature][bin], each feature normalized to sum 1 (all-zero rows stay 0)
  std::array<std::vector<double>, kNumMeasurable> frequency;
  // mean week at which dvs first reaches 1; -1 when no episode flowers
  double flowering_week = -1.0;
};

TemporalProfile temporal_profile(const std::vector<EpisodeRecord>& records, int bins);

// Per-week trace for external plotting:
// week,lai,n_applied,mask_tagp,mask_lai,mask_navail,mask_sm,mask_nuptake_total,mask_random
void export_trace(const EpisodeRecord& record, std::ostream& out);

// Report bundle fragments (yields.csv / measures.csv / temporal_profile.csv).
void write_yields_csv(const YieldSummary& summary, const std::string& scenario, std::ostream& out);
void write_measures_csv(const MeasureSummary& summary, std::ostream& out);
void write_temporal_profile_csv(const TemporalProfile& profile, std::ostream& out);

// One row per episode, the raw material for cross-run aggregation:
// scenario,weather,seed,final_twso_kg_ha,total_reward,total_n,count_<feature>...
void write_episodes_csv_header(std::ostream& out);
void write_episodes_csv_row(const EpisodeRecord& rec, std::ostream& out);

}  // namespace croprl
