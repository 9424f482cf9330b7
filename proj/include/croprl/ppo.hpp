#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "croprl/agent.hpp"
#include "croprl/env.hpp"

namespace croprl {

// Minimal environment surface the trainer needs; lets tests plug in tiny
// known-optimum worlds next to the crop environment.
class EnvInterface {
 public:
  virtual ~EnvInterface() = default;
  virtual int obs_size() const = 0;
  virtual int n_fert() const = 0;
  virtual int n_measure() const = 0;
  // Starts the next episode; seeding is the environment's own business so a
  // construction seed fully determines the run.
  virtual Vec reset() = 0;
  struct StepOut {
    Vec obs;
    double reward = 0.0;
    bool done = false;
  };
  virtual StepOut step(const AgentAction& action) = 0;

  // Diagnostics of the episode that just finished (polled right after a done).
  struct EpisodeInfo {
    double yield_kg_ha = 0.0;
    double n_applied = 0.0;
    std::array<double, kNumMeasurable> measure_counts{};
  };
  virtual EpisodeInfo last_episode_info() const { return {}; }
};

// Crop environment adapter that owns per-env seeding and per-episode uniform
// weather-year selection.
class CropRolloutEnv : public EnvInterface {
 public:
  CropRolloutEnv(ScenarioConfig scenario, CgmParams params, NormalizationStats stats,
                 std::vector<const WeatherYear*> years, std::uint64_t stream_seed);

  int obs_size() const override { return kObservationSize; }
  int n_fert() const override;
  int n_measure() const override { return env_.measure_flags(); }
  Vec reset() override;
  StepOut step(const AgentAction& action) override;
  EpisodeInfo last_episode_info() const override;
  const CropEnv& env() const { return env_; }

 private:
  CropEnv env_;
  std::vector<const WeatherYear*> years_;
  Rng year_rng_;
  std::uint64_t stream_seed_;
  long episode_counter_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  long total_steps = 100000;
  int n_envs = 4;
  int horizon = 2 * kDefaultEpisodeWeeks;  // steps per env per collection
  int minibatch_seqs = 4;                  // sequences per minibatch
  int epochs = 4;
  double clip_range = 0.2;
  double gae_lambda = 0.95;
  double train_gamma = 0.99;  // training discount; the task objective itself is undiscounted
  double value_coeff = 0.5;
  double entropy_coeff = 0.0;
  double max_grad_norm = 0.5;
  // Scale rewards by the running std of the discounted return before the
  // update, so value targets stay O(1) and the critic can actually track them
  // at any return magnitude. Logged episode returns stay unscaled.
  bool normalize_rewards = true;
  std::uint64_t seed = 0;
  int hidden_width = 256;
  long checkpoint_every = 0;  // 0: only at the end
  int threads = 1;
};

void validate_train_config(const TrainConfig& cfg);

// Whole-episode (or episode-tail) sequences; a sequence never crosses a done.
struct SequenceRef {
  int env = 0;
  int begin = 0;  // step range [begin, end) within the env stream
  int end = 0;
  AcHidden h0;  // recurrent state at the first step of the sequence
};

struct RolloutBuffer {
  int n_envs = 0;
  int horizon = 0;
  // [env][t]
  std::vector<std::vector<Vec>> obs;
  std::vector<std::vector<AgentAction>> actions;
  std::vector<std::vector<double>> logp_old;
  std::vector<std::vector<double>> value_old;
  std::vector<std::vector<double>> rewards;
  std::vector<std::vector<std::uint8_t>> dones;
  std::vector<double> bootstrap_value;  // V(s_H) per env, 0 after a terminal step
  std::vector<SequenceRef> sequences;

  long total_steps() const { return static_cast<long>(n_envs) * horizon; }
};

struct GaeResult {
  std::vector<std::vector<double>> advantages;  // [env][t]
  std::vector<std::vector<double>> returns;
};

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t
// A_t     = delta_t + gamma*lambda*(1-done_t)*A_{t+1}, V_H = bootstrap.
GaeResult compute_gae(const RolloutBuffer& buffer, double gamma, double lambda);

// Running variance of the discounted return-to-go, Welford over every step
// seen so far; the scale is its std, floored. Dividing rewards by it keeps
// value targets O(1) regardless of the environment's reward magnitude.
class RewardNormalizer {
 public:
  explicit RewardNormalizer(double gamma) : gamma_(gamma) {}
  // Feeds one collected batch and returns the current scale.
  double update(const RolloutBuffer& buffer);
  double scale() const;
  // Divides the buffer's rewards (and nothing else) by the current scale.
  void apply(RolloutBuffer& buffer) const;

 private:
  double gamma_;
  double mean_ = 0.0;
  double m2_ = 0.0;
  long n_ = 0;
};

// In-place batch normalization of the advantages (mean 0, sd 1, eps-guarded).
void normalize_advantages(GaeResult& gae);

// Drives n_envs environments with the current policy, carrying hidden states
// across collections and snapshotting them at sequence starts so updates can
// replay every sequence exactly.
class Collector {
 public:
  struct EpisodeStats {
    double total_reward = 0.0;
    double yield_kg_ha = 0.0;
    double n_applied = 0.0;
    std::array<double, kNumMeasurable> measure_counts{};
  };

  Collector(const ActorCritic& policy, std::vector<std::unique_ptr<EnvInterface>> envs,
            std::uint64_t seed);

  RolloutBuffer collect(int horizon);
  // Episodes completed since the last drain.
  std::vector<EpisodeStats> drain_completed();
  long total_env_steps() const { return total_env_steps_; }

 private:
  const ActorCritic& policy_;
  std::vector<std::unique_ptr<EnvInterface>> envs_;
  Rng action_rng_;
  std::vector<Vec> current_obs_;
  std::vector<AcHidden> hidden_;
  std::vector<double> episode_return_;
  std::vector<EpisodeStats> completed_;
  long total_env_steps_ = 0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;  // pre-clip, last minibatch
};

// Clipped-surrogate update over whole sequences: per epoch the sequences are
// shuffled into minibatches, each sequence is replayed from its stored initial
// hidden state, and one Adam step is taken per minibatch with a joint global
// gradient-norm clip across both networks.
UpdateStats ppo_update(ActorCritic& policy, const RolloutBuffer& buffer, const GaeResult& gae,
                       const TrainConfig& cfg, Adam& adam_actor, Adam& adam_critic,
                       Rng& shuffle_rng);

// Training log row, one per collect/update iteration.
struct TrainLogRow {
  long step = 0;
  long episodes = 0;
  double mean_return = 0.0;
  double mean_yield = 0.0;
  double mean_n = 0.0;
  std::array<double, kNumMeasurable> mean_measure_counts{};
  UpdateStats update;
};

// CSV schema: step,episodes,mean_return,mean_yield,mean_n,measure_counts_json
void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const TrainLogRow& row);

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_log;
  std::function<void(long step)> on_checkpoint;
};

// Alternates collection and updates until total_steps env steps are consumed.
void train(ActorCritic& policy, std::vector<std::unique_ptr<EnvInterface>> envs,
           const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace croprl
