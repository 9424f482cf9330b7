#include "croprl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "croprl/errors.hpp"
#include "json.hpp"

namespace croprl {

// ---------------------------------------------------------------------------
// CropRolloutEnv

CropRolloutEnv::CropRolloutEnv(ScenarioConfig scenario, CgmParams params, NormalizationStats stats,
                               std::vector<const WeatherYear*> years, std::uint64_t stream_seed)
    : env_(std::move(scenario), std::move(params), std::move(stats)),
      years_(std::move(years)),
      year_rng_(Rng::derive(stream_seed, 0x1EA5)),
      stream_seed_(stream_seed) {
  if (years_.empty()) throw ConfigError("rollout env needs at least one weather year");
}

int CropRolloutEnv::n_fert() const { return env_.fert_levels(); }

Vec CropRolloutEnv::reset() {
  const std::size_t year_idx = static_cast<std::size_t>(year_rng_.uniform_int(years_.size()));
  const std::uint64_t episode_seed =
      Rng::derive(stream_seed_, 0xE915, static_cast<std::uint64_t>(episode_counter_)).next_u64();
  ++episode_counter_;
  const StepObservation obs = env_.reset(years_[year_idx], episode_seed);
  return Eigen::Map<const Vec>(obs.values.data(), kObservationSize);
}

EnvInterface::StepOut CropRolloutEnv::step(const AgentAction& action) {
  const CropEnv::Step s = env_.step(action);
  StepOut out;
  out.obs = Eigen::Map<const Vec>(s.obs.values.data(), kObservationSize);
  out.reward = s.reward;
  out.done = s.done;
  return out;
}

EnvInterface::EpisodeInfo CropRolloutEnv::last_episode_info() const {
  EpisodeInfo info;
  const EpisodeRecord& rec = env_.episode();
  info.yield_kg_ha = rec.final_twso();
  info.n_applied = rec.total_n_applied();
  info.measure_counts = rec.measure_counts();
  return info;
}

// ---------------------------------------------------------------------------
// config

void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (cfg.total_steps < 1) throw ConfigError("train: total_steps must be >= 1");
  if (cfg.n_envs < 1) throw ConfigError("train: n_envs must be >= 1");
  if (cfg.horizon < 1) throw ConfigError("train: horizon must be >= 1");
  if (cfg.minibatch_seqs < 1) throw ConfigError("train: minibatch_seqs must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(cfg.clip_range > 0.0 && cfg.clip_range < 1.0))
    throw ConfigError("train: clip_range must be in (0,1)");
  if (!(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0))
    throw ConfigError("train: gae_lambda must be in [0,1]");
  if (!(cfg.train_gamma >= 0.0 && cfg.train_gamma <= 1.0))
    throw ConfigError("train: train_gamma must be in [0,1]");
  if (cfg.value_coeff < 0.0 || cfg.entropy_coeff < 0.0)
    throw ConfigError("train: loss coefficients must be >= 0");
  if (!(cfg.max_grad_norm > 0.0)) throw ConfigError("train: max_grad_norm must be positive");
  if (cfg.hidden_width < 1) throw ConfigError("train: hidden_width must be >= 1");
  if (cfg.threads < 1) throw ConfigError("train: threads must be >= 1");
}

// ---------------------------------------------------------------------------
// GAE

GaeResult compute_gae(const RolloutBuffer& buffer, double gamma, double lambda) {
  GaeResult out;
  out.advantages.resize(static_cast<std::size_t>(buffer.n_envs));
  out.returns.resize(static_cast<std::size_t>(buffer.n_envs));
  for (int e = 0; e < buffer.n_envs; ++e) {
    const auto& r = buffer.rewards[static_cast<std::size_t>(e)];
    const auto& v = buffer.value_old[static_cast<std::size_t>(e)];
    const auto& d = buffer.dones[static_cast<std::size_t>(e)];
    const int H = static_cast<int>(r.size());
    auto& adv = out.advantages[static_cast<std::size_t>(e)];
    auto& ret = out.returns[static_cast<std::size_t>(e)];
    adv.assign(static_cast<std::size_t>(H), 0.0);
    ret.assign(static_cast<std::size_t>(H), 0.0);
    double next_adv = 0.0;
    for (int t = H - 1; t >= 0; --t) {
      const double nonterminal = d[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
      const double next_value =
          t == H - 1 ? buffer.bootstrap_value[static_cast<std::size_t>(e)] : v[static_cast<std::size_t>(t + 1)];
      const double delta =
          r[static_cast<std::size_t>(t)] + gamma * next_value * nonterminal - v[static_cast<std::size_t>(t)];
      next_adv = delta + gamma * lambda * nonterminal * next_adv;
      adv[static_cast<std::size_t>(t)] = next_adv;
      ret[static_cast<std::size_t>(t)] = next_adv + v[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

double RewardNormalizer::update(const RolloutBuffer& buffer) {
  for (int e = 0; e < buffer.n_envs; ++e) {
    const auto& r = buffer.rewards[static_cast<std::size_t>(e)];
    const auto& d = buffer.dones[static_cast<std::size_t>(e)];
    const int H = static_cast<int>(r.size());
    // returns-to-go within episodes; the trailing partial episode is fine,
    // its bootstrap-free tail only shortens the horizon slightly
    double g = 0.0;
    for (int t = H - 1; t >= 0; --t) {
      g = r[static_cast<std::size_t>(t)] + gamma_ * (d[static_cast<std::size_t>(t)] ? 0.0 : g);
      ++n_;
      const double delta = g - mean_;
      mean_ += delta / static_cast<double>(n_);
      m2_ += delta * (g - mean_);
    }
  }
  return scale();
}

double RewardNormalizer::scale() const {
  if (n_ < 2) return 1.0;
  return std::max(1e-8, std::sqrt(m2_ / static_cast<double>(n_)));
}

// value_old and bootstrap_value stay untouched: the critic is trained on
// scaled targets, so its outputs already live in the scaled space.
void RewardNormalizer::apply(RolloutBuffer& buffer) const {
  const double s = scale();
  for (auto& env_rewards : buffer.rewards)
    for (double& r : env_rewards) r /= s;
}

void normalize_advantages(GaeResult& gae) {
  double sum = 0.0;
  long n = 0;
  for (const auto& env_adv : gae.advantages) {
    for (double a : env_adv) sum += a;
    n += static_cast<long>(env_adv.size());
  }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& env_adv : gae.advantages)
    for (double a : env_adv) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n)) + 1e-8;
  for (auto& env_adv : gae.advantages)
    for (double& a : env_adv) a = (a - mean) / sd;
}

// ---------------------------------------------------------------------------
// Collector

Collector::Collector(const ActorCritic& policy, std::vector<std::unique_ptr<EnvInterface>> envs,
                     std::uint64_t seed)
    : policy_(policy), envs_(std::move(envs)), action_rng_(Rng::derive(seed, 0xAC7)) {
  if (envs_.empty()) throw ConfigError("collector needs at least one environment");
  for (const auto& env : envs_) {
    if (env->obs_size() != policy_.obs_size() || env->n_fert() != policy_.n_fert() ||
        env->n_measure() != policy_.n_measure())
      throw ConfigError("environment/policy interface mismatch");
  }
  current_obs_.resize(envs_.size());
  hidden_.assign(envs_.size(), policy_.zero_hidden());
  episode_return_.assign(envs_.size(), 0.0);
  for (std::size_t e = 0; e < envs_.size(); ++e) current_obs_[e] = envs_[e]->reset();
}

RolloutBuffer Collector::collect(int horizon) {
  const int n_envs = static_cast<int>(envs_.size());
  RolloutBuffer buf;
  buf.n_envs = n_envs;
  buf.horizon = horizon;
  buf.obs.resize(static_cast<std::size_t>(n_envs));
  buf.actions.resize(static_cast<std::size_t>(n_envs));
  buf.logp_old.resize(static_cast<std::size_t>(n_envs));
  buf.value_old.resize(static_cast<std::size_t>(n_envs));
  buf.rewards.resize(static_cast<std::size_t>(n_envs));
  buf.dones.resize(static_cast<std::size_t>(n_envs));
  buf.bootstrap_value.assign(static_cast<std::size_t>(n_envs), 0.0);

  for (int e = 0; e < n_envs; ++e) {
    auto& env = *envs_[static_cast<std::size_t>(e)];
    AcHidden& hid = hidden_[static_cast<std::size_t>(e)];
    int seq_begin = 0;
    buf.sequences.push_back(SequenceRef{e, 0, 0, hid});

    for (int t = 0; t < horizon; ++t) {
      PolicyOutput out = policy_.forward(current_obs_[static_cast<std::size_t>(e)], hid);
      const ActionSample sample = sample_action(out, action_rng_);

      buf.obs[static_cast<std::size_t>(e)].push_back(current_obs_[static_cast<std::size_t>(e)]);
      buf.actions[static_cast<std::size_t>(e)].push_back(sample.action);
      buf.logp_old[static_cast<std::size_t>(e)].push_back(sample.log_prob);
      buf.value_old[static_cast<std::size_t>(e)].push_back(out.value);

      const EnvInterface::StepOut s = env.step(sample.action);
      ++total_env_steps_;
      episode_return_[static_cast<std::size_t>(e)] += s.reward;
      buf.rewards[static_cast<std::size_t>(e)].push_back(s.reward);
      buf.dones[static_cast<std::size_t>(e)].push_back(s.done ? 1 : 0);

      if (s.done) {
        const EnvInterface::EpisodeInfo info = env.last_episode_info();
        EpisodeStats stats;
        stats.total_reward = episode_return_[static_cast<std::size_t>(e)];
        stats.yield_kg_ha = info.yield_kg_ha;
        stats.n_applied = info.n_applied;
        stats.measure_counts = info.measure_counts;
        completed_.push_back(stats);
        episode_return_[static_cast<std::size_t>(e)] = 0.0;
        current_obs_[static_cast<std::size_t>(e)] = env.reset();
        hid = policy_.zero_hidden();
        // close the sequence and open the next one at the fresh episode
        buf.sequences.back().begin = seq_begin;
        buf.sequences.back().end = t + 1;
        if (t + 1 < horizon) {
          seq_begin = t + 1;
          buf.sequences.push_back(SequenceRef{e, seq_begin, seq_begin, hid});
        } else {
          seq_begin = horizon;
        }
      } else {
        current_obs_[static_cast<std::size_t>(e)] = s.obs;
      }
    }

    if (seq_begin < horizon) {
      buf.sequences.back().begin = seq_begin;
      buf.sequences.back().end = horizon;
      // mid-episode cut: bootstrap with the critic value of the next obs
      AcHidden preview = hid;
      const PolicyOutput out = policy_.forward(current_obs_[static_cast<std::size_t>(e)], preview);
      buf.bootstrap_value[static_cast<std::size_t>(e)] = out.value;
    }
  }
  return buf;
}

std::vector<Collector::EpisodeStats> Collector::drain_completed() {
  std::vector<EpisodeStats> out;
  out.swap(completed_);
  return out;
}

// ---------------------------------------------------------------------------
// ppo_update

namespace {

// Replays one sequence through actor and critic, accumulating loss pieces and
// the per-step output gradients for BPTT.
struct SequenceWork {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_hits = 0.0;
  double kl_sum = 0.0;
  long steps = 0;
};

}  // namespace

UpdateStats ppo_update(ActorCritic& policy, const RolloutBuffer& buffer, const GaeResult& gae,
                       const TrainConfig& cfg, Adam& adam_actor, Adam& adam_critic,
                       Rng& shuffle_rng) {
  const int n_fert = policy.n_fert();
  const int n_measure = policy.n_measure();
  const long total = buffer.total_steps();
  if (total == 0) throw ConfigError("ppo_update on empty buffer");

  std::vector<std::size_t> order(buffer.sequences.size());
  std::iota(order.begin(), order.end(), 0u);

  UpdateStats agg;
  long agg_batches = 0;

  Vec grad_actor = Vec::Zero(policy.actor().param_count());
  Vec grad_critic = Vec::Zero(policy.critic().param_count());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    for (std::size_t mb_start = 0; mb_start < order.size();
         mb_start += static_cast<std::size_t>(cfg.minibatch_seqs)) {
      const std::size_t mb_end =
          std::min(order.size(), mb_start + static_cast<std::size_t>(cfg.minibatch_seqs));

      long mb_steps = 0;
      for (std::size_t k = mb_start; k < mb_end; ++k)
        mb_steps += buffer.sequences[order[k]].end - buffer.sequences[order[k]].begin;
      if (mb_steps == 0) continue;
      const double inv_steps = 1.0 / static_cast<double>(mb_steps);

      grad_actor.setZero();
      grad_critic.setZero();
      SequenceWork work;

      for (std::size_t k = mb_start; k < mb_end; ++k) {
        const SequenceRef& seq = buffer.sequences[order[k]];
        const std::size_t e = static_cast<std::size_t>(seq.env);
        const int len = seq.end - seq.begin;
        if (len <= 0) continue;

        RecurrentNet::Tape actor_tape, critic_tape;
        NetHidden ah = seq.h0.actor;
        NetHidden ch = seq.h0.critic;
        std::vector<Vec> d_actor_out(static_cast<std::size_t>(len));
        std::vector<Vec> d_critic_out(static_cast<std::size_t>(len));

        for (int t = 0; t < len; ++t) {
          const std::size_t idx = static_cast<std::size_t>(seq.begin + t);
          const Vec& ob = buffer.obs[e][idx];
          const Vec actor_out = policy.actor().forward(ob, ah, actor_tape);
          const Vec critic_out = policy.critic().forward(ob, ch, critic_tape);
          const PolicyOutput out = policy.split_actor_output(actor_out, critic_out(0));

          const AgentAction& act = buffer.actions[e][idx];
          double logp_new = 0.0, ent = 0.0;
          log_prob_and_entropy(out, act, &logp_new, &ent);

          const double logp_old = buffer.logp_old[e][idx];
          const double adv = gae.advantages[e][idx];
          const double ret = gae.returns[e][idx];
          const double ratio = std::exp(logp_new - logp_old);
          const double clipped = std::clamp(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
          const double surr1 = ratio * adv;
          const double surr2 = clipped * adv;

          // policy loss term -min(surr1, surr2); gradient flows through the
          // unclipped ratio only where it is the active branch
          double dlogp_coeff = 0.0;
          if (surr1 <= surr2) {
            work.policy_loss -= surr1;
            dlogp_coeff = -ratio * adv;  // d(-ratio*adv)/dlogp_new
          } else {
            work.policy_loss -= surr2;
            dlogp_coeff = 0.0;
          }
          work.clip_hits += (ratio < 1.0 - cfg.clip_range || ratio > 1.0 + cfg.clip_range) ? 1.0 : 0.0;
          work.kl_sum += logp_old - logp_new;
          work.entropy += ent;

          const double v_new = out.value;
          const double v_err = v_new - ret;
          work.value_loss += v_err * v_err;

          // total objective per step: policy + vc*value - ec*entropy, averaged
          Vec d_fert, d_measure;
          action_dist_grads(out, act, dlogp_coeff * inv_steps, -cfg.entropy_coeff * inv_steps,
                            d_fert, d_measure);
          Vec da(n_fert + n_measure);
          if (n_measure > 0)
            da << d_fert, d_measure;
          else
            da = d_fert;
          d_actor_out[static_cast<std::size_t>(t)] = da;
          Vec dc(1);
          dc(0) = cfg.value_coeff * 2.0 * v_err * inv_steps;
          d_critic_out[static_cast<std::size_t>(t)] = dc;

          work.steps += 1;
        }

        policy.actor().backward(actor_tape, d_actor_out, grad_actor);
        policy.critic().backward(critic_tape, d_critic_out, grad_critic);
      }

      // joint global-norm clip across both networks
      const double norm =
          std::sqrt(grad_actor.squaredNorm() + grad_critic.squaredNorm());
      if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm in ppo update");
      if (norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / norm;
        grad_actor *= scale;
        grad_critic *= scale;
      }
      adam_actor.step(policy.actor().params(), grad_actor);
      adam_critic.step(policy.critic().params(), grad_critic);

      const double inv = 1.0 / static_cast<double>(mb_steps);
      agg.policy_loss += work.policy_loss * inv;
      agg.value_loss += work.value_loss * inv;
      agg.entropy += work.entropy * inv;
      agg.clip_fraction += work.clip_hits * inv;
      agg.approx_kl += work.kl_sum * inv;
      agg.grad_norm = norm;
      ++agg_batches;
    }
  }

  if (agg_batches > 0) {
    const double inv = 1.0 / static_cast<double>(agg_batches);
    agg.policy_loss *= inv;
    agg.value_loss *= inv;
    agg.entropy *= inv;
    agg.clip_fraction *= inv;
    agg.approx_kl *= inv;
  }
  if (!std::isfinite(agg.policy_loss) || !std::isfinite(agg.value_loss))
    throw NumericError("non-finite loss in ppo update");
  return agg;
}

// ---------------------------------------------------------------------------
// train loop

void write_train_log_header(std::ostream& out) {
  out << "step,episodes,mean_return,mean_yield,mean_n,measure_counts_json\n";
}

void write_train_log_row(std::ostream& out, const TrainLogRow& row) {
  nlohmann::ordered_json counts;
  for (std::size_t i = 0; i < kNumMeasurable; ++i)
    counts[kMeasurableNames[i]] = row.mean_measure_counts[i];
  std::string counts_str = counts.dump();
  // CSV-quote the JSON field
  std::string quoted = "\"";
  for (char c : counts_str) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += "\"";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g,%.17g,%.17g,", row.step, row.episodes,
                row.mean_return, row.mean_yield, row.mean_n);
  out << buf << quoted << "\n";
}

void train(ActorCritic& policy, std::vector<std::unique_ptr<EnvInterface>> envs,
           const TrainConfig& cfg, const TrainHooks& hooks) {
  validate_train_config(cfg);
  Collector collector(policy, std::move(envs), cfg.seed);
  Adam adam_actor(policy.actor().param_count(), cfg.learning_rate);
  Adam adam_critic(policy.critic().param_count(), cfg.learning_rate);
  Rng shuffle_rng = Rng::derive(cfg.seed, 0x5480FF1E);
  RewardNormalizer reward_norm(cfg.train_gamma);

  long episodes_total = 0;
  long next_checkpoint = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : 0;

  while (collector.total_env_steps() < cfg.total_steps) {
    RolloutBuffer buffer = collector.collect(cfg.horizon);
    if (cfg.normalize_rewards) {
      reward_norm.update(buffer);
      reward_norm.apply(buffer);
    }
    GaeResult gae = compute_gae(buffer, cfg.train_gamma, cfg.gae_lambda);
    normalize_advantages(gae);
    const UpdateStats stats =
        ppo_update(policy, buffer, gae, cfg, adam_actor, adam_critic, shuffle_rng);

    const auto episodes = collector.drain_completed();
    episodes_total += static_cast<long>(episodes.size());

    TrainLogRow row;
    row.step = collector.total_env_steps();
    row.episodes = episodes_total;
    row.update = stats;
    if (!episodes.empty()) {
      const double inv = 1.0 / static_cast<double>(episodes.size());
      for (const auto& ep : episodes) {
        row.mean_return += ep.total_reward * inv;
        row.mean_yield += ep.yield_kg_ha * inv;
        row.mean_n += ep.n_applied * inv;
        for (std::size_t i = 0; i < kNumMeasurable; ++i)
          row.mean_measure_counts[i] += ep.measure_counts[i] * inv;
      }
    }
    if (hooks.on_log) hooks.on_log(row);

    if (cfg.checkpoint_every > 0 && hooks.on_checkpoint &&
        collector.total_env_steps() >= next_checkpoint &&
        collector.total_env_steps() < cfg.total_steps) {
      hooks.on_checkpoint(collector.total_env_steps());
      next_checkpoint += cfg.checkpoint_every;
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(collector.total_env_steps());
}

}  // namespace croprl
