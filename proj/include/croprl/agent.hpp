#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "croprl/env.hpp"
#include "croprl/rng.hpp"

namespace croprl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Per-layer recurrent state, zero at episode start.
struct NetHidden {
  Vec h1, c1, h2, c2;
};

// tanh input projection -> two stacked LSTM layers -> linear head.
// Parameters live in one flat vector (simplifies the optimizer, gradient
// checks and checkpointing); matrix views are mapped on demand.
// All math is double precision.
class RecurrentNet {
 public:
  RecurrentNet(int input_size, int hidden_size, int output_size);

  int input_size() const { return in_; }
  int hidden_size() const { return hidden_; }
  int output_size() const { return out_; }
  long param_count() const { return theta_.size(); }

  Vec& params() { return theta_; }
  const Vec& params() const { return theta_; }

  // Orthogonal recurrent/input blocks, small uniform head, zero biases except
  // the forget gate at +1.
  void init_weights(Rng& rng);

  NetHidden zero_hidden() const;

  // One step; advances `state` in place.
  Vec forward(const Vec& input, NetHidden& state) const;

  // Caches of a recorded forward pass, consumed by backward().
  struct StepCache {
    Vec input;
    Vec x1;  // post-projection activation
    Vec h1_prev, c1_prev, i1, f1, g1, o1, c1, tc1;
    Vec h2_prev, c2_prev, i2, f2, g2, o2, c2, tc2;
  };
  struct Tape {
    std::vector<StepCache> steps;
    void clear() { steps.clear(); }
  };

  Vec forward(const Vec& input, NetHidden& state, Tape& tape) const;

  // Exact backpropagation through time over the taped sequence. d_outputs[t]
  // is dL/d(output_t); gradients are accumulated into `grad` (same layout as
  // params()), which must be pre-sized and may carry other contributions.
  void backward(const Tape& tape, const std::vector<Vec>& d_outputs, Vec& grad) const;

 private:
  struct View;  // maps a flat vector to named blocks
  View view(const Vec& v) const;

  int in_, hidden_, out_;
  Vec theta_;
};

struct PolicyOutput {
  Vec fert_logits;
  Vec measure_logits;  // empty when the scenario is fertilize-only
  double value = 0.0;
};

struct AcHidden {
  NetHidden actor, critic;
};

// Two separate recurrent networks: the actor emits 7 categorical fertilizer
// logits plus one Bernoulli logit per measurable feature; the critic emits
// the state value.
class ActorCritic {
 public:
  ActorCritic(int obs_size, int hidden_size, int n_fert, int n_measure);

  void init_weights(std::uint64_t seed);

  int obs_size() const { return obs_size_; }
  int hidden_size() const { return hidden_size_; }
  int n_fert() const { return n_fert_; }
  int n_measure() const { return n_measure_; }

  RecurrentNet& actor() { return actor_; }
  const RecurrentNet& actor() const { return actor_; }
  RecurrentNet& critic() { return critic_; }
  const RecurrentNet& critic() const { return critic_; }

  AcHidden zero_hidden() const;
  PolicyOutput forward(const Vec& obs, AcHidden& state) const;
  PolicyOutput split_actor_output(const Vec& actor_out, double value) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  static ActorCritic load_checkpoint(const std::filesystem::path& path);

 private:
  int obs_size_, hidden_size_, n_fert_, n_measure_;
  RecurrentNet actor_;
  RecurrentNet critic_;
};

struct ActionSample {
  AgentAction action;
  double log_prob = 0.0;
  double entropy = 0.0;
};

// Factored distribution: categorical fertilizer x independent Bernoulli
// measure flags; log-probs add across components.
ActionSample sample_action(const PolicyOutput& out, Rng& rng);
// Greedy mode: argmax fertilizer, flag on iff its probability exceeds 1/2.
AgentAction greedy_action(const PolicyOutput& out);
void log_prob_and_entropy(const PolicyOutput& out, const AgentAction& action, double* log_prob,
                          double* entropy);

// d(coeff_logp * log_prob + coeff_ent * entropy)/d(logits).
void action_dist_grads(const PolicyOutput& out, const AgentAction& action, double coeff_logp,
                       double coeff_ent, Vec& d_fert_logits, Vec& d_measure_logits);

// Plain Adam on a flat parameter vector.
class Adam {
 public:
  Adam(long n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vec& theta, const Vec& grad);
  double lr() const { return lr_; }

 private:
  Vec m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace croprl
