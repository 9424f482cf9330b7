#include "croprl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "croprl/errors.hpp"
#include "json.hpp"

namespace croprl {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow on either tail
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec p = (logits.array() - m).exp();
  p /= p.sum();
  return p;
}

// Orthogonal matrix via QR of a Gaussian draw, sign-fixed for determinism.
Mat orthogonal(int rows, int cols, double gain, Rng& rng) {
  const int n = std::max(rows, cols);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.standard_normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return gain * q.topLeftCorner(rows, cols);
}

}  // namespace

// ---------------------------------------------------------------------------
// RecurrentNet

struct RecurrentNet::View {
  Eigen::Map<const Mat> in_w;
  Eigen::Map<const Vec> in_b;
  Eigen::Map<const Mat> l1_wx, l1_wh;
  Eigen::Map<const Vec> l1_b;
  Eigen::Map<const Mat> l2_wx, l2_wh;
  Eigen::Map<const Vec> l2_b;
  Eigen::Map<const Mat> head_w;
  Eigen::Map<const Vec> head_b;
};

RecurrentNet::View RecurrentNet::view(const Vec& v) const {
  const int I = in_, H = hidden_, O = out_;
  const double* p = v.data();
  auto take_m = [&p](int r, int c) {
    Eigen::Map<const Mat> m(p, r, c);
    p += static_cast<std::ptrdiff_t>(r) * c;
    return m;
  };
  auto take_v = [&p](int n) {
    Eigen::Map<const Vec> m(p, n);
    p += n;
    return m;
  };
  return View{take_m(H, I),     take_v(H),        take_m(4 * H, H), take_m(4 * H, H),
              take_v(4 * H),    take_m(4 * H, H), take_m(4 * H, H), take_v(4 * H),
              take_m(O, H),     take_v(O)};
}

RecurrentNet::RecurrentNet(int input_size, int hidden_size, int output_size)
    : in_(input_size), hidden_(hidden_size), out_(output_size) {
  if (in_ < 1 || hidden_ < 1 || out_ < 1) throw ConfigError("net sizes must be positive");
  const long H = hidden_, I = in_, O = out_;
  const long count = H * I + H + 2 * (4 * H * H + 4 * H * H + 4 * H) + O * H + O;
  theta_ = Vec::Zero(count);
}

void RecurrentNet::init_weights(Rng& rng) {
  const int I = in_, H = hidden_, O = out_;
  double* p = theta_.data();
  auto put_m = [&p](const Mat& m) {
    std::memcpy(p, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    p += m.size();
  };
  auto put_zero_v = [&p](int n) {
    std::fill(p, p + n, 0.0);
    p += n;
  };

  put_m(orthogonal(H, I, 1.0, rng));  // in_w
  put_zero_v(H);                      // in_b
  for (int layer = 0; layer < 2; ++layer) {
    Mat wx(4 * H, H), wh(4 * H, H);
    for (int g = 0; g < 4; ++g) {
      wx.middleRows(g * H, H) = orthogonal(H, H, 1.0, rng);
      wh.middleRows(g * H, H) = orthogonal(H, H, 1.0, rng);
    }
    put_m(wx);
    put_m(wh);
    // biases zero except forget gate at +1
    std::fill(p, p + 4 * H, 0.0);
    std::fill(p + H, p + 2 * H, 1.0);
    p += 4 * H;
  }
  Mat head(O, H);
  for (int i = 0; i < O; ++i)
    for (int j = 0; j < H; ++j) head(i, j) = rng.uniform(-0.01, 0.01);
  put_m(head);
  put_zero_v(O);  // head_b
}

NetHidden RecurrentNet::zero_hidden() const {
  NetHidden s;
  s.h1 = Vec::Zero(hidden_);
  s.c1 = Vec::Zero(hidden_);
  s.h2 = Vec::Zero(hidden_);
  s.c2 = Vec::Zero(hidden_);
  return s;
}

namespace {

struct LstmStepOut {
  Vec i, f, g, o, c, tc, h;
};

LstmStepOut lstm_step(const Eigen::Map<const Mat>& wx, const Eigen::Map<const Mat>& wh,
                      const Eigen::Map<const Vec>& b, const Vec& x, const Vec& h_prev,
                      const Vec& c_prev) {
  const int H = static_cast<int>(h_prev.size());
  const Vec z = wx * x + wh * h_prev + b;
  LstmStepOut s;
  s.i = z.head(H).unaryExpr([](double v) { return sigmoid(v); });
  s.f = z.segment(H, H).unaryExpr([](double v) { return sigmoid(v); });
  s.g = z.segment(2 * H, H).array().tanh();
  s.o = z.tail(H).unaryExpr([](double v) { return sigmoid(v); });
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tc = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tc);
  return s;
}

}  // namespace

Vec RecurrentNet::forward(const Vec& input, NetHidden& state) const {
  Tape scratch;
  return forward(input, state, scratch);
}

Vec RecurrentNet::forward(const Vec& input, NetHidden& state, Tape& tape) const {
  if (input.size() != in_) throw ConfigError("observation size mismatch in net forward");
  const View v = view(theta_);

  StepCache cache;
  cache.input = input;
  cache.x1 = (v.in_w * input + v.in_b).array().tanh();

  cache.h1_prev = state.h1;
  cache.c1_prev = state.c1;
  LstmStepOut s1 = lstm_step(v.l1_wx, v.l1_wh, v.l1_b, cache.x1, state.h1, state.c1);
  cache.i1 = s1.i; cache.f1 = s1.f; cache.g1 = s1.g; cache.o1 = s1.o;
  cache.c1 = s1.c; cache.tc1 = s1.tc;

  cache.h2_prev = state.h2;
  cache.c2_prev = state.c2;
  LstmStepOut s2 = lstm_step(v.l2_wx, v.l2_wh, v.l2_b, s1.h, state.h2, state.c2);
  cache.i2 = s2.i; cache.f2 = s2.f; cache.g2 = s2.g; cache.o2 = s2.o;
  cache.c2 = s2.c; cache.tc2 = s2.tc;

  state.h1 = s1.h;
  state.c1 = s1.c;
  state.h2 = s2.h;
  state.c2 = s2.c;

  Vec out = v.head_w * s2.h + v.head_b;
  if (!out.allFinite()) throw NumericError("non-finite network output");
  tape.steps.push_back(std::move(cache));
  return out;
}

void RecurrentNet::backward(const Tape& tape, const std::vector<Vec>& d_outputs, Vec& grad) const {
  if (grad.size() != theta_.size()) throw ConfigError("gradient buffer size mismatch");
  if (tape.steps.size() != d_outputs.size())
    throw ConfigError("tape and output-gradient lengths differ");
  const int H = hidden_;
  const View v = view(theta_);

  // mutable gradient views over the same layout
  double* p = grad.data();
  auto g_m = [&p](int r, int c) {
    Eigen::Map<Mat> m(p, r, c);
    p += static_cast<std::ptrdiff_t>(r) * c;
    return m;
  };
  auto g_v = [&p](int n) {
    Eigen::Map<Vec> m(p, n);
    p += n;
    return m;
  };
  auto d_in_w = g_m(H, in_);
  auto d_in_b = g_v(H);
  auto d_l1_wx = g_m(4 * H, H);
  auto d_l1_wh = g_m(4 * H, H);
  auto d_l1_b = g_v(4 * H);
  auto d_l2_wx = g_m(4 * H, H);
  auto d_l2_wh = g_m(4 * H, H);
  auto d_l2_b = g_v(4 * H);
  auto d_head_w = g_m(out_, H);
  auto d_head_b = g_v(out_);

  Vec dh1 = Vec::Zero(H), dc1 = Vec::Zero(H), dh2 = Vec::Zero(H), dc2 = Vec::Zero(H);
  Vec one = Vec::Ones(H);

  for (long t = static_cast<long>(tape.steps.size()) - 1; t >= 0; --t) {
    const StepCache& s = tape.steps[static_cast<std::size_t>(t)];
    const Vec& dout = d_outputs[static_cast<std::size_t>(t)];

    const Vec h2 = s.o2.cwiseProduct(s.tc2);
    d_head_w.noalias() += dout * h2.transpose();
    d_head_b += dout;
    dh2.noalias() += v.head_w.transpose() * dout;

    // layer 2 cell backward
    Vec do2 = dh2.cwiseProduct(s.tc2);
    Vec dc = dh2.cwiseProduct(s.o2).cwiseProduct(one - s.tc2.cwiseProduct(s.tc2)) + dc2;
    Vec dzi = dc.cwiseProduct(s.g2).cwiseProduct(s.i2).cwiseProduct(one - s.i2);
    Vec dzf = dc.cwiseProduct(s.c2_prev).cwiseProduct(s.f2).cwiseProduct(one - s.f2);
    Vec dzg = dc.cwiseProduct(s.i2).cwiseProduct(one - s.g2.cwiseProduct(s.g2));
    Vec dzo = do2.cwiseProduct(s.o2).cwiseProduct(one - s.o2);
    dc2 = dc.cwiseProduct(s.f2);
    Vec dz2(4 * H);
    dz2 << dzi, dzf, dzg, dzo;
    const Vec h1 = s.o1.cwiseProduct(s.tc1);
    d_l2_wx.noalias() += dz2 * h1.transpose();
    d_l2_wh.noalias() += dz2 * s.h2_prev.transpose();
    d_l2_b += dz2;
    Vec dx2 = v.l2_wx.transpose() * dz2;  // gradient into h1 of this step
    dh2 = v.l2_wh.transpose() * dz2;      // into h2_{t-1}

    // layer 1 cell backward
    dh1 += dx2;
    Vec do1 = dh1.cwiseProduct(s.tc1);
    Vec dc1_full = dh1.cwiseProduct(s.o1).cwiseProduct(one - s.tc1.cwiseProduct(s.tc1)) + dc1;
    Vec dzi1 = dc1_full.cwiseProduct(s.g1).cwiseProduct(s.i1).cwiseProduct(one - s.i1);
    Vec dzf1 = dc1_full.cwiseProduct(s.c1_prev).cwiseProduct(s.f1).cwiseProduct(one - s.f1);
    Vec dzg1 = dc1_full.cwiseProduct(s.i1).cwiseProduct(one - s.g1.cwiseProduct(s.g1));
    Vec dzo1 = do1.cwiseProduct(s.o1).cwiseProduct(one - s.o1);
    dc1 = dc1_full.cwiseProduct(s.f1);
    Vec dz1(4 * H);
    dz1 << dzi1, dzf1, dzg1, dzo1;
    d_l1_wx.noalias() += dz1 * s.x1.transpose();
    d_l1_wh.noalias() += dz1 * s.h1_prev.transpose();
    d_l1_b += dz1;
    Vec dx1 = v.l1_wx.transpose() * dz1;
    dh1 = v.l1_wh.transpose() * dz1;

    // input projection
    Vec dpre = dx1.cwiseProduct(one - s.x1.cwiseProduct(s.x1));
    d_in_w.noalias() += dpre * s.input.transpose();
    d_in_b += dpre;
  }

  if (!grad.allFinite()) throw NumericError("non-finite gradient");
}

// ---------------------------------------------------------------------------
// ActorCritic

ActorCritic::ActorCritic(int obs_size, int hidden_size, int n_fert, int n_measure)
    : obs_size_(obs_size),
      hidden_size_(hidden_size),
      n_fert_(n_fert),
      n_measure_(n_measure),
      actor_(obs_size, hidden_size, n_fert + n_measure),
      critic_(obs_size, hidden_size, 1) {
  if (n_fert < 2 || n_measure < 0) throw ConfigError("bad action head sizes");
}

void ActorCritic::init_weights(std::uint64_t seed) {
  Rng actor_rng = Rng::derive(seed, 0xAC7011);
  Rng critic_rng = Rng::derive(seed, 0xC111C);
  actor_.init_weights(actor_rng);
  critic_.init_weights(critic_rng);
  // Measure-by-default prior: with zero bias a costless measure head receives
  // no gradient at all and its masks stay a coin flip, which starves the rest
  // of the network of stable observations. Costs still prune flags, in cost
  // order; free measuring simply stays on.
  if (n_measure_ > 0) {
    Vec& theta = actor_.params();
    theta.tail(n_measure_).array() += 2.0;  // head bias is the parameter tail
  }
}

AcHidden ActorCritic::zero_hidden() const {
  return AcHidden{actor_.zero_hidden(), critic_.zero_hidden()};
}

PolicyOutput ActorCritic::split_actor_output(const Vec& actor_out, double value) const {
  PolicyOutput out;
  out.fert_logits = actor_out.head(n_fert_);
  out.measure_logits = n_measure_ > 0 ? Vec(actor_out.tail(n_measure_)) : Vec();
  out.value = value;
  return out;
}

PolicyOutput ActorCritic::forward(const Vec& obs, AcHidden& state) const {
  const Vec a = actor_.forward(obs, state.actor);
  const Vec v = critic_.forward(obs, state.critic);
  return split_actor_output(a, v(0));
}

// ---------------------------------------------------------------------------
// distributions

ActionSample sample_action(const PolicyOutput& out, Rng& rng) {
  ActionSample s;
  const Vec p = softmax(out.fert_logits);
  const double u = rng.uniform();
  double acc = 0.0;
  int idx = static_cast<int>(p.size()) - 1;
  for (int k = 0; k < p.size(); ++k) {
    acc += p(k);
    if (u < acc) {
      idx = k;
      break;
    }
  }
  s.action.fert_index = idx;
  s.action.measure_mask.fill(0);
  for (int i = 0; i < out.measure_logits.size(); ++i) {
    const double prob = sigmoid(out.measure_logits(i));
    s.action.measure_mask[static_cast<std::size_t>(i)] = rng.uniform() < prob ? 1 : 0;
  }
  log_prob_and_entropy(out, s.action, &s.log_prob, &s.entropy);
  return s;
}

AgentAction greedy_action(const PolicyOutput& out) {
  AgentAction a;
  out.fert_logits.maxCoeff(&a.fert_index);
  a.measure_mask.fill(0);
  for (int i = 0; i < out.measure_logits.size(); ++i)
    a.measure_mask[static_cast<std::size_t>(i)] = out.measure_logits(i) > 0.0 ? 1 : 0;
  return a;
}

void log_prob_and_entropy(const PolicyOutput& out, const AgentAction& action, double* log_prob,
                          double* entropy) {
  const Vec& logits = out.fert_logits;
  if (action.fert_index < 0 || action.fert_index >= logits.size())
    throw ConfigError("action fert_index out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  double lp = logits(action.fert_index) - lse;

  const Vec p = softmax(logits);
  double ent = 0.0;
  for (int k = 0; k < logits.size(); ++k) {
    const double lpk = logits(k) - lse;
    ent -= p(k) * lpk;
  }

  for (int i = 0; i < out.measure_logits.size(); ++i) {
    const double l = out.measure_logits(i);
    const bool on = action.measure_mask[static_cast<std::size_t>(i)] != 0;
    lp += on ? log_sigmoid(l) : log_sigmoid(-l);
    const double q = sigmoid(l);
    // binary entropy, safe at the saturated ends
    ent -= q * log_sigmoid(l) + (1.0 - q) * log_sigmoid(-l);
  }
  if (log_prob) *log_prob = lp;
  if (entropy) *entropy = ent;
}

void action_dist_grads(const PolicyOutput& out, const AgentAction& action, double coeff_logp,
                       double coeff_ent, Vec& d_fert_logits, Vec& d_measure_logits) {
  const Vec p = softmax(out.fert_logits);
  const double m = out.fert_logits.maxCoeff();
  const double lse = m + std::log((out.fert_logits.array() - m).exp().sum());

  // d(logp)/dz_k = onehot_k - p_k ; d(H)/dz_k = -p_k (log p_k + H)
  double h_cat = 0.0;
  for (int k = 0; k < p.size(); ++k) h_cat -= p(k) * (out.fert_logits(k) - lse);
  d_fert_logits = -coeff_logp * p;
  d_fert_logits(action.fert_index) += coeff_logp;
  for (int k = 0; k < p.size(); ++k)
    d_fert_logits(k) += coeff_ent * (-p(k) * ((out.fert_logits(k) - lse) + h_cat));

  d_measure_logits = Vec::Zero(out.measure_logits.size());
  for (int i = 0; i < out.measure_logits.size(); ++i) {
    const double l = out.measure_logits(i);
    const double q = sigmoid(l);
    const double a = action.measure_mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    // d(logp)/dl = a - q ; d(H)/dl = -q (1-q) l
    d_measure_logits(i) = coeff_logp * (a - q) + coeff_ent * (-q * (1.0 - q) * l);
  }
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(long n, double lr, double beta1, double beta2, double eps)
    : m_(Vec::Zero(n)), v_(Vec::Zero(n)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Vec& theta, const Vec& grad) {
  if (theta.size() != m_.size() || grad.size() != m_.size())
    throw ConfigError("adam size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const Vec denom = (v_ / bc2).cwiseSqrt() + Vec::Constant(m_.size(), eps_);
  theta -= (lr_ / bc1) * m_.cwiseQuotient(denom);
}

// ---------------------------------------------------------------------------
// checkpoint io: little-endian binary, json header, raw doubles, exact round-trip

namespace {
constexpr char kCkptMagic[8] = {'C', 'R', 'L', 'C', 'K', 'P', 'T', '1'};
}

void ActorCritic::save_checkpoint(const std::filesystem::path& path) const {
  nlohmann::ordered_json hdr;
  hdr["format"] = 1;
  hdr["obs_size"] = obs_size_;
  hdr["hidden_size"] = hidden_size_;
  hdr["n_fert"] = n_fert_;
  hdr["n_measure"] = n_measure_;
  hdr["actor_params"] = actor_.param_count();
  hdr["critic_params"] = critic_.param_count();
  const std::string header = hdr.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kCkptMagic, sizeof(kCkptMagic));
  const std::uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(actor_.params().data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(actor_.param_count())));
  out.write(reinterpret_cast<const char*>(critic_.params().data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(critic_.param_count())));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

ActorCritic ActorCritic::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw DataError("bad checkpoint magic: " + path.string());
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1u << 20)) throw DataError("bad checkpoint header: " + path.string());
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header parse: " + std::string(e.what()));
  }
  ActorCritic ac(hdr.at("obs_size").get<int>(), hdr.at("hidden_size").get<int>(),
                 hdr.at("n_fert").get<int>(), hdr.at("n_measure").get<int>());
  if (hdr.at("actor_params").get<long>() != ac.actor_.param_count() ||
      hdr.at("critic_params").get<long>() != ac.critic_.param_count())
    throw DataError("checkpoint parameter count mismatch");
  in.read(reinterpret_cast<char*>(ac.actor_.params().data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(ac.actor_.param_count())));
  in.read(reinterpret_cast<char*>(ac.critic_.params().data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(ac.critic_.param_count())));
  if (!in) throw DataError("truncated checkpoint: " + path.string());
  return ac;
}

}  // namespace croprl
