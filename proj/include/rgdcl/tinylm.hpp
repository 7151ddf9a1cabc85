#pragma once

// A fixed-window feed-forward language model.
//
// The predictor sees the last `context_len` tokens of the history
// [PAD ... PAD, BOS, context..., target[0..t)], concatenates their
// embeddings x, applies one tanh hidden layer and a softmax over the
// vocabulary:
//   logits = b_out + W_out tanh(b_hidden + W_hidden x) [+ W_direct x]
// The optional direct term is the linear window-to-output connection of
// classic neural n-gram models. Everything is double precision and single-threaded per call;
// a const ModelState may be shared by any number of scoring threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rgdcl/error.hpp"
#include "rgdcl/rng.hpp"
#include "rgdcl/vocab.hpp"

namespace rgdcl {

class ModelState {
 public:
  ModelState() = default;

  /// All parameters zero; callers either hand-build weights or use init_model.
  ModelState(Vocab vocab, std::size_t context_len, std::size_t embed_dim, std::size_t hidden_dim,
             std::uint64_t seed, bool direct = false)
      : vocab_(std::move(vocab)),
        context_len_(context_len),
        embed_dim_(embed_dim),
        hidden_dim_(hidden_dim),
        seed_(seed),
        direct_(direct) {
    require(context_len_ > 0 && embed_dim_ > 0 && hidden_dim_ > 0, Errc::invalid_config,
            "model dimensions must be positive");
    require(vocab_.size() >= Vocab::reserved_count + 1, Errc::invalid_config,
            "vocabulary needs at least one content token");
    params_.assign(parameter_count(), 0.0);
  }

  const Vocab& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t context_len() const { return context_len_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t input_dim() const { return context_len_ * embed_dim_; }
  std::uint64_t seed() const { return seed_; }
  bool has_direct() const { return direct_; }

  std::size_t parameter_count() const {
    const std::size_t v = vocab_size();
    return v * embed_dim_ + input_dim() * hidden_dim_ + hidden_dim_ + hidden_dim_ * v + v +
           (direct_ ? input_dim() * v : 0);
  }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Row-major blocks inside the flat parameter vector.
  std::size_t embedding_offset() const { return 0; }
  std::size_t w_hidden_offset() const { return vocab_size() * embed_dim_; }
  std::size_t b_hidden_offset() const { return w_hidden_offset() + input_dim() * hidden_dim_; }
  std::size_t w_out_offset() const { return b_hidden_offset() + hidden_dim_; }
  std::size_t b_out_offset() const { return w_out_offset() + hidden_dim_ * vocab_size(); }
  std::size_t w_direct_offset() const { return b_out_offset() + vocab_size(); }

  /// |V| x embed_dim
  std::span<double> embedding() { return block(embedding_offset(), vocab_size() * embed_dim_); }
  /// (context_len * embed_dim) x hidden_dim
  std::span<double> w_hidden() { return block(w_hidden_offset(), input_dim() * hidden_dim_); }
  std::span<double> b_hidden() { return block(b_hidden_offset(), hidden_dim_); }
  /// hidden_dim x |V|
  std::span<double> w_out() { return block(w_out_offset(), hidden_dim_ * vocab_size()); }
  std::span<double> b_out() { return block(b_out_offset(), vocab_size()); }
  /// (context_len * embed_dim) x |V|; empty without direct connections
  std::span<double> w_direct() { return block(w_direct_offset(), direct_ ? input_dim() * vocab_size() : 0); }

  std::span<const double> embedding() const { return block(embedding_offset(), vocab_size() * embed_dim_); }
  std::span<const double> w_hidden() const { return block(w_hidden_offset(), input_dim() * hidden_dim_); }
  std::span<const double> b_hidden() const { return block(b_hidden_offset(), hidden_dim_); }
  std::span<const double> w_out() const { return block(w_out_offset(), hidden_dim_ * vocab_size()); }
  std::span<const double> b_out() const { return block(b_out_offset(), vocab_size()); }
  std::span<const double> w_direct() const {
    return block(w_direct_offset(), direct_ ? input_dim() * vocab_size() : 0);
  }

  bool all_finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double p) { return std::isfinite(p); });
  }

  friend bool operator==(const ModelState&, const ModelState&) = default;

 private:
  std::span<double> block(std::size_t off, std::size_t n) { return std::span<double>(params_).subspan(off, n); }
  std::span<const double> block(std::size_t off, std::size_t n) const {
    return std::span<const double>(params_).subspan(off, n);
  }

  Vocab vocab_;
  std::size_t context_len_ = 0;
  std::size_t embed_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  std::uint64_t seed_ = 0;
  bool direct_ = false;
  std::vector<double> params_;
};

/// Embeddings ~ U(-1, 1) (one-hot fan-in), hidden, output and direct
/// weights ~ U(+-1/sqrt(fan_in)), biases zero.
inline ModelState init_model(const Vocab& vocab, std::size_t context_len, std::size_t embed_dim,
                             std::size_t hidden_dim, std::uint64_t seed, bool direct = false) {
  ModelState m(vocab, context_len, embed_dim, hidden_dim, seed, direct);
  Rng rng(derive_seed(seed, "init"));
  for (double& p : m.embedding()) p = rng.symmetric(1.0);
  const double hidden_scale = 1.0 / std::sqrt(static_cast<double>(m.input_dim()));
  for (double& p : m.w_hidden()) p = rng.symmetric(hidden_scale);
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (double& p : m.w_out()) p = rng.symmetric(out_scale);
  for (double& p : m.w_direct()) p = rng.symmetric(hidden_scale);
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass

struct Activations {
  std::vector<double> input;
  std::vector<double> hidden;
  std::vector<double> logits;
};

/// `window` holds exactly context_len token ids.
inline void forward(const ModelState& m, std::span<const TokenId> window, Activations& act) {
  const std::size_t ctx = m.context_len();
  const std::size_t e = m.embed_dim();
  const std::size_t h = m.hidden_dim();
  const std::size_t v = m.vocab_size();
  act.input.resize(ctx * e);
  act.hidden.resize(h);
  act.logits.resize(v);

  const auto emb = m.embedding();
  for (std::size_t p = 0; p < ctx; ++p) {
    const auto id = static_cast<std::size_t>(window[p]);
    std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(id * e), e,
                act.input.begin() + static_cast<std::ptrdiff_t>(p * e));
  }

  const auto w1 = m.w_hidden();
  const auto b1 = m.b_hidden();
  std::copy(b1.begin(), b1.end(), act.hidden.begin());
  for (std::size_t i = 0; i < ctx * e; ++i) {
    const double xi = act.input[i];
    const double* row = w1.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) act.hidden[j] += xi * row[j];
  }
  for (double& a : act.hidden) a = std::tanh(a);

  const auto w2 = m.w_out();
  const auto b2 = m.b_out();
  std::copy(b2.begin(), b2.end(), act.logits.begin());
  for (std::size_t j = 0; j < h; ++j) {
    const double hj = act.hidden[j];
    const double* row = w2.data() + j * v;
    for (std::size_t k = 0; k < v; ++k) act.logits[k] += hj * row[k];
  }
  if (m.has_direct()) {
    const auto wd = m.w_direct();
    for (std::size_t i = 0; i < ctx * e; ++i) {
      const double xi = act.input[i];
      const double* row = wd.data() + i * v;
      for (std::size_t k = 0; k < v; ++k) act.logits[k] += xi * row[k];
    }
  }
}

inline double log_sum_exp(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// context_len PADs, BOS, then `context`. The window for the next token is
/// always the last context_len entries.
inline TokenIds padded_history(const ModelState& m, std::span<const TokenId> context) {
  TokenIds hist(m.context_len(), Vocab::pad);
  hist.push_back(Vocab::bos);
  hist.insert(hist.end(), context.begin(), context.end());
  return hist;
}

inline void check_ids(const ModelState& m, std::span<const TokenId> ids) {
  for (TokenId id : ids) {
    require(m.vocab().contains(id), Errc::invalid_token, "token id " + std::to_string(id) + " outside vocabulary");
  }
}

/// Next-token distribution after `context` (BOS is implicit).
inline std::vector<double> next_token_probs(const ModelState& m, std::span<const TokenId> context) {
  check_ids(m, context);
  const TokenIds hist = padded_history(m, context);
  Activations act;
  forward(m, std::span<const TokenId>(hist).last(m.context_len()), act);
  const double lse = log_sum_exp(act.logits);
  std::vector<double> p(act.logits.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(act.logits[k] - lse);
  return p;
}

// ---------------------------------------------------------------------------
// Likelihood

struct NllResult {
  double sum_nll = 0.0;  // nats
  std::size_t n_tokens = 0;
  std::vector<double> per_token;
};

inline NllResult sequence_nll(const ModelState& m, std::span<const TokenId> context, std::span<const TokenId> target) {
  require(!target.empty(), Errc::empty_target, "sequence_nll needs a nonempty target");
  check_ids(m, context);
  check_ids(m, target);

  TokenIds hist = padded_history(m, context);
  const std::size_t start = hist.size() - m.context_len();
  hist.insert(hist.end(), target.begin(), target.end());

  NllResult out;
  out.per_token.reserve(target.size());
  Activations act;
  for (std::size_t t = 0; t < target.size(); ++t) {
    forward(m, std::span<const TokenId>(hist).subspan(start + t, m.context_len()), act);
    const double nll = log_sum_exp(act.logits) - act.logits[static_cast<std::size_t>(target[t])];
    out.per_token.push_back(nll);
    out.sum_nll += nll;
  }
  out.n_tokens = target.size();
  return out;
}

/// exp of the mean per-token NLL.
inline double perplexity(const NllResult& nll) {
  require(nll.n_tokens >= 1, Errc::empty_target, "perplexity of zero tokens");
  return std::exp(nll.sum_nll / static_cast<double>(nll.n_tokens));
}

// ---------------------------------------------------------------------------
// Decoding

/// Greedy decoding; ties go to the lowest token id. EOS ends the
/// continuation and is not returned.
inline TokenIds generate(const ModelState& m, std::span<const TokenId> prompt, std::size_t max_len) {
  require(max_len >= 1, Errc::invalid_config, "max_len must be at least 1");
  check_ids(m, prompt);
  TokenIds hist = padded_history(m, prompt);
  TokenIds out;
  Activations act;
  while (out.size() < max_len) {
    forward(m, std::span<const TokenId>(hist).last(m.context_len()), act);
    std::size_t best = 0;
    for (std::size_t k = 1; k < act.logits.size(); ++k) {
      if (act.logits[k] > act.logits[best]) best = k;
    }
    const auto id = static_cast<TokenId>(best);
    if (id == Vocab::eos) break;
    out.push_back(id);
    hist.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainPair {
  TokenIds context;
  TokenIds target;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), Errc::invalid_config,
            "learning_rate must be positive");
    require(batch_size > 0, Errc::invalid_config, "batch_size must be positive");
    require(momentum >= 0.0 && momentum < 1.0, Errc::invalid_config, "momentum must be in [0, 1)");
  }
};

struct TrainResult {
  ModelState model;
  std::vector<double> loss_trace;  // per-epoch mean token NLL
};

namespace detail {

struct Backprop {
  Activations act;
  std::vector<double> dlogits;
  std::vector<double> dpre;
  std::vector<double> dinput;
};

/// Adds the gradient of the summed token NLL of `pair` into `grad` and
/// returns that summed NLL.
inline double accumulate_pair(const ModelState& m, const TrainPair& pair, std::span<double> grad, Backprop& bp) {
  const std::size_t ctx = m.context_len();
  const std::size_t e = m.embed_dim();
  const std::size_t h = m.hidden_dim();
  const std::size_t v = m.vocab_size();

  TokenIds hist = padded_history(m, pair.context);
  const std::size_t start = hist.size() - ctx;
  hist.insert(hist.end(), pair.target.begin(), pair.target.end());

  double* g_emb = grad.data() + m.embedding_offset();
  double* g_w1 = grad.data() + m.w_hidden_offset();
  double* g_b1 = grad.data() + m.b_hidden_offset();
  double* g_w2 = grad.data() + m.w_out_offset();
  double* g_b2 = grad.data() + m.b_out_offset();
  double* g_wd = grad.data() + m.w_direct_offset();
  const double* w1 = m.w_hidden().data();
  const double* w2 = m.w_out().data();
  const double* wd = m.w_direct().data();
  const bool direct = m.has_direct();

  bp.dlogits.resize(v);
  bp.dpre.resize(h);
  bp.dinput.resize(ctx * e);

  double total = 0.0;
  for (std::size_t t = 0; t < pair.target.size(); ++t) {
    const auto window = std::span<const TokenId>(hist).subspan(start + t, ctx);
    forward(m, window, bp.act);
    const double lse = log_sum_exp(bp.act.logits);
    const auto y = static_cast<std::size_t>(pair.target[t]);
    total += lse - bp.act.logits[y];

    for (std::size_t k = 0; k < v; ++k) bp.dlogits[k] = std::exp(bp.act.logits[k] - lse);
    bp.dlogits[y] -= 1.0;

    for (std::size_t k = 0; k < v; ++k) g_b2[k] += bp.dlogits[k];
    for (std::size_t j = 0; j < h; ++j) {
      const double hj = bp.act.hidden[j];
      const double* row = w2 + j * v;
      double* grow = g_w2 + j * v;
      double dh = 0.0;
      for (std::size_t k = 0; k < v; ++k) {
        grow[k] += hj * bp.dlogits[k];
        dh += row[k] * bp.dlogits[k];
      }
      bp.dpre[j] = dh * (1.0 - hj * hj);
      g_b1[j] += bp.dpre[j];
    }
    for (std::size_t i = 0; i < ctx * e; ++i) {
      const double xi = bp.act.input[i];
      const double* row = w1 + i * h;
      double* grow = g_w1 + i * h;
      double dx = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        grow[j] += xi * bp.dpre[j];
        dx += row[j] * bp.dpre[j];
      }
      if (direct) {
        const double* drow = wd + i * v;
        double* gdrow = g_wd + i * v;
        for (std::size_t k = 0; k < v; ++k) {
          gdrow[k] += xi * bp.dlogits[k];
          dx += drow[k] * bp.dlogits[k];
        }
      }
      bp.dinput[i] = dx;
    }
    for (std::size_t p = 0; p < ctx; ++p) {
      double* ge = g_emb + static_cast<std::size_t>(window[p]) * e;
      for (std::size_t d = 0; d < e; ++d) ge[d] += bp.dinput[p * e + d];
    }
  }
  return total;
}

}  // namespace detail

/// Gradient of the mean token NLL of one pair.
inline std::vector<double> mean_nll_gradient(const ModelState& m, const TrainPair& pair) {
  require(!pair.target.empty(), Errc::empty_target, "gradient of an empty target");
  check_ids(m, pair.context);
  check_ids(m, pair.target);
  std::vector<double> grad(m.parameter_count(), 0.0);
  detail::Backprop bp;
  detail::accumulate_pair(m, pair, grad, bp);
  const double inv = 1.0 / static_cast<double>(pair.target.size());
  for (double& g : grad) g *= inv;
  return grad;
}

/// Minibatch SGD with momentum on the mean token cross-entropy of each batch.
/// A non-finite epoch loss, or one beyond 50x the uniform-model loss, raises
/// a divergence error naming the epoch.
inline TrainResult train(ModelState model, std::span<const TrainPair> corpus, const TrainConfig& cfg) {
  cfg.validate();
  require(!corpus.empty(), Errc::invalid_config, "training corpus is empty");
  for (const auto& pair : corpus) {
    require(!pair.target.empty(), Errc::empty_target, "training pair with empty target");
    check_ids(model, pair.context);
    check_ids(model, pair.target);
  }

  TrainResult result{std::move(model), {}};
  ModelState& m = result.model;
  const double loss_ceiling = 50.0 * std::log(static_cast<double>(m.vocab_size()));

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(m.parameter_count());
  std::vector<double> velocity(m.parameter_count(), 0.0);
  detail::Backprop bp;
  Rng rng(derive_seed(cfg.seed, "train-shuffle"));

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      std::size_t batch_tokens = 0;
      for (std::size_t i = b; i < end; ++i) {
        const TrainPair& pair = corpus[order[i]];
        epoch_loss += detail::accumulate_pair(m, pair, grad, bp);
        batch_tokens += pair.target.size();
      }
      epoch_tokens += batch_tokens;
      const double scale = cfg.learning_rate / static_cast<double>(batch_tokens);
      auto params = m.params();
      for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = cfg.momentum * velocity[k] - scale * grad[k];
        params[k] += velocity[k];
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(epoch_tokens);
    if (!std::isfinite(mean_loss) || mean_loss > loss_ceiling || !m.all_finite()) {
      fail(Errc::divergence, "training diverged in epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(mean_loss);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Numerical gradient check

inline constexpr std::size_t grad_check_samples = 64;

/// Indices of the parameters compared by grad_check: a fixed draw seeded from
/// the model seed.
inline std::vector<std::size_t> grad_check_indices(const ModelState& m) {
  Rng rng(derive_seed(m.seed(), "grad-check"));
  const std::size_t n = std::min(grad_check_samples, m.parameter_count());
  std::vector<std::size_t> all(m.parameter_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
  all.resize(n);
  return all;
}

inline double relative_gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-12);
}

/// Central finite differences of the mean NLL against the analytic gradient;
/// returns the largest relative error over grad_check_indices(model).
inline double grad_check(const ModelState& model, const TrainPair& pair, double epsilon) {
  require(epsilon >= 1e-8 && epsilon <= 1e-2, Errc::invalid_config, "grad_check epsilon must be in [1e-8, 1e-2]");
  const std::vector<double> analytic = mean_nll_gradient(model, pair);
  auto mean_nll = [&](const ModelState& m) {
    const NllResult r = sequence_nll(m, pair.context, pair.target);
    return r.sum_nll / static_cast<double>(r.n_tokens);
  };
  ModelState probe = model;
  double worst = 0.0;
  for (std::size_t idx : grad_check_indices(model)) {
    const double saved = probe.params()[idx];
    probe.params()[idx] = saved + epsilon;
    const double up = mean_nll(probe);
    probe.params()[idx] = saved - epsilon;
    const double down = mean_nll(probe);
    probe.params()[idx] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    worst = std::max(worst, relative_gradient_error(analytic[idx], numeric));
  }
  return worst;
}

}  // namespace rgdcl
