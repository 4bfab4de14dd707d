#include "dimabsa/encoder.hpp"

#include <cmath>

#include "dimabsa/rng.hpp"
#include "dimabsa/unicode.hpp"

namespace dimabsa::reg {

// ---------------------------------------------------------------------------
// HashTokenizer
// ---------------------------------------------------------------------------

uint64_t HashTokenizer::fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> HashTokenizer::tokenize(const std::string& text,
                                         int max_tokens) const {
  std::vector<int> ids;
  auto push = [&](std::string_view token) {
    if (static_cast<int>(ids.size()) < max_tokens) {
      ids.push_back(static_cast<int>(fnv1a(token) % vocab_size));
    }
  };

  size_t i = 0;
  size_t word_begin = std::string::npos;
  auto flush_word = [&](size_t end) {
    if (word_begin != std::string::npos) {
      push(std::string_view(text).substr(word_begin, end - word_begin));
      word_begin = std::string::npos;
    }
  };
  while (i < text.size()) {
    const size_t start = i;
    const uint32_t cp = next_codepoint(text, i);
    const bool is_word = cp < 0x80 && (std::isalnum(static_cast<int>(cp)) ||
                                       cp == '_' || cp == '\'');
    const bool is_space = cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r';
    if (is_word) {
      if (word_begin == std::string::npos) word_begin = start;
    } else {
      flush_word(start);
      if (!is_space) push(std::string_view(text).substr(start, i - start));
    }
  }
  flush_word(text.size());
  return ids;
}

// ---------------------------------------------------------------------------
// ToyEncoder
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = scale * rng.normal();
    }
  }
  return m;
}

Eigen::MatrixXd sinusoidal_posenc(int max_len, int dim) {
  Eigen::MatrixXd pe(max_len, dim);
  for (int t = 0; t < max_len; ++t) {
    for (int k = 0; k < dim; ++k) {
      const double rate = std::pow(10000.0, -2.0 * (k / 2) / dim);
      pe(t, k) = (k % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe * 0.1;
}

// Row-wise softmax; masked == true means the key is excluded.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd probs(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double mx = scores.row(r).maxCoeff();
    Eigen::ArrayXd e = (scores.row(r).array() - mx).exp();
    probs.row(r) = (e / e.sum()).matrix();
  }
  return probs;
}

}  // namespace

struct ToyEncoder::ToyState : TrainableEncoder::State {
  std::vector<int> ids;
  Eigen::MatrixXd x;      // T x d, embedded input (with position encodings)
  Eigen::MatrixXd q, k, v;
  Eigen::MatrixXd attn;   // T x T row-stochastic
};

ToyEncoder::ToyEncoder(const ToyEncoderConfig& config)
    : config_(config), tokenizer_{config.vocab_size} {
  Rng rng(mix_seed(config.seed, 0x70794e43));
  embedding_ = {"embedding",
                random_matrix(config.vocab_size, config.dim, 0.1, rng), {}};
  const double proj_scale = 0.3 / std::sqrt(static_cast<double>(config.dim));
  w_query_ = {"w_query", random_matrix(config.dim, config.dim, proj_scale, rng), {}};
  w_key_ = {"w_key", random_matrix(config.dim, config.dim, proj_scale, rng), {}};
  w_value_ = {"w_value", random_matrix(config.dim, config.dim, proj_scale, rng), {}};
  for (auto* p : parameters()) p->zero_grad();
  posenc_ = sinusoidal_posenc(config.max_seq_len, config.dim);
}

EncoderOutput ToyEncoder::run_forward(const std::vector<int>& ids,
                                      ToyState* state) const {
  if (ids.empty()) {
    throw Error("toy encoder: input produced no tokens");
  }
  const auto t_len = static_cast<Eigen::Index>(ids.size());
  const int d = config_.dim;

  Eigen::MatrixXd x(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    x.row(t) = embedding_.value.row(ids[t]) + posenc_.row(t);
  }

  const Eigen::MatrixXd q = x * w_query_.value;
  const Eigen::MatrixXd k = x * w_key_.value;
  const Eigen::MatrixXd v = x * w_value_.value;
  const Eigen::MatrixXd scores = q * k.transpose() / std::sqrt(double(d));
  const Eigen::MatrixXd attn = softmax_rows(scores);

  EncoderOutput out;
  out.hidden = x + attn * v;
  out.mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(t_len, true);

  if (state) {
    state->ids = ids;
    state->x = x;
    state->q = q;
    state->k = k;
    state->v = v;
    state->attn = attn;
  }
  return out;
}

EncoderOutput ToyEncoder::encode(const std::string& text) const {
  return run_forward(tokenizer_.tokenize(text, config_.max_seq_len), nullptr);
}

std::unique_ptr<TrainableEncoder::State> ToyEncoder::forward(
    const std::string& text, EncoderOutput& out) {
  auto state = std::make_unique<ToyState>();
  out = run_forward(tokenizer_.tokenize(text, config_.max_seq_len),
                    state.get());
  return state;
}

void ToyEncoder::backward(const State& state,
                          const Eigen::MatrixXd& d_hidden) {
  const auto& s = static_cast<const ToyState&>(state);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config_.dim));

  // hidden = x + attn * v
  Eigen::MatrixXd dx = d_hidden;
  const Eigen::MatrixXd& d_out = d_hidden;
  const Eigen::MatrixXd d_attn = d_out * s.v.transpose();
  const Eigen::MatrixXd dv = s.attn.transpose() * d_out;

  // softmax rows
  Eigen::MatrixXd d_scores(s.attn.rows(), s.attn.cols());
  for (Eigen::Index r = 0; r < s.attn.rows(); ++r) {
    const double dot = s.attn.row(r).dot(d_attn.row(r));
    d_scores.row(r) =
        (s.attn.row(r).array() * (d_attn.row(r).array() - dot)).matrix();
  }

  const Eigen::MatrixXd dq = d_scores * s.k * inv_sqrt_d;
  const Eigen::MatrixXd dk = d_scores.transpose() * s.q * inv_sqrt_d;

  dx += dq * w_query_.value.transpose();
  dx += dk * w_key_.value.transpose();
  dx += dv * w_value_.value.transpose();

  w_query_.grad += s.x.transpose() * dq;
  w_key_.grad += s.x.transpose() * dk;
  w_value_.grad += s.x.transpose() * dv;

  for (Eigen::Index t = 0; t < dx.rows(); ++t) {
    embedding_.grad.row(s.ids[t]) += dx.row(t);
  }
}

std::vector<ParamBlock*> ToyEncoder::parameters() {
  return {&embedding_, &w_query_, &w_key_, &w_value_};
}

}  // namespace dimabsa::reg
