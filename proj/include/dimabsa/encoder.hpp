#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dimabsa/core.hpp"

namespace dimabsa::reg {

/// Per-token hidden states plus the padding mask (true = real token).
struct EncoderOutput {
  Eigen::MatrixXd hidden;              // T x d
  Eigen::Array<bool, Eigen::Dynamic, 1> mask;
};

/// The pluggable encoder seam. Anything that can turn text into per-token
/// representations can sit behind the regression head: the toy encoder
/// below for desk-scale runs, or an adapter over an external pretrained
/// backbone for integration runs.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual int width() const = 0;
  virtual EncoderOutput encode(const std::string& text) const = 0;
};

/// A named trainable tensor with its gradient accumulator.
struct ParamBlock {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// An encoder the trainer can backpropagate through.
class TrainableEncoder : public Encoder {
 public:
  /// Opaque per-example forward cache consumed by backward().
  struct State {
    virtual ~State() = default;
  };

  virtual std::unique_ptr<State> forward(const std::string& text,
                                         EncoderOutput& out) = 0;
  /// Accumulates parameter gradients given dL/d(hidden). Must be called with
  /// the State produced by the matching forward().
  virtual void backward(const State& state,
                        const Eigen::MatrixXd& d_hidden) = 0;
  virtual std::vector<ParamBlock*> parameters() = 0;
};

// ---------------------------------------------------------------------------
// Hash tokenizer
// ---------------------------------------------------------------------------

/// Whitespace/codepoint hybrid tokenizer with a fixed hash vocabulary:
/// ASCII alphanumeric runs become word tokens, every other non-space
/// codepoint stands alone (so CJK text tokenizes per character). Token ids
/// are FNV-1a hashes modulo the vocabulary size.
struct HashTokenizer {
  uint32_t vocab_size = 2048;

  std::vector<int> tokenize(const std::string& text, int max_tokens) const;
  static uint64_t fnv1a(std::string_view s);
};

// ---------------------------------------------------------------------------
// Toy encoder
// ---------------------------------------------------------------------------

struct ToyEncoderConfig {
  uint32_t vocab_size = 2048;
  int dim = 32;
  int max_seq_len = 128;
  uint64_t seed = 1;
};

/// Deterministic trainable encoder: embedding table plus one residual
/// self-attention block, with fixed sinusoidal position encodings. Small
/// enough to make every downstream equation testable without accelerators.
class ToyEncoder : public TrainableEncoder {
 public:
  explicit ToyEncoder(const ToyEncoderConfig& config);

  int width() const override { return config_.dim; }
  EncoderOutput encode(const std::string& text) const override;

  std::unique_ptr<State> forward(const std::string& text,
                                 EncoderOutput& out) override;
  void backward(const State& state, const Eigen::MatrixXd& d_hidden) override;
  std::vector<ParamBlock*> parameters() override;

  const ToyEncoderConfig& config() const { return config_; }
  const HashTokenizer& tokenizer() const { return tokenizer_; }

  ParamBlock& embedding() { return embedding_; }
  ParamBlock& w_query() { return w_query_; }
  ParamBlock& w_key() { return w_key_; }
  ParamBlock& w_value() { return w_value_; }

 private:
  struct ToyState;

  EncoderOutput run_forward(const std::vector<int>& ids,
                            ToyState* state) const;

  ToyEncoderConfig config_;
  HashTokenizer tokenizer_;
  ParamBlock embedding_;  // V x d
  ParamBlock w_query_;    // d x d
  ParamBlock w_key_;      // d x d
  ParamBlock w_value_;    // d x d
  Eigen::MatrixXd posenc_;  // max_seq_len x d, fixed
};

}  // namespace dimabsa::reg
