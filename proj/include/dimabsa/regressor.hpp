#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dimabsa/core.hpp"
#include "dimabsa/dataio.hpp"
#include "dimabsa/encoder.hpp"

namespace dimabsa::reg {

// ---------------------------------------------------------------------------
// Input construction
// ---------------------------------------------------------------------------

inline constexpr const char* kDefaultInputTemplate =
    "Aspect: {aspect}. Sentence: {sentence}.";
inline constexpr const char* kDefaultNullSurface = "overall";

/// Substitutes {aspect} and {sentence} into the template. The NULL sentinel
/// renders as null_surface. Throws FormatError if a placeholder is missing
/// or the sentence is empty.
std::string build_input(const Term& aspect, const std::string& sentence,
                        const std::string& tmpl = kDefaultInputTemplate,
                        const std::string& null_surface = kDefaultNullSurface);

// ---------------------------------------------------------------------------
// Pooling and heads
// ---------------------------------------------------------------------------

struct PoolingParams {
  Eigen::VectorXd w;  // trainable scoring vector, length d
};

/// z = sum_t alpha_t h_t with alpha = softmax over unmasked scores w.h_t.
/// Masked positions receive zero weight. Throws Error on all-masked input.
/// alpha_out, when given, receives the attention weights (zeros at masked
/// positions).
Eigen::VectorXd attention_pool(const EncoderOutput& out,
                               const Eigen::VectorXd& w,
                               Eigen::VectorXd* alpha_out = nullptr);
inline Eigen::VectorXd attention_pool(const EncoderOutput& out,
                                      const PoolingParams& p) {
  return attention_pool(out, p.w);
}

struct RegressionHeads {
  Eigen::VectorXd w_v;  // d
  Eigen::VectorXd w_a;  // d
  double b_v = 0.0;
  double b_a = 0.0;
};

/// Two affine scalar outputs in normalized space, unclipped.
std::pair<double, double> predict_va(const Eigen::VectorXd& z,
                                     const RegressionHeads& heads);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossConfig {
  double gamma = 0.3;      // MSE vs (1 - CCC) trade-off inside the base loss
  double beta = 0.05;      // base loss vs triplet regularizer
  double lambda_v = 0.3;   // CCC aggregation weights
  double lambda_a = 0.7;
  double margin = 0.2;     // triplet hinge margin
  double pos_radius = 0.1; // VA-space distance thresholds for triplet sampling
  double neg_radius = 0.4;

  void validate() const;
};

/// (1/B) sum_i ||pred_i - target_i||^2 — the per-instance term sums over the
/// two dimensions. preds and targets are B x 2. Throws StatError on an empty
/// batch or shape mismatch.
double mse_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets);

/// 1 - (lambda_v CCC_v + lambda_a CCC_a) over the minibatch columns.
/// Throws StatError for batches smaller than 2.
double ccc_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets,
                const LossConfig& cfg);

struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;
};

/// For each anchor with at least one positive (target distance <=
/// pos_radius) and one negative (distance > neg_radius, ties excluded),
/// samples one (p, n) pair uniformly. Deterministic under seed; an empty
/// result is valid. targets is B x 2 in normalized VA space; needs B >= 3.
std::vector<Triplet> sample_triplets(const Eigen::MatrixXd& targets,
                                     const LossConfig& cfg, uint64_t seed);

/// Mean hinge max(0, ||z_a - z_p|| - ||z_a - z_n|| + m) over the triples;
/// 0 for an empty set. Embeddings are detached: this term never contributes
/// gradients.
double triplet_loss(const Eigen::MatrixXd& embeddings,
                    const std::vector<Triplet>& triples, double margin);

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double ccc_term = 0.0;  // 1 - weighted CCC
  double triplet = 0.0;
};

/// (1-beta) * (gamma * MSE + (1-gamma) * ccc_term) + beta * triplet.
LossBreakdown total_loss(const Eigen::MatrixXd& preds,
                         const Eigen::MatrixXd& targets,
                         const Eigen::MatrixXd& embeddings,
                         const std::vector<Triplet>& triples,
                         const LossConfig& cfg);

/// Analytic d(total)/d(preds). The triplet term is computed on detached
/// embeddings, so its path contributes nothing here.
Eigen::MatrixXd loss_grad_preds(const Eigen::MatrixXd& preds,
                                const Eigen::MatrixXd& targets,
                                const LossConfig& cfg);

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 2e-5;
  int batch_size = 16;
  double dropout = 0.3;
  double warmup_ratio = 0.1;
  double plateau_factor = 0.5;
  int plateau_patience = 2;
  int early_stop_patience = 5;
  int max_epochs = 30;
  int max_seq_len = 128;
  double weight_decay = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

/// Step-wise linear warmup over the first warmup_ratio of all steps,
/// composed multiplicatively with an epoch-wise reduce-on-plateau factor
/// driven by validation RMSE_VA.
class LrSchedule {
 public:
  LrSchedule(const TrainConfig& cfg, long total_steps);

  /// Advances the step counter and returns the multiplier for this step.
  double on_step();

  /// Feeds one validation epoch's RMSE_VA; halves the plateau factor after
  /// plateau_patience consecutive non-improving epochs.
  void on_epoch_end(double val_rmse_va);

  /// Current multiplier without advancing.
  double multiplier() const;

  long step_count() const { return step_; }

 private:
  double warmup_component() const;

  double plateau_factor_;
  int patience_;
  long warmup_steps_ = 0;
  long step_ = 0;
  double plateau_ = 1.0;
  double best_ = 0.0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

// ---------------------------------------------------------------------------
// Model, trainer, inference
// ---------------------------------------------------------------------------

/// All trainable state, bundled for the optimizer and for gradient checks.
struct ModelParams {
  std::shared_ptr<TrainableEncoder> encoder;
  ParamBlock pool_w;   // d x 1
  ParamBlock head_wv;  // d x 1
  ParamBlock head_wa;  // d x 1
  ParamBlock head_bv;  // 1 x 1
  ParamBlock head_ba;  // 1 x 1

  static ModelParams init(std::shared_ptr<TrainableEncoder> encoder,
                          uint64_t seed);

  std::vector<ParamBlock*> all();
  PoolingParams pooling() const { return {pool_w.value.col(0)}; }
  RegressionHeads heads() const {
    return {head_wv.value.col(0), head_wa.value.col(0), head_bv.value(0, 0),
            head_ba.value(0, 0)};
  }
};

struct BatchEval {
  LossBreakdown loss;
  Eigen::MatrixXd preds;  // B x 2, normalized space
};

/// Forward (and optionally backward) over one prepared batch. Gradients
/// accumulate into the ParamBlocks; call zero_grad on them first. Dropout is
/// applied to the pooled representation; dropout_prob 0 disables it. The
/// triplet term is evaluated on detached pre-dropout embeddings and never
/// produces gradients.
BatchEval evaluate_batch(ModelParams& params,
                         const std::vector<std::string>& inputs,
                         const Eigen::MatrixXd& targets,
                         const LossConfig& loss_cfg, double dropout_prob,
                         uint64_t dropout_seed, uint64_t triplet_seed,
                         bool compute_grads);

/// Trained model: encoder + pooling + heads + the input template they were
/// trained with.
struct VaRegressor {
  std::shared_ptr<Encoder> encoder;
  PoolingParams pooling;
  RegressionHeads heads;
  std::string input_template = kDefaultInputTemplate;
  std::string null_surface = kDefaultNullSurface;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_rmse_va = 0.0;
  double lr_multiplier = 0.0;
};

struct TrainResult {
  VaRegressor model;
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_rmse = 0.0;
};

/// Full training loop: AdamW, warmup + reduce-on-plateau, early stopping on
/// validation RMSE_VA (computed in the denormalized [1, 9] space), best-on-
/// validation parameters returned. Deterministic given cfg.seed. Throws
/// Error on divergence (non-finite loss). The input template is used for
/// both training and validation and travels with the returned model.
TrainResult train(const std::vector<io::RegressionExample>& train_rows,
                  const std::vector<io::RegressionExample>& val_rows,
                  std::shared_ptr<TrainableEncoder> encoder,
                  const TrainConfig& cfg, const LossConfig& loss_cfg,
                  const std::string& input_template = kDefaultInputTemplate,
                  const std::string& null_surface = kDefaultNullSurface);

/// build_input -> encode -> pool -> heads -> denormalize_clip per example.
std::vector<VAPair> predict(const VaRegressor& model,
                            const std::vector<io::RegressionExample>& examples);

/// Predict in normalized space without clipping (diagnostics).
std::pair<double, double> predict_normalized(const VaRegressor& model,
                                             const std::string& input);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Self-describing JSON checkpoint: config, tokenizer spec, named tensors.
/// Only toy-encoder models are serializable; adapters live outside.
void save_checkpoint(const VaRegressor& model, const std::string& path);
VaRegressor load_checkpoint(const std::string& path);

std::string history_to_tsv(const std::vector<EpochStats>& history);

}  // namespace dimabsa::reg
