#include "dimabsa/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dimabsa/metrics.hpp"
#include "dimabsa/rng.hpp"

namespace dimabsa::reg {

// ---------------------------------------------------------------------------
// Input construction
// ---------------------------------------------------------------------------

std::string build_input(const Term& aspect, const std::string& sentence,
                        const std::string& tmpl,
                        const std::string& null_surface) {
  if (sentence.empty()) {
    throw FormatError("build_input: empty sentence");
  }
  const auto apos = tmpl.find("{aspect}");
  const auto spos = tmpl.find("{sentence}");
  if (apos == std::string::npos || spos == std::string::npos) {
    throw FormatError(
        "build_input: template must contain {aspect} and {sentence}");
  }
  std::string out = tmpl;
  const std::string surface = aspect ? *aspect : null_surface;
  out.replace(out.find("{aspect}"), 8, surface);
  out.replace(out.find("{sentence}"), 10, sentence);
  return out;
}

// ---------------------------------------------------------------------------
// Pooling and heads
// ---------------------------------------------------------------------------

Eigen::VectorXd attention_pool(const EncoderOutput& out,
                               const Eigen::VectorXd& w,
                               Eigen::VectorXd* alpha_out) {
  const Eigen::Index t_len = out.hidden.rows();
  if (out.mask.size() != t_len) {
    throw InvariantError("attention_pool: mask/hidden length mismatch");
  }
  if (w.size() != out.hidden.cols()) {
    throw InvariantError("attention_pool: scoring vector width mismatch");
  }
  if (!out.mask.any()) {
    throw Error("attention_pool: all positions are masked");
  }

  // Padding positions are excluded before normalization.
  const Eigen::VectorXd scores = out.hidden * w;
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (out.mask(t)) mx = std::max(mx, scores(t));
  }
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(t_len);
  double denom = 0.0;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (out.mask(t)) {
      alpha(t) = std::exp(scores(t) - mx);
      denom += alpha(t);
    }
  }
  alpha /= denom;
  if (alpha_out) *alpha_out = alpha;
  return out.hidden.transpose() * alpha;
}

std::pair<double, double> predict_va(const Eigen::VectorXd& z,
                                     const RegressionHeads& heads) {
  if (heads.w_v.size() != z.size() || heads.w_a.size() != z.size()) {
    throw InvariantError("predict_va: head width mismatch");
  }
  return {heads.w_v.dot(z) + heads.b_v, heads.w_a.dot(z) + heads.b_a};
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

void LossConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0) throw RangeError("gamma must be in [0, 1]");
  if (beta < 0.0 || beta > 1.0) throw RangeError("beta must be in [0, 1]");
  if (lambda_v < 0.0 || lambda_a < 0.0) throw RangeError("lambdas must be >= 0");
  if (margin <= 0.0) throw RangeError("margin must be > 0");
  if (pos_radius <= 0.0 || neg_radius <= 0.0) {
    throw RangeError("triplet radii must be > 0");
  }
  if (pos_radius >= neg_radius) {
    throw RangeError("pos_radius must be smaller than neg_radius");
  }
}

namespace {

void check_batch(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets,
                 Eigen::Index min_rows, const char* who) {
  if (preds.rows() != targets.rows() || preds.cols() != 2 ||
      targets.cols() != 2) {
    throw StatError(std::string(who) + ": expected matching B x 2 matrices");
  }
  if (preds.rows() < min_rows) {
    throw StatError(std::string(who) + ": batch of " +
                    std::to_string(preds.rows()) + " is below the minimum " +
                    std::to_string(min_rows));
  }
}

// Population CCC of one dimension plus its gradient w.r.t. the predictions.
struct CccWithGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

CccWithGrad ccc_column(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(x.size());
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::VectorXd xc = x.array() - mx;
  const Eigen::VectorXd yc = y.array() - my;
  const double cov = xc.dot(yc) / n;
  const double var_x = xc.squaredNorm() / n;
  const double var_y = yc.squaredNorm() / n;
  const double md = mx - my;
  const double denom = var_x + var_y + md * md;
  CccWithGrad out;
  out.grad = Eigen::VectorXd::Zero(x.size());
  if (denom == 0.0) return out;
  out.value = 2.0 * cov / denom;
  out.grad = (2.0 / (n * denom)) *
             (yc.array() - out.value * (xc.array() + md)).matrix();
  return out;
}

}  // namespace

double mse_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets) {
  check_batch(preds, targets, 1, "mse_loss");
  return (preds - targets).rowwise().squaredNorm().mean();
}

double ccc_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets,
                const LossConfig& cfg) {
  check_batch(preds, targets, 2, "ccc_loss");
  const double ccc_v = ccc_column(preds.col(0), targets.col(0)).value;
  const double ccc_a = ccc_column(preds.col(1), targets.col(1)).value;
  return 1.0 - (cfg.lambda_v * ccc_v + cfg.lambda_a * ccc_a);
}

std::vector<Triplet> sample_triplets(const Eigen::MatrixXd& targets,
                                     const LossConfig& cfg, uint64_t seed) {
  const Eigen::Index b = targets.rows();
  std::vector<Triplet> triples;
  if (b < 3) return triples;

  Rng rng(seed);
  std::vector<int> positives, negatives;
  for (Eigen::Index i = 0; i < b; ++i) {
    positives.clear();
    negatives.clear();
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j == i) continue;
      const double dist = (targets.row(i) - targets.row(j)).norm();
      // Boundary ties count as positives and never as negatives.
      if (dist <= cfg.pos_radius) {
        positives.push_back(static_cast<int>(j));
      } else if (dist > cfg.neg_radius) {
        negatives.push_back(static_cast<int>(j));
      }
    }
    if (positives.empty() || negatives.empty()) continue;
    const int p = positives[rng.bounded(positives.size())];
    const int n = negatives[rng.bounded(negatives.size())];
    triples.push_back({static_cast<int>(i), p, n});
  }
  return triples;
}

double triplet_loss(const Eigen::MatrixXd& embeddings,
                    const std::vector<Triplet>& triples, double margin) {
  if (triples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : triples) {
    if (t.anchor < 0 || t.anchor >= embeddings.rows() || t.positive < 0 ||
        t.positive >= embeddings.rows() || t.negative < 0 ||
        t.negative >= embeddings.rows()) {
      throw RangeError("triplet_loss: index outside the batch");
    }
    const double dp = (embeddings.row(t.anchor) - embeddings.row(t.positive)).norm();
    const double dn = (embeddings.row(t.anchor) - embeddings.row(t.negative)).norm();
    sum += std::max(0.0, dp - dn + margin);
  }
  return sum / static_cast<double>(triples.size());
}

LossBreakdown total_loss(const Eigen::MatrixXd& preds,
                         const Eigen::MatrixXd& targets,
                         const Eigen::MatrixXd& embeddings,
                         const std::vector<Triplet>& triples,
                         const LossConfig& cfg) {
  cfg.validate();
  check_batch(preds, targets, 2, "total_loss");
  LossBreakdown out;
  out.mse = mse_loss(preds, targets);
  out.ccc_term = ccc_loss(preds, targets, cfg);
  out.triplet = triplet_loss(embeddings, triples, cfg.margin);
  const double base = cfg.gamma * out.mse + (1.0 - cfg.gamma) * out.ccc_term;
  out.total = (1.0 - cfg.beta) * base + cfg.beta * out.triplet;
  return out;
}

Eigen::MatrixXd loss_grad_preds(const Eigen::MatrixXd& preds,
                                const Eigen::MatrixXd& targets,
                                const LossConfig& cfg) {
  check_batch(preds, targets, 2, "loss_grad_preds");
  const double b = static_cast<double>(preds.rows());
  Eigen::MatrixXd grad = (2.0 / b) * (preds - targets);  // d(MSE)/dpreds
  grad *= cfg.gamma;

  const double lambdas[2] = {cfg.lambda_v, cfg.lambda_a};
  for (int k = 0; k < 2; ++k) {
    const auto cg = ccc_column(preds.col(k), targets.col(k));
    // d(1 - sum lambda CCC)/dpreds
    grad.col(k) -= (1.0 - cfg.gamma) * lambdas[k] * cg.grad;
  }
  return (1.0 - cfg.beta) * grad;
}

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw RangeError("learning_rate must be > 0");
  if (batch_size < 2) throw RangeError("batch_size must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw RangeError("dropout must be in [0, 1)");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) {
    throw RangeError("warmup_ratio must be in [0, 1]");
  }
  if (plateau_factor <= 0.0 || plateau_factor > 1.0) {
    throw RangeError("plateau_factor must be in (0, 1]");
  }
  if (plateau_patience < 1) throw RangeError("plateau_patience must be >= 1");
  if (early_stop_patience < 1) throw RangeError("early_stop_patience must be >= 1");
  if (max_epochs < 0) throw RangeError("max_epochs must be >= 0");
  if (max_seq_len < 1) throw RangeError("max_seq_len must be >= 1");
  if (weight_decay < 0.0) throw RangeError("weight_decay must be >= 0");
}

LrSchedule::LrSchedule(const TrainConfig& cfg, long total_steps)
    : plateau_factor_(cfg.plateau_factor), patience_(cfg.plateau_patience) {
  if (total_steps < 0) throw RangeError("total_steps must be >= 0");
  warmup_steps_ = std::llround(cfg.warmup_ratio * static_cast<double>(total_steps));
}

double LrSchedule::warmup_component() const {
  if (warmup_steps_ <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(step_) /
                           static_cast<double>(warmup_steps_));
}

double LrSchedule::on_step() {
  ++step_;
  return multiplier();
}

double LrSchedule::multiplier() const {
  return warmup_component() * plateau_;
}

void LrSchedule::on_epoch_end(double val_rmse_va) {
  if (!has_best_ || val_rmse_va < best_) {
    best_ = val_rmse_va;
    has_best_ = true;
    bad_epochs_ = 0;
    return;
  }
  if (++bad_epochs_ >= patience_) {
    plateau_ *= plateau_factor_;
    bad_epochs_ = 0;
  }
}

// ---------------------------------------------------------------------------
// Parameters and batch evaluation
// ---------------------------------------------------------------------------

ModelParams ModelParams::init(std::shared_ptr<TrainableEncoder> encoder,
                              uint64_t seed) {
  if (!encoder) throw Error("ModelParams::init: null encoder");
  const int d = encoder->width();
  Rng rng(mix_seed(seed, 0x48454144));
  auto random_column = [&](const char* name) {
    Eigen::MatrixXd m(d, 1);
    for (int r = 0; r < d; ++r) m(r, 0) = 0.1 * rng.normal();
    return ParamBlock{name, std::move(m), {}};
  };
  ModelParams params;
  params.encoder = std::move(encoder);
  params.pool_w = random_column("pool_w");
  params.head_wv = random_column("head_wv");
  params.head_wa = random_column("head_wa");
  params.head_bv = {"head_bv", Eigen::MatrixXd::Zero(1, 1), {}};
  params.head_ba = {"head_ba", Eigen::MatrixXd::Zero(1, 1), {}};
  for (auto* p : params.all()) p->zero_grad();
  return params;
}

std::vector<ParamBlock*> ModelParams::all() {
  std::vector<ParamBlock*> blocks = encoder->parameters();
  blocks.push_back(&pool_w);
  blocks.push_back(&head_wv);
  blocks.push_back(&head_wa);
  blocks.push_back(&head_bv);
  blocks.push_back(&head_ba);
  return blocks;
}

BatchEval evaluate_batch(ModelParams& params,
                         const std::vector<std::string>& inputs,
                         const Eigen::MatrixXd& targets,
                         const LossConfig& loss_cfg, double dropout_prob,
                         uint64_t dropout_seed, uint64_t triplet_seed,
                         bool compute_grads) {
  const auto b = static_cast<Eigen::Index>(inputs.size());
  if (targets.rows() != b || targets.cols() != 2) {
    throw StatError("evaluate_batch: targets must be B x 2");
  }
  const int d = params.encoder->width();
  const Eigen::VectorXd w = params.pool_w.value.col(0);

  std::vector<std::unique_ptr<TrainableEncoder::State>> states(b);
  std::vector<EncoderOutput> outputs(b);
  std::vector<Eigen::VectorXd> alphas(b);
  Eigen::MatrixXd embeddings(b, d);       // pre-dropout pooled z
  Eigen::MatrixXd dropped(b, d);          // post-dropout input to the heads
  Eigen::MatrixXd keep_scale(b, d);       // inverted-dropout mask
  Eigen::MatrixXd preds(b, 2);

  Rng drop_rng(dropout_seed);
  const RegressionHeads heads = params.heads();
  for (Eigen::Index i = 0; i < b; ++i) {
    if (compute_grads) {
      states[i] = params.encoder->forward(inputs[i], outputs[i]);
    } else {
      outputs[i] = params.encoder->encode(inputs[i]);
    }
    const Eigen::VectorXd z = attention_pool(outputs[i], w, &alphas[i]);
    embeddings.row(i) = z.transpose();
    for (int k = 0; k < d; ++k) {
      keep_scale(i, k) =
          (dropout_prob > 0.0 && drop_rng.uniform() < dropout_prob)
              ? 0.0
              : 1.0 / (1.0 - dropout_prob);
    }
    dropped.row(i) = z.transpose().cwiseProduct(keep_scale.row(i));
    const auto [v, a] = predict_va(dropped.row(i).transpose(), heads);
    preds(i, 0) = v;
    preds(i, 1) = a;
  }

  const auto triples = sample_triplets(targets, loss_cfg, triplet_seed);
  BatchEval eval;
  eval.loss = total_loss(preds, targets, embeddings, triples, loss_cfg);
  eval.preds = preds;
  if (!compute_grads) return eval;

  const Eigen::MatrixXd d_preds = loss_grad_preds(preds, targets, loss_cfg);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double dv = d_preds(i, 0);
    const double da = d_preds(i, 1);
    const Eigen::VectorXd zd = dropped.row(i).transpose();
    params.head_wv.grad.col(0) += dv * zd;
    params.head_wa.grad.col(0) += da * zd;
    params.head_bv.grad(0, 0) += dv;
    params.head_ba.grad(0, 0) += da;

    Eigen::VectorXd dz = dv * heads.w_v + da * heads.w_a;
    dz = dz.cwiseProduct(keep_scale.row(i).transpose());

    // attention pooling backward
    const Eigen::MatrixXd& h = outputs[i].hidden;
    const Eigen::VectorXd& alpha = alphas[i];
    const Eigen::VectorXd d_alpha = h * dz;
    Eigen::MatrixXd dh = alpha * dz.transpose();
    const double dot = alpha.dot(d_alpha);
    const Eigen::VectorXd d_scores =
        (alpha.array() * (d_alpha.array() - dot)).matrix();
    params.pool_w.grad.col(0) += h.transpose() * d_scores;
    dh += d_scores * w.transpose();

    params.encoder->backward(*states[i], dh);
  }
  return eval;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

namespace {

class AdamW {
 public:
  AdamW(std::vector<ParamBlock*> params, double lr, double weight_decay)
      : params_(std::move(params)), lr_(lr), weight_decay_(weight_decay) {
    slots_.reserve(params_.size());
    for (auto* p : params_) {
      slots_.push_back({Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()),
                        Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols())});
    }
  }

  void step(double lr_multiplier) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    const double lr = lr_ * lr_multiplier;
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      auto& s = slots_[i];
      s.m = kBeta1 * s.m + (1.0 - kBeta1) * p.grad;
      s.v = kBeta2 * s.v + (1.0 - kBeta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          lr * ((s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + kEps));
      if (weight_decay_ > 0.0) {
        p.value.array() -= lr * weight_decay_ * p.value.array();
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  struct Slot {
    Eigen::MatrixXd m, v;
  };
  std::vector<ParamBlock*> params_;
  std::vector<Slot> slots_;
  double lr_;
  double weight_decay_;
  long t_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd normalized_targets(const std::vector<io::RegressionExample>& rows,
                                   const std::vector<size_t>& index) {
  Eigen::MatrixXd targets(index.size(), 2);
  for (size_t i = 0; i < index.size(); ++i) {
    const NormalizedVA nv = normalize_va(rows[index[i]].target);
    targets(static_cast<Eigen::Index>(i), 0) = nv.v;
    targets(static_cast<Eigen::Index>(i), 1) = nv.a;
  }
  return targets;
}

VaRegressor make_view(const std::shared_ptr<TrainableEncoder>& encoder,
                      const ModelParams& params,
                      const std::string& input_template,
                      const std::string& null_surface) {
  return {encoder, params.pooling(), params.heads(), input_template,
          null_surface};
}

double validation_rmse(const VaRegressor& model,
                       const std::vector<io::RegressionExample>& val_rows) {
  const auto preds = predict(model, val_rows);
  std::vector<VAPair> golds;
  golds.reserve(val_rows.size());
  for (const auto& row : val_rows) golds.push_back(row.target);
  return metrics::rmse_va(preds, golds);
}

}  // namespace

TrainResult train(const std::vector<io::RegressionExample>& train_rows,
                  const std::vector<io::RegressionExample>& val_rows,
                  std::shared_ptr<TrainableEncoder> encoder,
                  const TrainConfig& cfg, const LossConfig& loss_cfg,
                  const std::string& input_template,
                  const std::string& null_surface) {
  cfg.validate();
  loss_cfg.validate();
  if (train_rows.empty() || val_rows.empty()) {
    throw InvariantError("train: train and validation sets must be nonempty");
  }

  ModelParams params = ModelParams::init(encoder, cfg.seed);

  std::vector<std::string> inputs;
  inputs.reserve(train_rows.size());
  for (const auto& row : train_rows) {
    inputs.push_back(build_input(row.aspect, row.review_text, input_template,
                                 null_surface));
  }

  // Batches are fixed-size chunks with a trailing singleton folded into the
  // previous chunk, so the exact step count is known up front.
  const size_t n = train_rows.size();
  const size_t bs = static_cast<size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>(
      (n % bs == 1 && n > bs) ? n / bs : (n + bs - 1) / bs);
  LrSchedule schedule(cfg, cfg.max_epochs * steps_per_epoch);
  AdamW optimizer(params.all(), cfg.learning_rate, cfg.weight_decay);

  TrainResult result;
  result.model = make_view(encoder, params, input_template, null_surface);
  if (cfg.max_epochs == 0) return result;

  std::vector<Eigen::MatrixXd> best_values;
  double best_rmse = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  uint64_t batch_counter = 0;

  std::vector<size_t> order(train_rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x53480000u + epoch));
    shuffle_rng.shuffle(order);

    // Chunk into batches; a trailing singleton is folded into the previous
    // batch so every loss sees at least two instances.
    std::vector<std::pair<size_t, size_t>> batches;
    size_t begin = 0;
    while (begin < order.size()) {
      size_t end = std::min(order.size(), begin + cfg.batch_size);
      if (order.size() - end == 1) end = order.size();
      batches.emplace_back(begin, end);
      begin = end;
    }

    double epoch_loss = 0.0;
    double multiplier = schedule.multiplier();
    for (const auto& [lo, hi] : batches) {
      const std::vector<size_t> index(order.begin() + lo, order.begin() + hi);
      std::vector<std::string> batch_inputs;
      batch_inputs.reserve(index.size());
      for (const size_t i : index) batch_inputs.push_back(inputs[i]);
      const Eigen::MatrixXd targets = normalized_targets(train_rows, index);

      for (auto* p : params.all()) p->zero_grad();
      ++batch_counter;
      const BatchEval eval = evaluate_batch(
          params, batch_inputs, targets, loss_cfg, cfg.dropout,
          mix_seed(cfg.seed, 0xD0000000u + batch_counter),
          mix_seed(cfg.seed, 0x30000000u + batch_counter),
          /*compute_grads=*/true);
      if (!std::isfinite(eval.loss.total)) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                    " (diverged); lower the learning rate");
      }
      multiplier = schedule.on_step();
      optimizer.step(multiplier);
      epoch_loss += eval.loss.total * static_cast<double>(index.size());
    }
    epoch_loss /= static_cast<double>(train_rows.size());

    const double val_rmse = validation_rmse(
        make_view(encoder, params, input_template, null_surface), val_rows);
    schedule.on_epoch_end(val_rmse);
    result.history.push_back({epoch, epoch_loss, val_rmse, schedule.multiplier()});

    if (val_rmse < best_rmse) {
      best_rmse = val_rmse;
      result.best_epoch = epoch;
      result.best_val_rmse = val_rmse;
      best_values.clear();
      for (auto* p : params.all()) best_values.push_back(p->value);
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.early_stop_patience) {
      break;
    }
  }

  if (!best_values.empty()) {
    const auto blocks = params.all();
    for (size_t i = 0; i < blocks.size(); ++i) {
      blocks[i]->value = best_values[i];
    }
  }
  result.model = make_view(encoder, params, input_template, null_surface);
  return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

std::pair<double, double> predict_normalized(const VaRegressor& model,
                                             const std::string& input) {
  const EncoderOutput out = model.encoder->encode(input);
  const Eigen::VectorXd z = attention_pool(out, model.pooling.w);
  return predict_va(z, model.heads);
}

std::vector<VAPair> predict(const VaRegressor& model,
                            const std::vector<io::RegressionExample>& examples) {
  std::vector<VAPair> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const std::string input = build_input(ex.aspect, ex.review_text,
                                          model.input_template,
                                          model.null_surface);
    const auto [v, a] = predict_normalized(model, input);
    out.push_back(denormalize_clip({v, a}));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json tensor_to_json(const Eigen::MatrixXd& m) {
  json t;
  t["shape"] = {m.rows(), m.cols()};
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  t["data"] = std::move(data);
  return t;
}

Eigen::MatrixXd tensor_from_json(const json& t) {
  const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2) throw FormatError("checkpoint tensor: bad shape");
  const auto data = t.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1]) {
    throw FormatError("checkpoint tensor: data/shape mismatch");
  }
  Eigen::MatrixXd m(shape[0], shape[1]);
  size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[i++];
  }
  return m;
}

}  // namespace

void save_checkpoint(const VaRegressor& model, const std::string& path) {
  const auto* toy = dynamic_cast<const ToyEncoder*>(model.encoder.get());
  if (!toy) {
    throw Error("save_checkpoint: only toy-encoder models are serializable");
  }
  auto* mutable_toy = const_cast<ToyEncoder*>(toy);

  json doc;
  doc["format"] = "dimabsa-regressor";
  doc["version"] = 1;
  doc["input_template"] = model.input_template;
  doc["null_surface"] = model.null_surface;
  doc["encoder"] = {
      {"kind", "toy"},
      {"vocab_size", toy->config().vocab_size},
      {"dim", toy->config().dim},
      {"max_seq_len", toy->config().max_seq_len},
      {"seed", toy->config().seed},
      {"tokenizer",
       {{"kind", "hash-whitespace-codepoint"},
        {"hash", "fnv1a64-mod"},
        {"vocab_size", toy->config().vocab_size}}},
  };
  json tensors;
  tensors["embedding"] = tensor_to_json(mutable_toy->embedding().value);
  tensors["w_query"] = tensor_to_json(mutable_toy->w_query().value);
  tensors["w_key"] = tensor_to_json(mutable_toy->w_key().value);
  tensors["w_value"] = tensor_to_json(mutable_toy->w_value().value);
  tensors["pool_w"] = tensor_to_json(model.pooling.w);
  tensors["head_wv"] = tensor_to_json(model.heads.w_v);
  tensors["head_wa"] = tensor_to_json(model.heads.w_a);
  tensors["head_bv"] = tensor_to_json(Eigen::MatrixXd::Constant(1, 1, model.heads.b_v));
  tensors["head_ba"] = tensor_to_json(Eigen::MatrixXd::Constant(1, 1, model.heads.b_a));
  doc["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out << doc.dump(1) << "\n";
}

VaRegressor load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError("checkpoint is not valid JSON");
  if (doc.value("format", "") != "dimabsa-regressor") {
    throw FormatError("not a regressor checkpoint: " + path);
  }
  const auto& enc = doc.at("encoder");
  if (enc.value("kind", "") != "toy") {
    throw FormatError("unsupported encoder kind in checkpoint");
  }
  ToyEncoderConfig config;
  config.vocab_size = enc.at("vocab_size").get<uint32_t>();
  config.dim = enc.at("dim").get<int>();
  config.max_seq_len = enc.at("max_seq_len").get<int>();
  config.seed = enc.value("seed", uint64_t{1});
  auto toy = std::make_shared<ToyEncoder>(config);

  const auto& tensors = doc.at("tensors");
  toy->embedding().value = tensor_from_json(tensors.at("embedding"));
  toy->w_query().value = tensor_from_json(tensors.at("w_query"));
  toy->w_key().value = tensor_from_json(tensors.at("w_key"));
  toy->w_value().value = tensor_from_json(tensors.at("w_value"));

  VaRegressor model;
  model.encoder = toy;
  model.pooling.w = tensor_from_json(tensors.at("pool_w")).col(0);
  model.heads.w_v = tensor_from_json(tensors.at("head_wv")).col(0);
  model.heads.w_a = tensor_from_json(tensors.at("head_wa")).col(0);
  model.heads.b_v = tensor_from_json(tensors.at("head_bv"))(0, 0);
  model.heads.b_a = tensor_from_json(tensors.at("head_ba"))(0, 0);
  model.input_template = doc.value("input_template", kDefaultInputTemplate);
  model.null_surface = doc.value("null_surface", kDefaultNullSurface);
  return model;
}

std::string history_to_tsv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tval_rmse_va\tlr_multiplier\n";
  for (const auto& row : history) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d\t%.10g\t%.10g\t%.10g\n", row.epoch,
                  row.train_loss, row.val_rmse_va, row.lr_multiplier);
    out << buf;
  }
  return out.str();
}

}  // namespace dimabsa::reg
