#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dimabsa/core.hpp"

namespace dimabsa::metrics {

// ---------------------------------------------------------------------------
// Moments and correlation
// ---------------------------------------------------------------------------

/// Population (1/N) moments of x, with the covariance against a partner
/// vector of equal length.
struct MomentStats {
  double mean = 0.0;
  double variance = 0.0;
  double covariance = 0.0;
};

MomentStats moments(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& partner);

/// Pearson correlation. Throws StatError on length < 2, length mismatch, or
/// a constant input (the value is undefined there, not zero).
double pcc(const Eigen::Ref<const Eigen::VectorXd>& xs,
           const Eigen::Ref<const Eigen::VectorXd>& ys);
double pcc(const std::vector<double>& xs, const std::vector<double>& ys);

/// Concordance correlation with population moments. Returns 0 when both the
/// numerator and denominator vanish (two identical constants).
double ccc(const Eigen::Ref<const Eigen::VectorXd>& preds,
           const Eigen::Ref<const Eigen::VectorXd>& golds);
double ccc(const std::vector<double>& preds, const std::vector<double>& golds);

/// lambda_v * ccc_v + lambda_a * ccc_a.
double weighted_ccc(double ccc_v, double ccc_a, double lambda_v,
                    double lambda_a);

// ---------------------------------------------------------------------------
// Regression error
// ---------------------------------------------------------------------------

/// sqrt( (1/2N) sum_i [(dv_i)^2 + (da_i)^2] ): both dimensions pooled into
/// one aggregate. Throws StatError on empty input or length mismatch.
double rmse_va(const std::vector<VAPair>& preds,
               const std::vector<VAPair>& golds);

/// Per-dimension RMSEs, reported alongside the pooled value.
struct DimRmse {
  double valence = 0.0;
  double arousal = 0.0;
};
DimRmse rmse_per_dim(const std::vector<VAPair>& preds,
                     const std::vector<VAPair>& golds);

// ---------------------------------------------------------------------------
// Continuous F1
// ---------------------------------------------------------------------------

/// Per-match VA weight: 1 - (|dV| + |dA|) / 16, clipped into [0, 1].
/// This is the toolkit's default weight; the matcher accepts any other.
double va_similarity(const VAPair& pred, const VAPair& gold);

using VaWeightFn = std::function<double(const VAPair&, const VAPair&)>;

struct Match {
  int pred_index = -1;
  int gold_index = -1;
  double weight = 0.0;
};

/// One-to-one alignment of predictions and golds within a single review.
struct MatchResult {
  std::vector<Match> matches;
  int unmatched_pred = 0;
  int unmatched_gold = 0;

  double total_weight() const;
};

/// Exact, case-sensitive key matching on (A, O) for ASTE or (A, C, O) for
/// ASQP; duplicates consumed one-to-one, ties resolved by an exact
/// maximum-total-weight assignment within each equal-key group.
/// Throws InvariantError on a mode/category-presence mismatch.
MatchResult match_tuples(const std::vector<SentimentTuple>& preds,
                         const std::vector<SentimentTuple>& golds,
                         Subtask mode,
                         const VaWeightFn& weight = va_similarity);

/// Metric bundle covering both subtask families; only one side is populated.
struct ScoreReport {
  std::optional<double> rmse_va;
  std::optional<double> pcc_v;
  std::optional<double> pcc_a;
  std::optional<double> c_precision;
  std::optional<double> c_recall;
  std::optional<double> c_f1;

  std::string to_text() const;
};

/// Corpus-level continuous F1. Reviews are aligned by ID; predictions for
/// IDs absent from gold count as unmatched predictions, and vice versa.
ScoreReport continuous_f1(
    const std::vector<std::pair<std::string, std::vector<SentimentTuple>>>&
        preds_by_review,
    const std::vector<std::pair<std::string, std::vector<SentimentTuple>>>&
        golds_by_review,
    Subtask mode, const VaWeightFn& weight = va_similarity);

}  // namespace dimabsa::metrics
