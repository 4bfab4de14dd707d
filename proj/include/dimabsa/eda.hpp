#pragma once

#include <map>
#include <string>
#include <vector>

#include "dimabsa/core.hpp"
#include "dimabsa/dataio.hpp"

namespace dimabsa::eda {

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

struct BinSpec {
  enum class Kind { QuantileContinuous, Categorical };
  Kind kind = Kind::QuantileContinuous;
  std::vector<double> edges;            // internal cut points, ascending
  std::vector<std::string> categories;  // categorical bins (+ implicit OTHER)
  double epsilon = 1e-6;                // proportion smoothing

  /// Decile bins fitted on the reference sample. Duplicate quantiles are
  /// merged; if everything collapses, a single cut point at the common value
  /// keeps the two-bin minimum (the PSI caller flags the degeneracy).
  static BinSpec deciles(std::vector<double> reference);
  static BinSpec categorical(std::vector<std::string> categories);

  size_t bin_count() const;
  size_t bin_of(double value) const;
  size_t bin_of(const std::string& category) const;
};

// ---------------------------------------------------------------------------
// PSI
// ---------------------------------------------------------------------------

/// sum_i (p_i - q_i) ln(p_i / q_i) over epsilon-smoothed bin proportions;
/// p from the reference sample, q from the comparison. Nonnegative and
/// symmetric. Throws StatError on an empty sample.
double psi(const std::vector<double>& reference,
           const std::vector<double>& comparison, const BinSpec& bins);
double psi_categorical(const std::vector<std::string>& reference,
                       const std::vector<std::string>& comparison,
                       const BinSpec& bins);

/// PSI from pre-binned counts (the shared core of both overloads).
double psi_from_counts(const std::vector<size_t>& ref_counts,
                       const std::vector<size_t>& cmp_counts, double epsilon);

/// True when one bin holds all reference mass; reported as a warning.
bool degenerate_binning(const std::vector<size_t>& ref_counts);

enum class ShiftLevel { None, Moderate, Significant };

/// < 0.1 none; 0.1 - 0.2 moderate; > 0.2 significant.
ShiftLevel shift_level(double value);
std::string to_string(ShiftLevel level);

enum class Feature { ReviewLength, TuplesPerReview, CategoryDistribution };
std::string to_string(Feature feature);

struct PsiReport {
  Feature feature = Feature::ReviewLength;
  std::string comparison;  // "Train->Dev"
  double value = 0.0;
  ShiftLevel level = ShiftLevel::None;
  bool degenerate = false;
};

/// One PsiReport per (comparison split, feature), with continuous bins
/// fitted on Train. Requires Train; the category feature applies to ASQP
/// splits only and is skipped elsewhere.
std::vector<PsiReport> psi_matrix(
    const std::map<Split, io::DatasetSplit>& splits,
    const std::vector<Feature>& features);

/// Default feature set for a subtask.
std::vector<Feature> default_features(Subtask subtask);

// ---------------------------------------------------------------------------
// Split statistics
// ---------------------------------------------------------------------------

struct SplitSummary {
  size_t review_count = 0;
  std::vector<double> review_lengths;     // Unicode codepoints per review
  std::vector<double> density;            // tuples (or aspects) per review
  std::map<std::string, size_t> category_counts;

  double mean_length() const;
  double mean_density() const;
};

SplitSummary split_stats(const io::DatasetSplit& split);

// ---------------------------------------------------------------------------
// NULL analysis
// ---------------------------------------------------------------------------

struct NullReport {
  size_t tuple_count = 0;
  size_t null_count = 0;      // tuples with any NULL element
  double null_rate = 0.0;
  double aspect_only = 0.0;   // fractions of the NULL tuples; sum to 1
  double opinion_only = 0.0;
  double both = 0.0;
};

/// Rate and composition of NULL aspect/opinion annotations. Throws
/// InvariantError for ASR splits (no tuples there).
NullReport null_analysis(const io::DatasetSplit& split);

}  // namespace dimabsa::eda
