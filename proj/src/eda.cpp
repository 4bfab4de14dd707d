#include "dimabsa/eda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dimabsa/unicode.hpp"

namespace dimabsa::eda {

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

BinSpec BinSpec::deciles(std::vector<double> reference) {
  if (reference.empty()) {
    throw StatError("BinSpec::deciles: empty reference sample");
  }
  std::sort(reference.begin(), reference.end());
  BinSpec spec;
  spec.kind = Kind::QuantileContinuous;
  for (int k = 1; k <= 9; ++k) {
    // Nearest-rank decile.
    const size_t idx = std::min(reference.size() - 1,
                                static_cast<size_t>(k * reference.size() / 10));
    const double edge = reference[idx];
    if (spec.edges.empty() || edge > spec.edges.back()) {
      spec.edges.push_back(edge);
    }
  }
  if (spec.edges.empty()) spec.edges.push_back(reference.front());
  return spec;
}

BinSpec BinSpec::categorical(std::vector<std::string> categories) {
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()),
                   categories.end());
  BinSpec spec;
  spec.kind = Kind::Categorical;
  spec.categories = std::move(categories);
  return spec;
}

size_t BinSpec::bin_count() const {
  if (kind == Kind::Categorical) return categories.size() + 1;  // + OTHER
  return edges.size() + 1;
}

size_t BinSpec::bin_of(double value) const {
  // Number of edges <= value: bins are (-inf, e1), [e1, e2), ..., [e9, inf),
  // so the end bins cover any comparison outliers.
  return static_cast<size_t>(
      std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

size_t BinSpec::bin_of(const std::string& category) const {
  const auto it =
      std::lower_bound(categories.begin(), categories.end(), category);
  if (it != categories.end() && *it == category) {
    return static_cast<size_t>(it - categories.begin());
  }
  return categories.size();  // OTHER
}

// ---------------------------------------------------------------------------
// PSI
// ---------------------------------------------------------------------------

double psi_from_counts(const std::vector<size_t>& ref_counts,
                       const std::vector<size_t>& cmp_counts, double epsilon) {
  if (ref_counts.size() != cmp_counts.size()) {
    throw StatError("psi: bin count mismatch");
  }
  const double ref_total = static_cast<double>(
      std::accumulate(ref_counts.begin(), ref_counts.end(), size_t{0}));
  const double cmp_total = static_cast<double>(
      std::accumulate(cmp_counts.begin(), cmp_counts.end(), size_t{0}));
  if (ref_total == 0.0 || cmp_total == 0.0) {
    throw StatError("psi: empty sample");
  }
  const double bins = static_cast<double>(ref_counts.size());
  double sum = 0.0;
  for (size_t i = 0; i < ref_counts.size(); ++i) {
    const double p =
        (static_cast<double>(ref_counts[i]) / ref_total + epsilon) /
        (1.0 + bins * epsilon);
    const double q =
        (static_cast<double>(cmp_counts[i]) / cmp_total + epsilon) /
        (1.0 + bins * epsilon);
    if (p != q) sum += (p - q) * std::log(p / q);
  }
  return sum;
}

bool degenerate_binning(const std::vector<size_t>& ref_counts) {
  const size_t total =
      std::accumulate(ref_counts.begin(), ref_counts.end(), size_t{0});
  return std::any_of(ref_counts.begin(), ref_counts.end(),
                     [total](size_t c) { return c == total && total > 0; });
}

namespace {

std::vector<size_t> bin_values(const std::vector<double>& sample,
                               const BinSpec& bins) {
  std::vector<size_t> counts(bins.bin_count(), 0);
  for (const double v : sample) ++counts[bins.bin_of(v)];
  return counts;
}

std::vector<size_t> bin_categories(const std::vector<std::string>& sample,
                                   const BinSpec& bins) {
  std::vector<size_t> counts(bins.bin_count(), 0);
  for (const auto& c : sample) ++counts[bins.bin_of(c)];
  return counts;
}

}  // namespace

double psi(const std::vector<double>& reference,
           const std::vector<double>& comparison, const BinSpec& bins) {
  return psi_from_counts(bin_values(reference, bins),
                         bin_values(comparison, bins), bins.epsilon);
}

double psi_categorical(const std::vector<std::string>& reference,
                       const std::vector<std::string>& comparison,
                       const BinSpec& bins) {
  return psi_from_counts(bin_categories(reference, bins),
                         bin_categories(comparison, bins), bins.epsilon);
}

ShiftLevel shift_level(double value) {
  if (value < 0.1) return ShiftLevel::None;
  if (value <= 0.2) return ShiftLevel::Moderate;
  return ShiftLevel::Significant;
}

std::string to_string(ShiftLevel level) {
  switch (level) {
    case ShiftLevel::None: return "none";
    case ShiftLevel::Moderate: return "moderate";
    case ShiftLevel::Significant: return "significant";
  }
  throw Error("unknown shift level");
}

std::string to_string(Feature feature) {
  switch (feature) {
    case Feature::ReviewLength: return "review_length";
    case Feature::TuplesPerReview: return "tuples_per_review";
    case Feature::CategoryDistribution: return "category_distribution";
  }
  throw Error("unknown feature");
}

std::vector<Feature> default_features(Subtask subtask) {
  std::vector<Feature> features = {Feature::ReviewLength,
                                   Feature::TuplesPerReview};
  if (subtask == Subtask::ASQP) {
    features.push_back(Feature::CategoryDistribution);
  }
  return features;
}

// ---------------------------------------------------------------------------
// Split statistics
// ---------------------------------------------------------------------------

SplitSummary split_stats(const io::DatasetSplit& split) {
  SplitSummary s;
  s.review_count = split.records.size();
  for (const auto& rec : split.records) {
    s.review_lengths.push_back(
        static_cast<double>(codepoint_count(rec.review.text)));
    const size_t density = split.subtask == Subtask::ASR
                               ? rec.aspect_entries.size()
                               : rec.tuples.size();
    s.density.push_back(static_cast<double>(density));
    for (const auto& t : rec.tuples) {
      if (t.category) ++s.category_counts[*t.category];
    }
  }
  return s;
}

double SplitSummary::mean_length() const {
  if (review_lengths.empty()) return 0.0;
  return std::accumulate(review_lengths.begin(), review_lengths.end(), 0.0) /
         static_cast<double>(review_lengths.size());
}

double SplitSummary::mean_density() const {
  if (density.empty()) return 0.0;
  return std::accumulate(density.begin(), density.end(), 0.0) /
         static_cast<double>(density.size());
}

// ---------------------------------------------------------------------------
// PSI matrix
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> category_sample(const io::DatasetSplit& split) {
  std::vector<std::string> out;
  for (const auto& rec : split.records) {
    for (const auto& t : rec.tuples) {
      if (t.category) out.push_back(*t.category);
    }
  }
  return out;
}

}  // namespace

std::vector<PsiReport> psi_matrix(
    const std::map<Split, io::DatasetSplit>& splits,
    const std::vector<Feature>& features) {
  const auto train_it = splits.find(Split::Train);
  if (train_it == splits.end()) {
    throw InvariantError("psi_matrix: Train split required as the reference");
  }
  const auto& train = train_it->second;
  const SplitSummary train_stats = split_stats(train);

  std::vector<PsiReport> reports;
  for (const auto& [split_kind, split] : splits) {
    if (split_kind == Split::Train) continue;
    const SplitSummary cmp_stats = split_stats(split);
    const std::string pair_name = "Train->" + dimabsa::to_string(split_kind);

    for (const Feature feature : features) {
      PsiReport report;
      report.feature = feature;
      report.comparison = pair_name;
      if (feature == Feature::CategoryDistribution) {
        if (train.subtask != Subtask::ASQP) continue;
        const auto ref = category_sample(train);
        const auto cmp = category_sample(split);
        const BinSpec bins = BinSpec::categorical(ref);
        std::vector<size_t> ref_counts(bins.bin_count(), 0);
        for (const auto& c : ref) ++ref_counts[bins.bin_of(c)];
        std::vector<size_t> cmp_counts(bins.bin_count(), 0);
        for (const auto& c : cmp) ++cmp_counts[bins.bin_of(c)];
        report.value = psi_from_counts(ref_counts, cmp_counts, bins.epsilon);
        report.degenerate = degenerate_binning(ref_counts);
      } else {
        const auto& ref = feature == Feature::ReviewLength
                              ? train_stats.review_lengths
                              : train_stats.density;
        const auto& cmp = feature == Feature::ReviewLength
                              ? cmp_stats.review_lengths
                              : cmp_stats.density;
        const BinSpec bins = BinSpec::deciles(ref);
        std::vector<size_t> ref_counts(bins.bin_count(), 0);
        for (const double v : ref) ++ref_counts[bins.bin_of(v)];
        report.value = psi(ref, cmp, bins);
        report.degenerate = degenerate_binning(ref_counts);
      }
      report.level = shift_level(report.value);
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// NULL analysis
// ---------------------------------------------------------------------------

NullReport null_analysis(const io::DatasetSplit& split) {
  if (split.subtask == Subtask::ASR) {
    throw InvariantError("null_analysis applies to ASTE/ASQP splits");
  }
  NullReport report;
  size_t aspect_only = 0, opinion_only = 0, both = 0;
  for (const auto& rec : split.records) {
    for (const auto& t : rec.tuples) {
      ++report.tuple_count;
      const bool na = !t.aspect.has_value();
      const bool no = !t.opinion.has_value();
      if (na && no) {
        ++both;
      } else if (na) {
        ++aspect_only;
      } else if (no) {
        ++opinion_only;
      }
    }
  }
  report.null_count = aspect_only + opinion_only + both;
  if (report.tuple_count > 0) {
    report.null_rate = static_cast<double>(report.null_count) /
                       static_cast<double>(report.tuple_count);
  }
  if (report.null_count > 0) {
    const double n = static_cast<double>(report.null_count);
    report.aspect_only = static_cast<double>(aspect_only) / n;
    report.opinion_only = static_cast<double>(opinion_only) / n;
    report.both = static_cast<double>(both) / n;
  }
  return report;
}

}  // namespace dimabsa::eda
