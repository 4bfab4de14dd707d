#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dimabsa/core.hpp"

namespace dimabsa::io {

// ---------------------------------------------------------------------------
// VA wire format
// ---------------------------------------------------------------------------

/// Parses "V#A". Throws FormatError (missing '#', non-numeric side) or
/// RangeError (a side outside [1.00, 9.00]).
VAPair parse_va_string(std::string_view s);

/// "V#A" with exactly two decimals per side, rounded half away from zero.
/// Throws RangeError if the rounded value leaves [1.00, 9.00].
std::string format_va_string(const VAPair& va);

/// One VA value with exactly two decimals (the halves of format_va_string).
std::string format_va_value(double x);

// ---------------------------------------------------------------------------
// Dataset splits
// ---------------------------------------------------------------------------

/// Shape of the JSON container a split was read from; emitted back unchanged.
enum class ContainerShape { Array, Lines };

struct DatasetSplit {
  std::vector<AnnotatedRecord> records;
  Split split = Split::Train;
  Subtask subtask = Subtask::ASR;
  ContainerShape shape = ContainerShape::Array;
};

struct LoadIssue {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string locator;  // "record 3 (ID=rest26_dev_1)"
  std::string message;
};

struct LoadReport {
  std::vector<LoadIssue> issues;

  size_t error_count() const;
  size_t warning_count() const;
  bool ok() const { return error_count() == 0; }
  std::string to_text() const;
};

struct LoadOptions {
  Subtask subtask = Subtask::ASR;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
  Split split = Split::Train;
  /// Accept aspect entries without a "VA" key (prediction inputs); the
  /// placeholder value is the scale midpoint.
  bool allow_missing_va = false;
};

struct LoadResult {
  DatasetSplit split;
  LoadReport report;
};

/// Loads a split from a JSON array or line-delimited JSON records.
/// Malformed records are reported and skipped, never silently dropped.
/// Only an unreadable/undecodable stream throws.
LoadResult load_split(std::istream& in, const LoadOptions& opts);
LoadResult load_split(const std::string& text, const LoadOptions& opts);
LoadResult load_split_file(const std::string& path, const LoadOptions& opts);

// ---------------------------------------------------------------------------
// Flatten / group (the ASR pipeline)
// ---------------------------------------------------------------------------

/// One (review, aspect) training row produced by flattening an ASR split.
struct RegressionExample {
  std::string review_id;
  std::string review_text;
  Term aspect;
  VAPair target;  // gold VA on the [1, 9] scale

  friend bool operator==(const RegressionExample&,
                         const RegressionExample&) = default;
};

/// One row per (review, aspect), review order then aspect order.
std::vector<RegressionExample> flatten_asr(const DatasetSplit& split);

/// A prediction for one flattened row.
struct PredictionRow {
  std::string review_id;
  Term aspect;
  VAPair va;
};

struct SubmissionEntry {
  std::string id;
  std::optional<std::string> text;          // present when known (gold round trips)
  std::vector<AspectEntry> aspect_va;       // ASR payload
  std::vector<SentimentTuple> tuples;       // ASTE / ASQP payload
};

/// Inverts flatten_asr: regroups per-row predictions into per-review entries,
/// aspects restored in the skeleton's order. Duplicate aspect strings within
/// a review are consumed positionally. Throws InvariantError listing the
/// (id, aspect) keys if any skeleton row has no prediction or any prediction
/// matches no skeleton row.
std::vector<SubmissionEntry> group_predictions(
    const std::vector<PredictionRow>& rows,
    const std::vector<RegressionExample>& skeleton);

/// Gold split -> submission entries (text carried along for round trips).
std::vector<SubmissionEntry> to_entries(const DatasetSplit& split);

/// Entries -> AnnotatedRecord-shaped predictions keyed by review ID.
/// Used by the scorer to consume submission files.
std::vector<std::pair<std::string, std::vector<SentimentTuple>>>
entries_by_review(const DatasetSplit& split);

// ---------------------------------------------------------------------------
// Submission writing
// ---------------------------------------------------------------------------

/// Serializes entries in the task's exact field names and nesting. UTF-8,
/// input order preserved. Throws InvariantError on invalid payloads.
std::string write_submission(const std::vector<SubmissionEntry>& entries,
                             Subtask subtask,
                             ContainerShape shape = ContainerShape::Array);

void write_submission_file(const std::string& path,
                           const std::vector<SubmissionEntry>& entries,
                           Subtask subtask,
                           ContainerShape shape = ContainerShape::Array);

}  // namespace dimabsa::io
