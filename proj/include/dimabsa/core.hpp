#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dimabsa {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numeric value left the domain it is defined on (e.g. VA outside [1, 9]).
struct RangeError : Error {
  using Error::Error;
};

/// A string does not follow the wire format it claims to be (V#A, category).
struct FormatError : Error {
  using Error::Error;
};

/// A structural invariant between fields was violated.
struct InvariantError : Error {
  using Error::Error;
};

/// A statistic is undefined on the given input (constant vector, empty batch).
struct StatError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Valence-arousal scores
// ---------------------------------------------------------------------------

inline constexpr double kVaMin = 1.0;
inline constexpr double kVaMax = 9.0;

/// A valence-arousal pair on the task's [1.00, 9.00] scale.
///
/// Stored as plain doubles; the [1, 9] range is enforced at the operation
/// boundaries (normalize_va, parsing, serialization), not at construction,
/// so that raw model outputs can pass through here before clipping.
struct VAPair {
  double valence = 0.0;
  double arousal = 0.0;

  bool in_range() const {
    return valence >= kVaMin && valence <= kVaMax && arousal >= kVaMin &&
           arousal <= kVaMax;
  }

  friend bool operator==(const VAPair&, const VAPair&) = default;
};

/// VA mapped onto [0, 1] per dimension; the space the regressor trains in.
struct NormalizedVA {
  double v = 0.0;
  double a = 0.0;

  friend bool operator==(const NormalizedVA&, const NormalizedVA&) = default;
};

/// (x - 1) / 8 per component. Throws RangeError on out-of-range input.
NormalizedVA normalize_va(const VAPair& va);

/// 8 x + 1 per component, then clipped into [1, 9]. Total: accepts any reals.
VAPair denormalize_clip(const NormalizedVA& nv);

/// Round half away from zero at two decimals. Serialization-boundary helper.
double round2(double x);

// ---------------------------------------------------------------------------
// Task enums
// ---------------------------------------------------------------------------

enum class Language { ENG, ZHO, JPN, RUS, TAT, UKR };
enum class Domain { Restaurant, Laptop, Hotel, Finance };
enum class Subtask { ASR, ASTE, ASQP };
enum class Split { Train, Dev, Test };

std::string to_string(Language lang);
std::string to_string(Domain domain);
std::string to_string(Subtask subtask);
std::string to_string(Split split);

Language parse_language(std::string_view s);
Domain parse_domain(std::string_view s);
Subtask parse_subtask(std::string_view s);
Split parse_split(std::string_view s);

// ---------------------------------------------------------------------------
// Annotation records
// ---------------------------------------------------------------------------

/// An aspect or opinion surface span. nullopt is the task's NULL target
/// (implicit span); a present value must be a nonempty, case-sensitive
/// string. The empty string is never valid.
using Term = std::optional<std::string>;

/// Wire form of a Term: the literal "NULL" for the sentinel.
std::string format_term(const Term& t);

/// Inverse of format_term: "NULL" becomes the sentinel.
Term parse_term(std::string_view s);

/// ENTITY#ATTRIBUTE with both parts nonempty, uppercase [A-Z0-9_].
bool valid_category(std::string_view s);

struct Review {
  std::string id;
  std::string text;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
};

/// One (aspect, VA) annotation of an ASR review.
struct AspectEntry {
  Term aspect;
  VAPair va;

  friend bool operator==(const AspectEntry&, const AspectEntry&) = default;
};

/// Unified triplet/quadruplet record. category is present iff the enclosing
/// record is ASQP.
struct SentimentTuple {
  Term aspect;
  Term opinion;
  std::optional<std::string> category;
  VAPair va;

  friend bool operator==(const SentimentTuple&,
                         const SentimentTuple&) = default;
};

struct AnnotatedRecord {
  Review review;
  Subtask subtask = Subtask::ASR;
  std::vector<AspectEntry> aspect_entries;  // ASR only
  std::vector<SentimentTuple> tuples;       // ASTE / ASQP only
};

/// Checks the cross-field invariants of a record; returns a list of
/// human-readable violations (empty means valid).
std::vector<std::string> check_record(const AnnotatedRecord& rec);

}  // namespace dimabsa
