#include "dimabsa/core.hpp"

#include <cmath>
#include <sstream>

namespace dimabsa {

NormalizedVA normalize_va(const VAPair& va) {
  if (!va.in_range()) {
    std::ostringstream msg;
    msg << "VA (" << va.valence << ", " << va.arousal << ") outside ["
        << kVaMin << ", " << kVaMax << "]";
    throw RangeError(msg.str());
  }
  return {(va.valence - 1.0) / 8.0, (va.arousal - 1.0) / 8.0};
}

VAPair denormalize_clip(const NormalizedVA& nv) {
  auto clip = [](double x) { return std::min(kVaMax, std::max(kVaMin, x)); };
  return {clip(8.0 * nv.v + 1.0), clip(8.0 * nv.a + 1.0)};
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string to_string(Language lang) {
  switch (lang) {
    case Language::ENG: return "ENG";
    case Language::ZHO: return "ZHO";
    case Language::JPN: return "JPN";
    case Language::RUS: return "RUS";
    case Language::TAT: return "TAT";
    case Language::UKR: return "UKR";
  }
  throw Error("unknown language value");
}

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::Restaurant: return "Restaurant";
    case Domain::Laptop: return "Laptop";
    case Domain::Hotel: return "Hotel";
    case Domain::Finance: return "Finance";
  }
  throw Error("unknown domain value");
}

std::string to_string(Subtask subtask) {
  switch (subtask) {
    case Subtask::ASR: return "ASR";
    case Subtask::ASTE: return "ASTE";
    case Subtask::ASQP: return "ASQP";
  }
  throw Error("unknown subtask value");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "Train";
    case Split::Dev: return "Dev";
    case Split::Test: return "Test";
  }
  throw Error("unknown split value");
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

Language parse_language(std::string_view s) {
  const std::string u = upper(s);
  if (u == "ENG") return Language::ENG;
  if (u == "ZHO") return Language::ZHO;
  if (u == "JPN") return Language::JPN;
  if (u == "RUS") return Language::RUS;
  if (u == "TAT") return Language::TAT;
  if (u == "UKR") return Language::UKR;
  throw FormatError("unknown language: " + std::string(s));
}

Domain parse_domain(std::string_view s) {
  const std::string u = upper(s);
  if (u == "RESTAURANT") return Domain::Restaurant;
  if (u == "LAPTOP") return Domain::Laptop;
  if (u == "HOTEL") return Domain::Hotel;
  if (u == "FINANCE") return Domain::Finance;
  throw FormatError("unknown domain: " + std::string(s));
}

Subtask parse_subtask(std::string_view s) {
  const std::string u = upper(s);
  if (u == "ASR") return Subtask::ASR;
  if (u == "ASTE") return Subtask::ASTE;
  if (u == "ASQP") return Subtask::ASQP;
  throw FormatError("unknown subtask: " + std::string(s));
}

Split parse_split(std::string_view s) {
  const std::string u = upper(s);
  if (u == "TRAIN") return Split::Train;
  if (u == "DEV") return Split::Dev;
  if (u == "TEST") return Split::Test;
  throw FormatError("unknown split: " + std::string(s));
}

std::string format_term(const Term& t) { return t ? *t : "NULL"; }

Term parse_term(std::string_view s) {
  if (s == "NULL") return std::nullopt;
  return std::string(s);
}

bool valid_category(std::string_view s) {
  const auto hash = s.find('#');
  if (hash == std::string_view::npos || hash != s.rfind('#')) return false;
  const auto entity = s.substr(0, hash);
  const auto attribute = s.substr(hash + 1);
  auto ok_segment = [](std::string_view seg) {
    if (seg.empty()) return false;
    for (char c : seg) {
      const bool ok = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
      if (!ok) return false;
    }
    return true;
  };
  return ok_segment(entity) && ok_segment(attribute);
}

std::vector<std::string> check_record(const AnnotatedRecord& rec) {
  std::vector<std::string> violations;
  if (rec.review.id.empty()) violations.push_back("review ID is empty");
  if (rec.review.domain == Domain::Finance && rec.subtask != Subtask::ASR) {
    violations.push_back("Finance domain is only defined for the ASR subtask");
  }

  auto check_term = [&](const Term& t, const char* field) {
    if (t && t->empty()) {
      violations.push_back(std::string(field) + " is the empty string (use NULL for implicit targets)");
    }
  };
  auto check_va = [&](const VAPair& va, const std::string& field) {
    if (!(va.valence >= kVaMin && va.valence <= kVaMax &&
          va.arousal >= kVaMin && va.arousal <= kVaMax)) {
      violations.push_back(field + " VA outside [1.00, 9.00]");
    }
  };

  if (rec.subtask == Subtask::ASR) {
    if (!rec.tuples.empty())
      violations.push_back("ASR record carries tuples");
    if (rec.aspect_entries.empty())
      violations.push_back("ASR record has no aspect entries");
    for (size_t i = 0; i < rec.aspect_entries.size(); ++i) {
      check_term(rec.aspect_entries[i].aspect, "Aspect");
      check_va(rec.aspect_entries[i].va, "Aspect_VA[" + std::to_string(i) + "]");
    }
  } else {
    if (!rec.aspect_entries.empty())
      violations.push_back("tuple record carries aspect entries");
    const bool want_category = rec.subtask == Subtask::ASQP;
    for (size_t i = 0; i < rec.tuples.size(); ++i) {
      const auto& t = rec.tuples[i];
      const std::string at = "tuple[" + std::to_string(i) + "]";
      check_term(t.aspect, "Aspect");
      check_term(t.opinion, "Opinion");
      check_va(t.va, at);
      if (want_category) {
        if (!t.category) {
          violations.push_back(at + " missing Category (required for ASQP)");
        } else if (!valid_category(*t.category)) {
          violations.push_back(at + " Category '" + *t.category +
                               "' does not match ENTITY#ATTRIBUTE");
        }
      } else if (t.category) {
        violations.push_back(at + " carries a Category outside ASQP");
      }
    }
  }
  return violations;
}

}  // namespace dimabsa
