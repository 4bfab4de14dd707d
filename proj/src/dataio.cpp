#include "dimabsa/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dimabsa::io {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// VA strings
// ---------------------------------------------------------------------------

namespace {

double parse_va_side(std::string_view side, std::string_view whole) {
  if (side.empty()) {
    throw FormatError("empty side in VA string '" + std::string(whole) + "'");
  }
  // strtod tolerates leading whitespace and signs; the wire format does not.
  if (!std::isdigit(static_cast<unsigned char>(side.front()))) {
    throw FormatError("non-numeric side '" + std::string(side) +
                      "' in VA string '" + std::string(whole) + "'");
  }
  const std::string buf(side);
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) {
    throw FormatError("non-numeric side '" + buf + "' in VA string '" +
                      std::string(whole) + "'");
  }
  if (!(value >= kVaMin && value <= kVaMax)) {
    throw RangeError("VA side '" + buf + "' outside [1.00, 9.00] in '" +
                     std::string(whole) + "'");
  }
  return value;
}

}  // namespace

VAPair parse_va_string(std::string_view s) {
  const auto hash = s.find('#');
  if (hash == std::string_view::npos) {
    throw FormatError("VA string '" + std::string(s) + "' has no '#'");
  }
  if (s.find('#', hash + 1) != std::string_view::npos) {
    throw FormatError("VA string '" + std::string(s) + "' has more than one '#'");
  }
  return {parse_va_side(s.substr(0, hash), s),
          parse_va_side(s.substr(hash + 1), s)};
}

namespace {

// Two-decimal rendering from an integer number of hundredths, so the output
// never depends on printf rounding of the binary value.
std::string format_two_decimals(double x) {
  const long long cents = std::llround(x * 100.0);
  if (cents < 100 || cents > 900) {
    throw RangeError("VA value " + std::to_string(x) +
                     " outside [1.00, 9.00] at serialization");
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", cents / 100, cents % 100);
  return buf;
}

}  // namespace

std::string format_va_value(double x) { return format_two_decimals(x); }

std::string format_va_string(const VAPair& va) {
  return format_two_decimals(va.valence) + "#" + format_two_decimals(va.arousal);
}

// ---------------------------------------------------------------------------
// Load
// ---------------------------------------------------------------------------

size_t LoadReport::error_count() const {
  return static_cast<size_t>(std::count_if(
      issues.begin(), issues.end(), [](const LoadIssue& i) {
        return i.severity == LoadIssue::Severity::Error;
      }));
}

size_t LoadReport::warning_count() const {
  return issues.size() - error_count();
}

std::string LoadReport::to_text() const {
  std::ostringstream out;
  for (const auto& i : issues) {
    out << (i.severity == LoadIssue::Severity::Error ? "error" : "warning")
        << " at " << i.locator << ": " << i.message << "\n";
  }
  return out.str();
}

namespace {

struct RecordContext {
  std::string locator;
  LoadReport* report = nullptr;
  bool failed = false;

  void error(const std::string& msg) {
    report->issues.push_back({LoadIssue::Severity::Error, locator, msg});
    failed = true;
  }
  void warn(const std::string& msg) {
    report->issues.push_back({LoadIssue::Severity::Warning, locator, msg});
  }
};

std::optional<std::string> get_string(const ordered_json& obj, const char* key,
                                      RecordContext& ctx, bool required) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) ctx.error(std::string("missing field '") + key + "'");
    return std::nullopt;
  }
  if (!it->is_string()) {
    ctx.error(std::string("field '") + key + "' is not a string");
    return std::nullopt;
  }
  return it->get<std::string>();
}

Term read_term(const ordered_json& obj, const char* key, RecordContext& ctx) {
  const auto raw = get_string(obj, key, ctx, /*required=*/true);
  if (!raw) return std::nullopt;
  Term t = parse_term(*raw);
  if (t && t->empty()) {
    ctx.error(std::string("field '") + key +
              "' is the empty string (use \"NULL\" for implicit targets)");
  }
  return t;
}

std::optional<VAPair> read_va(const ordered_json& obj, const char* key,
                              RecordContext& ctx, bool allow_missing) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (allow_missing) return VAPair{5.0, 5.0};
    ctx.error(std::string("missing field '") + key + "'");
    return std::nullopt;
  }
  if (!it->is_string()) {
    ctx.error(std::string("field '") + key + "' is not a \"V#A\" string");
    return std::nullopt;
  }
  try {
    return parse_va_string(it->get<std::string>());
  } catch (const Error& e) {
    ctx.error(std::string("field '") + key + "': " + e.what());
    return std::nullopt;
  }
}

void warn_if_not_substring(const Term& t, const std::string& text,
                           const char* field, RecordContext& ctx) {
  if (t && text.find(*t) == std::string::npos) {
    ctx.warn(std::string(field) + " '" + *t +
             "' is not a substring of the review text");
  }
}

std::optional<AnnotatedRecord> parse_record(const ordered_json& obj,
                                            const LoadOptions& opts,
                                            RecordContext& ctx) {
  if (!obj.is_object()) {
    ctx.error("record is not a JSON object");
    return std::nullopt;
  }
  AnnotatedRecord rec;
  rec.subtask = opts.subtask;
  rec.review.language = opts.language;
  rec.review.domain = opts.domain;

  const auto id = get_string(obj, "ID", ctx, /*required=*/true);
  if (id) {
    rec.review.id = *id;
    if (id->empty()) ctx.error("field 'ID' is empty");
    ctx.locator += " (ID=" + *id + ")";
  }
  if (const auto text = get_string(obj, "Text", ctx, /*required=*/false)) {
    rec.review.text = *text;
  }

  const char* payload_key = opts.subtask == Subtask::ASR    ? "Aspect_VA"
                            : opts.subtask == Subtask::ASTE ? "Triplet"
                                                            : "Quadruplet";
  const auto payload = obj.find(payload_key);
  if (payload == obj.end()) {
    ctx.error(std::string("missing field '") + payload_key + "'");
    return std::nullopt;
  }
  if (!payload->is_array()) {
    ctx.error(std::string("field '") + payload_key + "' is not an array");
    return std::nullopt;
  }

  if (opts.subtask == Subtask::ASR) {
    for (const auto& item : *payload) {
      if (!item.is_object()) {
        ctx.error("Aspect_VA item is not an object");
        continue;
      }
      AspectEntry entry;
      entry.aspect = read_term(item, "Aspect", ctx);
      if (const auto va = read_va(item, "VA", ctx, opts.allow_missing_va)) {
        entry.va = *va;
      }
      warn_if_not_substring(entry.aspect, rec.review.text, "Aspect", ctx);
      rec.aspect_entries.push_back(std::move(entry));
    }
    if (rec.aspect_entries.empty()) {
      ctx.error("ASR record has an empty Aspect_VA list");
    }
  } else {
    const bool want_category = opts.subtask == Subtask::ASQP;
    for (const auto& item : *payload) {
      if (!item.is_object()) {
        ctx.error(std::string(payload_key) + " item is not an object");
        continue;
      }
      SentimentTuple t;
      t.aspect = read_term(item, "Aspect", ctx);
      t.opinion = read_term(item, "Opinion", ctx);
      if (want_category) {
        const auto cat = get_string(item, "Category", ctx, /*required=*/true);
        if (cat) {
          if (!valid_category(*cat)) {
            ctx.error("Category '" + *cat + "' does not match ENTITY#ATTRIBUTE");
          }
          t.category = *cat;
        }
      } else if (item.contains("Category")) {
        ctx.error("Triplet item carries a Category field");
      }
      if (const auto va = read_va(item, "VA", ctx, opts.allow_missing_va)) {
        t.va = *va;
      }
      warn_if_not_substring(t.aspect, rec.review.text, "Aspect", ctx);
      warn_if_not_substring(t.opinion, rec.review.text, "Opinion", ctx);
      rec.tuples.push_back(std::move(t));
    }
  }

  if (rec.review.domain == Domain::Finance && opts.subtask != Subtask::ASR) {
    ctx.error("Finance domain is only defined for the ASR subtask");
  }

  if (ctx.failed) return std::nullopt;
  return rec;
}

}  // namespace

LoadResult load_split(std::istream& in, const LoadOptions& opts) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_split(buffer.str(), opts);
}

LoadResult load_split(const std::string& raw_text, const LoadOptions& opts) {
  LoadResult result;
  result.split.subtask = opts.subtask;
  result.split.split = opts.split;

  std::string_view text = raw_text;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.remove_prefix(3);  // UTF-8 BOM

  // Container shape: a document whose first non-space byte is '[' is one
  // JSON array; anything else is treated as line-delimited records.
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool is_array = first != std::string_view::npos && text[first] == '[';
  result.split.shape = is_array ? ContainerShape::Array : ContainerShape::Lines;

  std::vector<std::pair<std::string, ordered_json>> raw_records;
  if (is_array) {
    ordered_json doc = ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
      throw FormatError("input is not valid JSON");
    }
    size_t index = 0;
    for (auto& item : doc) {
      raw_records.emplace_back("record " + std::to_string(index++), std::move(item));
    }
  } else {
    std::istringstream lines{std::string(text)};
    std::string line;
    size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ordered_json obj = ordered_json::parse(line, nullptr, false);
      const std::string locator = "line " + std::to_string(line_no);
      if (obj.is_discarded()) {
        result.report.issues.push_back(
            {LoadIssue::Severity::Error, locator, "line is not valid JSON"});
        continue;
      }
      raw_records.emplace_back(locator, std::move(obj));
    }
  }

  std::map<std::string, std::string> seen_ids;  // id -> locator
  for (auto& [locator, obj] : raw_records) {
    RecordContext ctx{locator, &result.report};
    auto rec = parse_record(obj, opts, ctx);
    if (!rec) continue;
    const auto [it, inserted] = seen_ids.emplace(rec->review.id, ctx.locator);
    if (!inserted) {
      result.report.issues.push_back(
          {LoadIssue::Severity::Error, ctx.locator,
           "duplicate ID (first seen at " + it->second + ")"});
      continue;
    }
    result.split.records.push_back(std::move(*rec));
  }
  return result;
}

LoadResult load_split_file(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  return load_split(in, opts);
}

// ---------------------------------------------------------------------------
// Flatten / group
// ---------------------------------------------------------------------------

std::vector<RegressionExample> flatten_asr(const DatasetSplit& split) {
  if (split.subtask != Subtask::ASR) {
    throw InvariantError("flatten_asr requires an ASR split");
  }
  std::vector<RegressionExample> rows;
  for (const auto& rec : split.records) {
    for (const auto& entry : rec.aspect_entries) {
      rows.push_back({rec.review.id, rec.review.text, entry.aspect, entry.va});
    }
  }
  return rows;
}

namespace {

// Distinguishes the NULL sentinel from any literal aspect string.
std::string aspect_key(const Term& t) {
  return t ? "S:" + *t : "N";
}

}  // namespace

std::vector<SubmissionEntry> group_predictions(
    const std::vector<PredictionRow>& rows,
    const std::vector<RegressionExample>& skeleton) {
  std::map<std::pair<std::string, std::string>, std::deque<VAPair>> supply;
  for (const auto& row : rows) {
    supply[{row.review_id, aspect_key(row.aspect)}].push_back(row.va);
  }

  std::vector<SubmissionEntry> entries;
  std::map<std::string, size_t> entry_index;
  std::vector<std::string> missing;
  for (const auto& row : skeleton) {
    auto it = entry_index.find(row.review_id);
    if (it == entry_index.end()) {
      it = entry_index.emplace(row.review_id, entries.size()).first;
      entries.push_back({row.review_id, row.review_text, {}, {}});
    }
    auto& queue = supply[{row.review_id, aspect_key(row.aspect)}];
    if (queue.empty()) {
      missing.push_back("(" + row.review_id + ", " + format_term(row.aspect) + ")");
      continue;
    }
    entries[it->second].aspect_va.push_back({row.aspect, queue.front()});
    queue.pop_front();
  }

  if (!missing.empty()) {
    std::string msg = "missing predictions for " +
                      std::to_string(missing.size()) + " flattened rows:";
    for (const auto& key : missing) msg += " " + key;
    throw InvariantError(msg);
  }
  size_t extra = 0;
  for (const auto& [key, queue] : supply) extra += queue.size();
  if (extra > 0) {
    throw InvariantError("predictions contain " + std::to_string(extra) +
                         " rows that match no flattened (id, aspect) key");
  }
  return entries;
}

std::vector<SubmissionEntry> to_entries(const DatasetSplit& split) {
  std::vector<SubmissionEntry> entries;
  for (const auto& rec : split.records) {
    SubmissionEntry e;
    e.id = rec.review.id;
    e.text = rec.review.text;
    e.aspect_va = rec.aspect_entries;
    e.tuples = rec.tuples;
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<std::pair<std::string, std::vector<SentimentTuple>>>
entries_by_review(const DatasetSplit& split) {
  std::vector<std::pair<std::string, std::vector<SentimentTuple>>> out;
  for (const auto& rec : split.records) {
    out.emplace_back(rec.review.id, rec.tuples);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Write
// ---------------------------------------------------------------------------

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvariantError(msg);
}

ordered_json entry_to_json(const SubmissionEntry& e, Subtask subtask) {
  require(!e.id.empty(), "submission entry has an empty ID");
  ordered_json obj;
  obj["ID"] = e.id;
  if (e.text) obj["Text"] = *e.text;
  if (subtask == Subtask::ASR) {
    ordered_json list = ordered_json::array();
    for (const auto& entry : e.aspect_va) {
      require(!entry.aspect || !entry.aspect->empty(),
              "aspect is the empty string in entry " + e.id);
      ordered_json item;
      item["Aspect"] = format_term(entry.aspect);
      item["VA"] = format_va_string(entry.va);
      list.push_back(std::move(item));
    }
    obj["Aspect_VA"] = std::move(list);
  } else {
    const bool want_category = subtask == Subtask::ASQP;
    ordered_json list = ordered_json::array();
    for (const auto& t : e.tuples) {
      require(!t.aspect || !t.aspect->empty(),
              "aspect is the empty string in entry " + e.id);
      require(!t.opinion || !t.opinion->empty(),
              "opinion is the empty string in entry " + e.id);
      ordered_json item;
      item["Aspect"] = format_term(t.aspect);
      if (want_category) {
        require(t.category.has_value(),
                "ASQP tuple without Category in entry " + e.id);
        require(valid_category(*t.category),
                "invalid Category '" + *t.category + "' in entry " + e.id);
        item["Category"] = *t.category;
      } else {
        require(!t.category.has_value(),
                "Triplet with Category in entry " + e.id);
      }
      item["Opinion"] = format_term(t.opinion);
      item["VA"] = format_va_string(t.va);
      list.push_back(std::move(item));
    }
    obj[want_category ? "Quadruplet" : "Triplet"] = std::move(list);
  }
  return obj;
}

}  // namespace

std::string write_submission(const std::vector<SubmissionEntry>& entries,
                             Subtask subtask, ContainerShape shape) {
  if (shape == ContainerShape::Array) {
    ordered_json doc = ordered_json::array();
    for (const auto& e : entries) doc.push_back(entry_to_json(e, subtask));
    return doc.dump(2) + "\n";
  }
  std::string out;
  for (const auto& e : entries) {
    out += entry_to_json(e, subtask).dump();
    out += "\n";
  }
  return out;
}

void write_submission_file(const std::string& path,
                           const std::vector<SubmissionEntry>& entries,
                           Subtask subtask, ContainerShape shape) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << write_submission(entries, subtask, shape);
}

}  // namespace dimabsa::io
