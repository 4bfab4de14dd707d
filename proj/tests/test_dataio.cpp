#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <regex>
#include <sstream>

#include "dimabsa/dataio.hpp"
#include "dimabsa/rng.hpp"

using namespace dimabsa;
using namespace dimabsa::io;

namespace {

// Task-format examples used throughout (ASR / ASTE / ASQP shapes).
const char* kAsrJson = R"([
  {"ID": "rest26_aspect_va_dev_1",
   "Text": "Great diner food and breakfast is served all day",
   "Aspect_VA": [{"Aspect": "diner food", "VA": "7.25#6.75"},
                  {"Aspect": "breakfast", "VA": "7.25#6.75"}]}
])";

const char* kAsteJson = R"([
  {"ID": "rest26_aste_dev_2",
   "Text": "Customer service was fantastic and food was awesome",
   "Triplet": [{"Aspect": "Customer service", "Opinion": "fantastic", "VA": "7.33#7.33"},
               {"Aspect": "food", "Opinion": "awesome", "VA": "7.67#7.67"}]}
])";

const char* kAsqpJson = R"([
  {"ID": "rest26_asqp_dev_1",
   "Text": "Food and coffee are great",
   "Quadruplet": [{"Aspect": "Food", "Category": "FOOD#QUALITY", "Opinion": "great", "VA": "7.67#7.83"},
                  {"Aspect": "coffee", "Category": "DRINKS#QUALITY", "Opinion": "great", "VA": "7.67#8.00"}]}
])";

// Independent decimal-string rounding oracle: render with six decimals and
// round the digit string by hand, half away from zero.
std::string two_decimal_oracle(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  std::string s(buf);
  const auto dot = s.find('.');
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);  // drop the dot
  const size_t keep = dot + 2;  // digits kept before rounding position
  bool round_up = digits[keep] >= '5';
  digits.resize(keep);
  if (round_up) {
    for (int i = static_cast<int>(keep) - 1; i >= 0; --i) {
      if (digits[i] == '9') {
        digits[i] = '0';
      } else {
        ++digits[i];
        round_up = false;
        break;
      }
    }
    if (round_up) digits.insert(digits.begin(), '1');
  }
  const size_t split = digits.size() - 2;
  return digits.substr(0, split) + "." + digits.substr(split);
}

}  // namespace

TEST_CASE("parse_va_string reads V#A") {
  const VAPair va = parse_va_string("7.25#6.75");
  CHECK(va.valence == doctest::Approx(7.25));
  CHECK(va.arousal == doctest::Approx(6.75));
  CHECK(parse_va_string("1.00#1.00") == VAPair{1.0, 1.0});
  const VAPair hi = parse_va_string("7.67#8.00");
  CHECK(hi.valence == doctest::Approx(7.67));
  CHECK(hi.arousal == doctest::Approx(8.00));

  CHECK_THROWS_AS(parse_va_string("7.25"), FormatError);
  CHECK_THROWS_AS(parse_va_string("7.25#6.75#1.00"), FormatError);
  CHECK_THROWS_AS(parse_va_string("abc#6.75"), FormatError);
  CHECK_THROWS_AS(parse_va_string("#6.75"), FormatError);
  CHECK_THROWS_AS(parse_va_string(" 7.25#6.75"), FormatError);
  CHECK_THROWS_AS(parse_va_string("+7.25#6.75"), FormatError);
  CHECK_THROWS_AS(parse_va_string("nan#5.00"), FormatError);
  CHECK_THROWS_AS(parse_va_string("9.50#5.00"), RangeError);
  CHECK_THROWS_AS(parse_va_string("5.00#0.99"), RangeError);
}

TEST_CASE("a UTF-8 BOM does not derail container detection") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string bom = "\xEF\xBB\xBF" + std::string(kAsrJson);
  const auto result = load_split(bom, opts);
  CHECK(result.report.ok());
  CHECK(result.split.shape == ContainerShape::Array);
  CHECK(result.split.records.size() == 1);
}

TEST_CASE("prediction inputs may omit VA when asked") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string unlabeled =
      R"([{"ID": "u1", "Text": "the soup", "Aspect_VA": [{"Aspect": "soup"}]}])";
  CHECK_FALSE(load_split(unlabeled, opts).report.ok());

  opts.allow_missing_va = true;
  const auto result = load_split(unlabeled, opts);
  CHECK(result.report.ok());
  REQUIRE(result.split.records.size() == 1);
  // midpoint placeholder; callers only use the aspect structure
  CHECK(result.split.records[0].aspect_entries[0].va == VAPair{5.0, 5.0});
}

TEST_CASE("format_va_string pads to two decimals") {
  CHECK(format_va_string({7.25, 6.75}) == "7.25#6.75");
  CHECK(format_va_string({5, 5}) == "5.00#5.00");
  CHECK(format_va_string({7.666999, 8.0}) == "7.67#8.00");
  CHECK(format_va_value(7.666999) == two_decimal_oracle(7.666999));

  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double x = 1.0 + 8.0 * rng.uniform();
    CHECK(format_va_value(x) == two_decimal_oracle(x));
  }
}

TEST_CASE("serialized VA strings match the wire regex and re-parse") {
  const std::regex pattern(R"(^[1-9]\.\d{2}#[1-9]\.\d{2}$)");
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const VAPair va{1.0 + 8.0 * rng.uniform(), 1.0 + 8.0 * rng.uniform()};
    const std::string s = format_va_string(va);
    CHECK(std::regex_match(s, pattern));
    const VAPair back = parse_va_string(s);
    CHECK(format_va_string(back) == s);
  }
}

TEST_CASE("load_split reads the ASR format") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const auto result = load_split(std::string(kAsrJson), opts);
  CHECK(result.report.ok());
  REQUIRE(result.split.records.size() == 1);
  const auto& rec = result.split.records[0];
  CHECK(rec.review.id == "rest26_aspect_va_dev_1");
  REQUIRE(rec.aspect_entries.size() == 2);
  CHECK(rec.aspect_entries[0].aspect == Term{"diner food"});
  CHECK(rec.aspect_entries[0].va.valence == doctest::Approx(7.25));
  CHECK(result.split.shape == ContainerShape::Array);
}

TEST_CASE("load_split reads the ASQP format with categories") {
  LoadOptions opts;
  opts.subtask = Subtask::ASQP;
  const auto result = load_split(std::string(kAsqpJson), opts);
  CHECK(result.report.ok());
  REQUIRE(result.split.records.size() == 1);
  const auto& tuples = result.split.records[0].tuples;
  REQUIRE(tuples.size() == 2);
  CHECK(tuples[0].category == std::optional<std::string>{"FOOD#QUALITY"});
  CHECK(tuples[1].va.arousal == doctest::Approx(8.0));
}

TEST_CASE("load_split rejects out-of-range VA with a locator") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string bad = R"([{"ID": "x", "Text": "t",
    "Aspect_VA": [{"Aspect": "a", "VA": "9.50#5.00"}]}])";
  const auto result = load_split(bad, opts);
  CHECK_FALSE(result.report.ok());
  CHECK(result.split.records.empty());
  CHECK(result.report.issues[0].locator.find("record 0") != std::string::npos);
}

TEST_CASE("malformed records are reported, valid ones kept") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string mixed =
      R"({"ID": "ok1", "Text": "fine food", "Aspect_VA": [{"Aspect": "food", "VA": "7.00#6.00"}]}
not json at all
{"ID": "bad1", "Text": "t", "Aspect_VA": [{"Aspect": "a", "VA": "nope"}]}
{"ID": "ok2", "Text": "fine tea", "Aspect_VA": [{"Aspect": "tea", "VA": "6.00#5.00"}]}
)";
  const auto result = load_split(mixed, opts);
  CHECK(result.split.shape == ContainerShape::Lines);
  CHECK(result.split.records.size() == 2);
  CHECK(result.report.error_count() == 2);
  // line locators present
  bool found_line_2 = false;
  for (const auto& issue : result.report.issues) {
    if (issue.locator.find("line 2") != std::string::npos) found_line_2 = true;
  }
  CHECK(found_line_2);
}

TEST_CASE("duplicate IDs are a hard error") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string dup =
      R"([{"ID": "a", "Text": "x", "Aspect_VA": [{"Aspect": "x", "VA": "5.00#5.00"}]},
          {"ID": "a", "Text": "y", "Aspect_VA": [{"Aspect": "y", "VA": "5.00#5.00"}]}])";
  const auto result = load_split(dup, opts);
  CHECK(result.split.records.size() == 1);
  CHECK(result.report.error_count() == 1);
}

TEST_CASE("aspect not in text is a warning, not an error") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string text =
      R"([{"ID": "a", "Text": "the soup was cold", "Aspect_VA": [{"Aspect": "service", "VA": "3.00#6.00"}]}])";
  const auto result = load_split(text, opts);
  CHECK(result.report.ok());
  CHECK(result.report.warning_count() == 1);
  CHECK(result.split.records.size() == 1);
}

TEST_CASE("category is mandatory in ASQP and forbidden in ASTE") {
  LoadOptions opts;
  opts.subtask = Subtask::ASQP;
  const std::string no_cat =
      R"([{"ID": "a", "Text": "x", "Quadruplet": [{"Aspect": "x", "Opinion": "y", "VA": "5.00#5.00"}]}])";
  CHECK_FALSE(load_split(no_cat, opts).report.ok());

  opts.subtask = Subtask::ASTE;
  const std::string with_cat =
      R"([{"ID": "a", "Text": "x", "Triplet": [{"Aspect": "x", "Opinion": "y", "Category": "A#B", "VA": "5.00#5.00"}]}])";
  CHECK_FALSE(load_split(with_cat, opts).report.ok());
}

TEST_CASE("flatten_asr produces one row per (review, aspect)") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const auto split = load_split(std::string(kAsrJson), opts).split;
  const auto rows = flatten_asr(split);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].review_id == rows[1].review_id);
  CHECK(rows[0].aspect == Term{"diner food"});
  CHECK(rows[1].aspect == Term{"breakfast"});

  SUBCASE("empty split flattens to nothing") {
    DatasetSplit empty;
    empty.subtask = Subtask::ASR;
    CHECK(flatten_asr(empty).empty());
  }

  SUBCASE("row count is the sum of aspects per review") {
    std::string three = R"([)";
    for (int r = 0; r < 3; ++r) {
      if (r > 0) three += ",";
      three += R"({"ID": "r)" + std::to_string(r) + R"(", "Text": "text )" +
               std::to_string(r) + R"(", "Aspect_VA": [)";
      for (int a = 0; a <= r; ++a) {
        if (a > 0) three += ",";
        three += R"({"Aspect": "a)" + std::to_string(a) + R"(", "VA": "5.00#5.00"})";
      }
      three += "]}";
    }
    three += "]";
    const auto s = load_split(three, opts);
    REQUIRE(s.report.ok());
    CHECK(flatten_asr(s.split).size() == 1 + 2 + 3);
  }
}

TEST_CASE("group_predictions inverts flatten_asr") {
  LoadOptions opts;
  opts.subtask = Subtask::ASR;
  const std::string two = R"([
    {"ID": "r1", "Text": "alpha beta", "Aspect_VA": [{"Aspect": "alpha", "VA": "7.00#6.00"},
                                                      {"Aspect": "beta", "VA": "3.00#4.00"}]},
    {"ID": "r2", "Text": "gamma", "Aspect_VA": [{"Aspect": "gamma", "VA": "5.00#5.00"}]}
  ])";
  const auto split = load_split(two, opts).split;
  const auto skeleton = flatten_asr(split);

  std::vector<PredictionRow> rows;
  for (const auto& row : skeleton) {
    rows.push_back({row.review_id, row.aspect, row.target});
  }

  SUBCASE("gold VAs reproduce the original payload") {
    const auto entries = group_predictions(rows, skeleton);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].id == "r1");
    REQUIRE(entries[0].aspect_va.size() == 2);
    CHECK(entries[0].aspect_va[0] == split.records[0].aspect_entries[0]);
    CHECK(entries[1].aspect_va[0] == split.records[1].aspect_entries[0]);
    // Full payload equality through the writer.
    CHECK(write_submission(entries, Subtask::ASR) ==
          write_submission(to_entries(split), Subtask::ASR));
  }

  SUBCASE("interleaved row order still groups correctly") {
    std::swap(rows[0], rows[2]);
    const auto entries = group_predictions(rows, skeleton);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].aspect_va.size() == 2);
    CHECK(entries[1].aspect_va.size() == 1);
  }

  SUBCASE("a missing row is a completeness error naming the key") {
    rows.pop_back();
    CHECK_THROWS_WITH_AS(group_predictions(rows, skeleton),
                         doctest::Contains("(r2, gamma)"), InvariantError);
  }

  SUBCASE("an unknown extra row is rejected") {
    rows.push_back({"r9", Term{"ghost"}, {5.0, 5.0}});
    CHECK_THROWS_AS(group_predictions(rows, skeleton), InvariantError);
  }

  SUBCASE("duplicate aspects within a review are positional") {
    const std::string dup = R"([
      {"ID": "d1", "Text": "loud loud", "Aspect_VA": [{"Aspect": "loud", "VA": "2.00#8.00"},
                                                       {"Aspect": "loud", "VA": "4.00#6.00"}]}
    ])";
    const auto dup_split = load_split(dup, opts).split;
    const auto dup_skeleton = flatten_asr(dup_split);
    std::vector<PredictionRow> dup_rows;
    for (const auto& row : dup_skeleton) {
      dup_rows.push_back({row.review_id, row.aspect, row.target});
    }
    const auto entries = group_predictions(dup_rows, dup_skeleton);
    REQUIRE(entries[0].aspect_va.size() == 2);
    CHECK(entries[0].aspect_va[0].va.valence == doctest::Approx(2.0));
    CHECK(entries[0].aspect_va[1].va.valence == doctest::Approx(4.0));
  }
}

TEST_CASE("write_submission emits the task shapes") {
  SUBCASE("ASR entry") {
    std::vector<SubmissionEntry> entries;
    entries.push_back({"id1", std::nullopt,
                       {{Term{"food"}, {7.25, 6.75}}}, {}});
    const std::string text = write_submission(entries, Subtask::ASR);
    CHECK(text.find("\"ID\": \"id1\"") != std::string::npos);
    CHECK(text.find("\"Aspect_VA\"") != std::string::npos);
    CHECK(text.find("\"7.25#6.75\"") != std::string::npos);
    CHECK(text.find("\"Text\"") == std::string::npos);
  }
  SUBCASE("empty entry list gives an empty container") {
    CHECK(write_submission({}, Subtask::ASR) == "[]\n");
    CHECK(write_submission({}, Subtask::ASR, ContainerShape::Lines) == "");
  }
  SUBCASE("invalid payloads are refused") {
    std::vector<SubmissionEntry> entries;
    entries.push_back({"id1", std::nullopt, {{Term{""}, {5.0, 5.0}}}, {}});
    CHECK_THROWS_AS(write_submission(entries, Subtask::ASR), InvariantError);
    entries[0].aspect_va[0].aspect = Term{"ok"};
    entries[0].aspect_va[0].va = {0.5, 5.0};
    CHECK_THROWS_AS(write_submission(entries, Subtask::ASR), RangeError);
  }
}

namespace {

void check_round_trip(const char* text, Subtask subtask) {
  LoadOptions opts;
  opts.subtask = subtask;
  const auto first = load_split(std::string(text), opts);
  REQUIRE(first.report.ok());
  const std::string written =
      write_submission(to_entries(first.split), subtask, first.split.shape);
  const auto second = load_split(written, opts);
  REQUIRE(second.report.ok());
  REQUIRE(second.split.records.size() == first.split.records.size());
  for (size_t i = 0; i < first.split.records.size(); ++i) {
    const auto& a = first.split.records[i];
    const auto& b = second.split.records[i];
    CHECK(a.review.id == b.review.id);
    CHECK(a.review.text == b.review.text);
    CHECK(a.aspect_entries == b.aspect_entries);
    CHECK(a.tuples == b.tuples);
  }
  // And the writer is a fixed point from there.
  CHECK(write_submission(to_entries(second.split), subtask, second.split.shape) ==
        written);
}

}  // namespace

TEST_CASE("gold files survive load -> write -> load") {
  check_round_trip(kAsrJson, Subtask::ASR);
  check_round_trip(kAsteJson, Subtask::ASTE);
  check_round_trip(kAsqpJson, Subtask::ASQP);
}

TEST_CASE("random splits round-trip through the writer") {
  Rng rng(99);
  const char* aspects[] = {"food", "service", "battery", "NULL", "screen"};
  const char* opinions[] = {"great", "terrible", "fine", "NULL"};
  const char* categories[] = {"FOOD#QUALITY", "SERVICE#GENERAL", "LAPTOP#PRICE"};

  for (int round = 0; round < 20; ++round) {
    const Subtask subtask = round % 2 == 0 ? Subtask::ASTE : Subtask::ASQP;
    std::string text = "[";
    const int n_records = 1 + static_cast<int>(rng.bounded(4));
    for (int r = 0; r < n_records; ++r) {
      if (r > 0) text += ",";
      text += R"({"ID": "rev)" + std::to_string(r) + R"(", "Text": "text body", ")";
      text += subtask == Subtask::ASTE ? "Triplet" : "Quadruplet";
      text += R"(": [)";
      const int n_tuples = static_cast<int>(rng.bounded(4));
      for (int t = 0; t < n_tuples; ++t) {
        if (t > 0) text += ",";
        text += R"({"Aspect": ")" + std::string(aspects[rng.bounded(5)]) + "\"";
        if (subtask == Subtask::ASQP) {
          text += R"(, "Category": ")" + std::string(categories[rng.bounded(3)]) + "\"";
        }
        text += R"(, "Opinion": ")" + std::string(opinions[rng.bounded(4)]) + "\"";
        const VAPair va{1.0 + rng.bounded(801) / 100.0,
                        1.0 + rng.bounded(801) / 100.0};
        text += R"(, "VA": ")" + format_va_string(va) + "\"}";
      }
      text += "]}";
    }
    text += "]";
    check_round_trip(text.c_str(), subtask);
  }
}
