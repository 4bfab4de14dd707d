#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "dimabsa/genio.hpp"
#include "dimabsa/rng.hpp"

using namespace dimabsa;
using namespace dimabsa::gen;

namespace {

SentimentTuple make_tuple(const char* aspect, const char* opinion,
                          const VAPair& va, const char* category = nullptr) {
  SentimentTuple t;
  t.aspect = parse_term(aspect);
  t.opinion = parse_term(opinion);
  if (category) t.category = category;
  t.va = va;
  return t;
}

PromptSpec base_spec(Subtask subtask = Subtask::ASTE) {
  PromptSpec spec;
  spec.subtask = subtask;
  spec.instruction = "Extract the triplets.";
  spec.null_policy = "Avoid NULL unless the target is implicit.";
  spec.review_text = "Customer service was fantastic and food was awesome";
  if (subtask == Subtask::ASQP) {
    spec.categories = {"FOOD#QUALITY", "SERVICE#GENERAL"};
  }
  return spec;
}

size_t count_occurrences(const std::string& text, const std::string& needle) {
  size_t count = 0;
  for (size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("prompt profiles carry the exact family delimiters") {
  const auto llama = PromptProfile::llama();
  CHECK(llama.begin_of_text == "<|begin_of_text|>");
  CHECK(llama.turn_close == "<|eot_id|>");
  const auto qwen = PromptProfile::qwen();
  CHECK(qwen.turn_open == "<|im_start|>");
  CHECK(qwen.turn_close == "<|im_end|>");
  CHECK(qwen.greedy_decoding);
  CHECK_THROWS_AS(PromptProfile::from_name("gpt"), FormatError);
}

TEST_CASE("build_prompt") {
  SUBCASE("qwen output begins with <|im_start|>") {
    const std::string prompt = build_prompt(base_spec(), PromptProfile::qwen());
    CHECK(prompt.rfind("<|im_start|>", 0) == 0);
  }

  SUBCASE("llama output uses begin_of_text / eot_id") {
    const std::string prompt = build_prompt(base_spec(), PromptProfile::llama());
    CHECK(prompt.rfind("<|begin_of_text|>", 0) == 0);
    CHECK(count_occurrences(prompt, "<|eot_id|>") == 2);
  }

  SUBCASE("zero demonstrations give exactly two closed turns") {
    const std::string prompt = build_prompt(base_spec(), PromptProfile::qwen());
    CHECK(count_occurrences(prompt, "<|im_end|>") == 2);
    // and the assistant cue is open at the end
    CHECK(prompt.substr(prompt.size() - std::string("<|im_start|>assistant\n").size()) ==
          "<|im_start|>assistant\n");
  }

  SUBCASE("demonstrations appear in order as input-output pairs") {
    PromptSpec spec = base_spec();
    spec.demonstrations = {
        {"first demo review", {make_tuple("food", "great", {7.0, 7.0})}},
        {"second demo review", {make_tuple("staff", "slow", {3.0, 5.0})}},
        {"third demo review", {}}};
    const std::string prompt = build_prompt(spec, PromptProfile::qwen());
    const auto p1 = prompt.find("first demo review");
    const auto p2 = prompt.find("second demo review");
    const auto p3 = prompt.find("third demo review");
    const auto pr = prompt.find(spec.review_text);
    REQUIRE(p1 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(p2 < p3);
    CHECK(p3 < pr);
    // each demo carries its gold JSON
    CHECK(prompt.find("\"Aspect\": \"food\"") != std::string::npos);
    CHECK(prompt.find("\"Valence\": 7.00") != std::string::npos);
    // 2 + 2 * demos closed turns
    CHECK(count_occurrences(prompt, "<|im_end|>") == 8);
  }

  SUBCASE("byte-identical across calls") {
    PromptSpec spec = base_spec(Subtask::ASQP);
    spec.include_null_policy = true;
    const std::string a = build_prompt(spec, PromptProfile::llama());
    const std::string b = build_prompt(spec, PromptProfile::llama());
    CHECK(a == b);
  }

  SUBCASE("category list is embedded for ASQP only") {
    const std::string asqp = build_prompt(base_spec(Subtask::ASQP),
                                          PromptProfile::qwen());
    CHECK(asqp.find("FOOD#QUALITY, SERVICE#GENERAL") != std::string::npos);
    const std::string aste = build_prompt(base_spec(), PromptProfile::qwen());
    CHECK(aste.find("Valid categories") == std::string::npos);

    PromptSpec bad = base_spec(Subtask::ASQP);
    bad.categories.clear();
    CHECK_THROWS_AS(build_prompt(bad, PromptProfile::qwen()), InvariantError);
    PromptSpec bad2 = base_spec();
    bad2.categories = {"FOOD#QUALITY"};
    CHECK_THROWS_AS(build_prompt(bad2, PromptProfile::qwen()), InvariantError);
  }

  SUBCASE("null policy appears only when requested") {
    PromptSpec spec = base_spec();
    CHECK(build_prompt(spec, PromptProfile::qwen()).find("implicit") ==
          std::string::npos);
    spec.include_null_policy = true;
    CHECK(build_prompt(spec, PromptProfile::qwen()).find("implicit") !=
          std::string::npos);
  }

  SUBCASE("missing instruction is an error") {
    PromptSpec spec = base_spec();
    spec.instruction.clear();
    CHECK_THROWS_AS(build_prompt(spec, PromptProfile::qwen()), Error);
  }
}

TEST_CASE("sample_demos") {
  io::DatasetSplit train;
  train.subtask = Subtask::ASTE;
  for (int i = 0; i < 10; ++i) {
    AnnotatedRecord rec;
    rec.review.id = "r" + std::to_string(i);
    rec.review.text = "text " + std::to_string(i);
    rec.subtask = Subtask::ASTE;
    rec.tuples.push_back(make_tuple("a", "o", {5.0, 5.0}));
    train.records.push_back(rec);
  }

  CHECK(sample_demos(train, 0, 1).empty());
  CHECK_THROWS_AS(sample_demos(train, 11, 1), InvariantError);

  SUBCASE("deterministic and distinct") {
    const auto a = sample_demos(train, 3, 42);
    const auto b = sample_demos(train, 3, 42);
    REQUIRE(a.size() == 3);
    std::set<std::string> ids;
    for (size_t i = 0; i < 3; ++i) {
      CHECK(a[i].review.id == b[i].review.id);
      ids.insert(a[i].review.id);
    }
    CHECK(ids.size() == 3);
  }

  SUBCASE("selection sets are uniform (chi-square over combinations)") {
    io::DatasetSplit small;
    small.subtask = Subtask::ASTE;
    for (int i = 0; i < 5; ++i) {
      AnnotatedRecord rec;
      rec.review.id = std::to_string(i);
      rec.subtask = Subtask::ASTE;
      small.records.push_back(rec);
    }
    // C(5,2) = 10 possible pairs; 10,000 draws.
    std::map<std::string, int> cells;
    for (int draw = 0; draw < 10000; ++draw) {
      auto picked = sample_demos(small, 2, 1000 + draw);
      std::vector<std::string> ids = {picked[0].review.id, picked[1].review.id};
      std::sort(ids.begin(), ids.end());
      ++cells[ids[0] + "," + ids[1]];
    }
    REQUIRE(cells.size() == 10);
    const double expected = 10000.0 / 10.0;
    double stat = 0.0;
    for (const auto& [key, count] : cells) {
      stat += (count - expected) * (count - expected) / expected;
    }
    CHECK(stat < 21.666);  // chi-square 0.99 quantile, 9 dof
  }
}

TEST_CASE("prompt registry") {
  const auto registry = PromptRegistry::builtin();
  const auto entry =
      registry.lookup(Language::ZHO, Domain::Laptop, Subtask::ASQP);
  CHECK(entry.instruction.find("Category") != std::string::npos);
  CHECK_FALSE(entry.null_policy.empty());
  CHECK_THROWS_AS(registry.lookup(Language::ENG, Domain::Finance, Subtask::ASTE),
                  Error);

  SUBCASE("merge_file overrides the builtin text") {
    const std::string path = "registry_override_test.json";
    {
      std::ofstream f(path);
      f << R"({"ENG/Restaurant/ASTE": {"instruction": "OFFICIAL TEXT",
               "null_policy": "OFFICIAL NULL"}})";
    }
    auto merged = PromptRegistry::builtin();
    merged.merge_file(path);
    std::remove(path.c_str());
    const auto eng =
        merged.lookup(Language::ENG, Domain::Restaurant, Subtask::ASTE);
    CHECK(eng.instruction == "OFFICIAL TEXT");
    // other keys untouched
    const auto zho = merged.lookup(Language::ZHO, Domain::Restaurant, Subtask::ASTE);
    CHECK(zho.instruction != "OFFICIAL TEXT");
  }
}

TEST_CASE("parse_generation") {
  SUBCASE("clean array") {
    const auto rec = parse_generation(
        R"([{"Aspect":"food","Opinion":"awesome","Valence":7.67,"Arousal":7.67}])",
        Subtask::ASTE);
    REQUIRE(rec.parsed.size() == 1);
    CHECK(rec.parsed[0].aspect == Term{"food"});
    CHECK(rec.parsed[0].opinion == Term{"awesome"});
    CHECK(rec.parsed[0].va.valence == doctest::Approx(7.67));
    CHECK(rec.rejected == 0);
  }

  SUBCASE("leading prose is stripped; content matches a strict parse") {
    const std::string payload =
        R"([{"Aspect": "food", "Opinion": "awesome", "Valence": 7.67, "Arousal": 7.33}])";
    const std::string raw = "Sure! Here is the answer: " + payload + " Hope it helps.";
    const auto rec = parse_generation(raw, Subtask::ASTE);
    REQUIRE(rec.parsed.size() == 1);
    bool stripped = false;
    for (const auto& r : rec.repairs) stripped |= r.kind == "stripped_prose";
    CHECK(stripped);
    // strict-parser oracle on the embedded array
    const auto strict = nlohmann::json::parse(payload);
    CHECK(rec.parsed[0].aspect == Term{strict[0]["Aspect"].get<std::string>()});
    CHECK(rec.parsed[0].va.valence ==
          doctest::Approx(strict[0]["Valence"].get<double>()));
    CHECK(rec.parsed[0].va.arousal ==
          doctest::Approx(strict[0]["Arousal"].get<double>()));
  }

  SUBCASE("empty array parses to nothing with no rejections") {
    const auto rec = parse_generation("[]", Subtask::ASTE);
    CHECK(rec.parsed.empty());
    CHECK(rec.rejected == 0);
    CHECK(rec.repairs.empty());
  }

  SUBCASE("no array at all is a whole-output rejection event") {
    const auto rec = parse_generation("I could not find any tuples.",
                                      Subtask::ASTE);
    CHECK(rec.parsed.empty());
    REQUIRE(rec.repairs.size() == 1);
    CHECK(rec.repairs[0].kind == "output_rejected");
  }

  SUBCASE("an unclosed bracket is skipped in favor of a later array") {
    const auto rec = parse_generation(
        R"(score [8/10 ... final: [{"Aspect":"a","Opinion":"b","Valence":5,"Arousal":5}])",
        Subtask::ASTE);
    CHECK(rec.parsed.size() == 1);
  }

  SUBCASE("numeric strings are coerced with a repair event") {
    const auto rec = parse_generation(
        R"([{"Aspect":"a","Opinion":"b","Valence":"7.5","Arousal":6}])",
        Subtask::ASTE);
    REQUIRE(rec.parsed.size() == 1);
    CHECK(rec.parsed[0].va.valence == doctest::Approx(7.5));
    bool coerced = false;
    for (const auto& r : rec.repairs) coerced |= r.kind == "coerced_numeric_string";
    CHECK(coerced);
  }

  SUBCASE("items missing required keys are rejected and counted") {
    const auto rec = parse_generation(
        R"([{"Aspect":"a","Valence":5,"Arousal":5},
            {"Aspect":"a","Opinion":"b","Valence":5,"Arousal":5},
            "just a string",
            {"Aspect":"a","Opinion":"b","Valence":"x","Arousal":5}])",
        Subtask::ASTE);
    CHECK(rec.parsed.size() == 1);
    CHECK(rec.rejected == 3);
  }

  SUBCASE("ASQP requires a valid category per item") {
    const auto rec = parse_generation(
        R"([{"Aspect":"a","Category":"FOOD#QUALITY","Opinion":"b","Valence":5,"Arousal":5},
            {"Aspect":"a","Category":"notacategory","Opinion":"b","Valence":5,"Arousal":5},
            {"Aspect":"a","Opinion":"b","Valence":5,"Arousal":5}])",
        Subtask::ASQP);
    CHECK(rec.parsed.size() == 1);
    CHECK(rec.rejected == 2);
    CHECK(rec.parsed[0].category == std::optional<std::string>{"FOOD#QUALITY"});
  }

  SUBCASE("NULL strings and JSON nulls both map to the sentinel") {
    const auto rec = parse_generation(
        R"([{"Aspect":"NULL","Opinion":null,"Valence":5,"Arousal":5}])",
        Subtask::ASTE);
    REQUIRE(rec.parsed.size() == 1);
    CHECK_FALSE(rec.parsed[0].aspect.has_value());
    CHECK_FALSE(rec.parsed[0].opinion.has_value());
  }

  SUBCASE("ASR mode is rejected") {
    CHECK_THROWS_AS(parse_generation("[]", Subtask::ASR), InvariantError);
  }
}

TEST_CASE("clamp_tuples") {
  GenerationRecord rec;
  rec.parsed.push_back(make_tuple("a", "b", {9.5, 0.0}));
  rec.parsed.push_back(make_tuple("c", "d", {7.67, 7.67}));

  const auto once = clamp_tuples(rec);
  REQUIRE(once.parsed.size() == 2);
  CHECK(once.parsed[0].va == VAPair{9.0, 1.0});
  CHECK(once.parsed[1].va == VAPair{7.67, 7.67});

  const auto twice = clamp_tuples(once);
  CHECK(twice.parsed == once.parsed);
  CHECK(twice.rejected == once.rejected);
  CHECK(twice.repairs.size() == once.repairs.size());  // no new events

  SUBCASE("non-finite VA drops the item") {
    GenerationRecord bad;
    bad.parsed.push_back(make_tuple("a", "b", {std::nan(""), 5.0}));
    const auto cleaned = clamp_tuples(bad);
    CHECK(cleaned.parsed.empty());
    CHECK(cleaned.rejected == 1);
  }
}

TEST_CASE("to_submission_tuples joins VA back into V#A") {
  GenerationRecord rec;
  rec.parsed.push_back(make_tuple("food", "awesome", {7.67, 7.67}));
  rec.parsed.push_back(make_tuple("bar", "loud", {9.0, 1.0}));
  const auto entry = to_submission_tuples(rec, Subtask::ASTE, "rev1");
  CHECK(entry.id == "rev1");
  const std::string text = io::write_submission({entry}, Subtask::ASTE);
  CHECK(text.find("\"7.67#7.67\"") != std::string::npos);
  CHECK(text.find("\"9.00#1.00\"") != std::string::npos);
}

TEST_CASE("parse o serialize recovers gold tuples exactly") {
  Rng rng(55);
  const char* aspects[] = {"food", "Customer service", "NULL"};
  const char* opinions[] = {"great", "awful", "NULL"};
  const char* categories[] = {"FOOD#QUALITY", "SERVICE#GENERAL"};

  // Gold VAs enter the system as V#A strings, so build them the same way;
  // exact recovery is defined against the parsed wire value.
  auto wire_va = [&rng]() {
    const VAPair raw{1.0 + rng.bounded(801) / 100.0,
                     1.0 + rng.bounded(801) / 100.0};
    return io::parse_va_string(io::format_va_string(raw));
  };

  for (int round = 0; round < 100; ++round) {
    const Subtask subtask = round % 2 == 0 ? Subtask::ASTE : Subtask::ASQP;
    std::vector<SentimentTuple> gold;
    const size_t n = rng.bounded(5);
    for (size_t i = 0; i < n; ++i) {
      gold.push_back(make_tuple(
          aspects[rng.bounded(3)], opinions[rng.bounded(3)], wire_va(),
          subtask == Subtask::ASQP ? categories[rng.bounded(2)] : nullptr));
    }
    const std::string serialized = serialize_generation(gold, subtask);
    const auto parsed = clamp_tuples(parse_generation(serialized, subtask));
    CHECK(parsed.rejected == 0);
    REQUIRE(parsed.parsed.size() == gold.size());
    for (size_t i = 0; i < gold.size(); ++i) {
      CHECK(parsed.parsed[i] == gold[i]);
    }
  }
}

TEST_CASE("parse -> clamp -> submit reproduces a gold file's payload") {
  const char* gold_text = R"([
    {"ID": "rest26_aste_dev_2",
     "Text": "Customer service was fantastic and food was awesome",
     "Triplet": [{"Aspect": "Customer service", "Opinion": "fantastic", "VA": "7.33#7.33"},
                 {"Aspect": "food", "Opinion": "awesome", "VA": "7.67#7.67"}]},
    {"ID": "aste_dev_9", "Text": "meh",
     "Triplet": [{"Aspect": "NULL", "Opinion": "meh", "VA": "4.50#3.00"}]}
  ])";
  io::LoadOptions opts;
  opts.subtask = Subtask::ASTE;
  const auto gold = io::load_split(std::string(gold_text), opts);
  REQUIRE(gold.report.ok());

  std::vector<io::SubmissionEntry> entries;
  for (const auto& rec : gold.split.records) {
    const std::string generated =
        serialize_generation(rec.tuples, Subtask::ASTE);
    const auto parsed =
        clamp_tuples(parse_generation(generated, Subtask::ASTE));
    CHECK(parsed.rejected == 0);
    entries.push_back(
        to_submission_tuples(parsed, Subtask::ASTE, rec.review.id));
  }
  const std::string written = io::write_submission(entries, Subtask::ASTE);
  const auto reloaded = io::load_split(written, opts);
  REQUIRE(reloaded.report.ok());
  REQUIRE(reloaded.split.records.size() == gold.split.records.size());
  for (size_t i = 0; i < gold.split.records.size(); ++i) {
    CHECK(reloaded.split.records[i].review.id ==
          gold.split.records[i].review.id);
    CHECK(reloaded.split.records[i].tuples == gold.split.records[i].tuples);
  }
}

TEST_CASE("gold demo serialization uses two-decimal numeric keys") {
  const std::string text = serialize_generation(
      {make_tuple("food", "awesome", {7.67, 7.67})}, Subtask::ASTE);
  CHECK(text == R"([{"Aspect": "food", "Opinion": "awesome", "Valence": 7.67, "Arousal": 7.67}])");
  const std::string padded = serialize_generation(
      {make_tuple("a", "b", {9.0, 1.0})}, Subtask::ASTE);
  CHECK(padded.find("\"Valence\": 9.00") != std::string::npos);
  CHECK(padded.find("\"Arousal\": 1.00") != std::string::npos);

  CHECK_THROWS_AS(serialize_generation({make_tuple("a", "b", {5, 5})},
                                       Subtask::ASQP),
                  InvariantError);
}

TEST_CASE("adapter config") {
  SUBCASE("defaults serialize with the published values") {
    AdapterTuneConfig cfg;
    const std::string doc = serialize_adapter_config(cfg);
    const auto json = nlohmann::json::parse(doc);
    CHECK(json["lora"]["rank"] == 16);
    CHECK(json["lora"]["alpha"] == 32.0);
    CHECK(json["lora"]["dropout"] == 0.2);
    CHECK(json["learning_rate"] == 2e-4);
    CHECK(json["max_seq_len"] == 2048);
    CHECK(json["quantization"] == "4-bit");
    CHECK(json["train_epochs"] == 1);
    CHECK(json["per_device_batch_size"] == 2);
    CHECK(json["gradient_accumulation_steps"] == 4);
    CHECK(json["optimizer"] == "paged_adamw_32bit");
    CHECK(json["lora"]["target_modules"].size() == 7);
  }

  SUBCASE("round trip") {
    AdapterTuneConfig cfg;
    cfg.rank = 8;
    cfg.alpha = 16.0;
    cfg.learning_rate = 1e-4;
    const AdapterTuneConfig back =
        parse_adapter_config(serialize_adapter_config(cfg));
    CHECK(back == cfg);
  }

  SUBCASE("invalid configs are rejected") {
    AdapterTuneConfig cfg;
    cfg.rank = 0;
    CHECK_THROWS_AS(serialize_adapter_config(cfg), RangeError);
    cfg.rank = 16;
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(serialize_adapter_config(cfg), RangeError);
    CHECK_THROWS_AS(parse_adapter_config("{}"), FormatError);
    CHECK_THROWS_AS(parse_adapter_config("not json"), FormatError);
  }
}
