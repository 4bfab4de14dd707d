#include "dimabsa/genio.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dimabsa/rng.hpp"

namespace dimabsa::gen {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

PromptProfile PromptProfile::llama() {
  return {ProfileFamily::LlamaStyle, "<|begin_of_text|>", "<|start_header_id|>",
          "<|eot_id|>", true};
}

PromptProfile PromptProfile::qwen() {
  return {ProfileFamily::QwenStyle, "", "<|im_start|>", "<|im_end|>", true};
}

PromptProfile PromptProfile::from_name(std::string_view name) {
  if (name == "llama") return llama();
  if (name == "qwen") return qwen();
  throw FormatError("unknown prompt profile: " + std::string(name) +
                    " (expected 'llama' or 'qwen')");
}

std::string PromptProfile::name() const {
  return family == ProfileFamily::LlamaStyle ? "llama" : "qwen";
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

void PromptSpec::validate() const {
  if (subtask == Subtask::ASR) {
    throw InvariantError("prompts are built for ASTE/ASQP, not ASR");
  }
  if (instruction.empty()) {
    throw Error("missing instruction for (" + to_string(language) + ", " +
                to_string(domain) + ")");
  }
  if (review_text.empty()) {
    throw InvariantError("prompt spec has an empty review text");
  }
  if (subtask == Subtask::ASQP && categories.empty()) {
    throw InvariantError("ASQP prompts need the domain's category list");
  }
  if (subtask == Subtask::ASTE && !categories.empty()) {
    throw InvariantError("ASTE prompts must omit the category list");
  }
}

namespace {

std::string system_block(const PromptSpec& spec) {
  std::string block = spec.instruction;
  if (spec.subtask == Subtask::ASQP) {
    block += "\nValid categories: ";
    for (size_t i = 0; i < spec.categories.size(); ++i) {
      if (i > 0) block += ", ";
      block += spec.categories[i];
    }
  }
  if (spec.include_null_policy && !spec.null_policy.empty()) {
    block += "\n" + spec.null_policy;
  }
  return block;
}

}  // namespace

std::string build_prompt(const PromptSpec& spec, const PromptProfile& profile) {
  spec.validate();

  std::string out;
  auto turn = [&](std::string_view role, const std::string& content) {
    if (profile.family == ProfileFamily::LlamaStyle) {
      out += profile.turn_open;
      out += role;
      out += "<|end_header_id|>\n\n";
      out += content;
      out += profile.turn_close;
    } else {
      out += profile.turn_open;
      out += role;
      out += "\n";
      out += content;
      out += profile.turn_close;
      out += "\n";
    }
  };

  out += profile.begin_of_text;
  turn("system", system_block(spec));
  for (const auto& demo : spec.demonstrations) {
    turn("user", demo.review_text);
    turn("assistant", serialize_generation(demo.gold, spec.subtask));
  }
  turn("user", spec.review_text);
  // Generation cue: an opened assistant turn with no content.
  if (profile.family == ProfileFamily::LlamaStyle) {
    out += profile.turn_open;
    out += "assistant<|end_header_id|>\n\n";
  } else {
    out += profile.turn_open;
    out += "assistant\n";
  }
  return out;
}

std::vector<AnnotatedRecord> sample_demos(const io::DatasetSplit& train,
                                          int k, uint64_t seed) {
  if (k < 0) throw RangeError("sample_demos: negative k");
  if (static_cast<size_t>(k) > train.records.size()) {
    throw InvariantError("sample_demos: asked for " + std::to_string(k) +
                         " demonstrations from " +
                         std::to_string(train.records.size()) + " records");
  }
  Rng rng(seed);
  std::vector<AnnotatedRecord> out;
  out.reserve(k);
  for (const size_t i : rng.sample_indices(train.records.size(), k)) {
    out.push_back(train.records[i]);
  }
  return out;
}

Demonstration to_demonstration(const AnnotatedRecord& record) {
  return {record.review.text, record.tuples};
}

// ---------------------------------------------------------------------------
// Instruction registry
// ---------------------------------------------------------------------------

std::string PromptRegistry::key(Language lang, Domain domain, Subtask subtask) {
  return to_string(lang) + "/" + to_string(domain) + "/" + to_string(subtask);
}

PromptRegistry PromptRegistry::builtin() {
  // English placeholder wording for every pair; the released per-language
  // templates are meant to be merged over these via merge_file, which is why
  // the keys are one-per-language even though the shipped text is shared.
  PromptRegistry registry;
  const Language langs[] = {Language::ENG, Language::ZHO, Language::JPN,
                            Language::RUS, Language::TAT, Language::UKR};
  const Domain domains[] = {Domain::Restaurant, Domain::Laptop, Domain::Hotel};
  for (const auto lang : langs) {
    for (const auto domain : domains) {
      const std::string domain_name = to_string(domain);
      InstructionEntry aste;
      aste.instruction =
          "Extract every sentiment triplet from the " + domain_name +
          " review below. Respond with a JSON array only; each element must "
          "be an object with the keys \"Aspect\", \"Opinion\", \"Valence\" "
          "and \"Arousal\". Valence and Arousal are numbers in [1.00, 9.00] "
          "with two decimals. Copy aspect and opinion spans verbatim from "
          "the review; they are case-sensitive.";
      aste.null_policy =
          "Use the string \"NULL\" for an aspect or opinion only when the "
          "target is genuinely implicit; prefer an explicit span from the "
          "review whenever one exists.";
      InstructionEntry asqp = aste;
      asqp.instruction =
          "Extract every sentiment quadruplet from the " + domain_name +
          " review below. Respond with a JSON array only; each element must "
          "be an object with the keys \"Aspect\", \"Category\", \"Opinion\", "
          "\"Valence\" and \"Arousal\". Category must be one of the listed "
          "ENTITY#ATTRIBUTE labels. Valence and Arousal are numbers in "
          "[1.00, 9.00] with two decimals. Copy aspect and opinion spans "
          "verbatim from the review; they are case-sensitive.";
      registry.entries_[key(lang, domain, Subtask::ASTE)] = aste;
      registry.entries_[key(lang, domain, Subtask::ASQP)] = asqp;
    }
  }
  return registry;
}

void PromptRegistry::merge_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open prompt registry: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw FormatError("prompt registry is not a JSON object: " + path);
  }
  for (const auto& [k, v] : doc.items()) {
    InstructionEntry entry;
    entry.instruction = v.value("instruction", "");
    entry.null_policy = v.value("null_policy", "");
    if (entry.instruction.empty()) {
      throw FormatError("registry entry '" + k + "' has no instruction");
    }
    entries_[k] = std::move(entry);
  }
}

InstructionEntry PromptRegistry::lookup(Language lang, Domain domain,
                                        Subtask subtask) const {
  const auto it = entries_.find(key(lang, domain, subtask));
  if (it == entries_.end()) {
    throw Error("missing instruction for (" + to_string(lang) + ", " +
                to_string(domain) + ", " + to_string(subtask) + ")");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Generated-output parsing
// ---------------------------------------------------------------------------

namespace {

// Returns one past the end of the bracketed region starting at `start`
// (raw[start] == '['), or npos if it never closes. String-aware.
size_t match_bracket(const std::string& raw, size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
      if (depth == 0) return i + 1;
      if (depth < 0) return std::string::npos;
    }
  }
  return std::string::npos;
}

std::optional<double> coerce_number(const json& v, GenerationRecord& rec,
                                    const char* key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double parsed = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) {
      rec.repairs.push_back({"coerced_numeric_string",
                             std::string(key) + " given as string \"" + s + "\""});
      return parsed;
    }
  }
  return std::nullopt;
}

std::optional<Term> read_generated_term(const json& item, const char* key,
                                        GenerationRecord& rec) {
  const auto it = item.find(key);
  if (it == item.end()) return std::nullopt;
  if (it->is_null()) {
    rec.repairs.push_back({"null_literal",
                           std::string(key) + " given as JSON null"});
    return Term{std::nullopt};
  }
  if (!it->is_string()) return std::nullopt;
  const Term t = parse_term(it->get<std::string>());
  if (t && t->empty()) return std::nullopt;
  return t;
}

}  // namespace

GenerationRecord parse_generation(const std::string& raw, Subtask subtask) {
  if (subtask == Subtask::ASR) {
    throw InvariantError("parse_generation handles ASTE/ASQP output only");
  }
  GenerationRecord rec;
  rec.raw = raw;

  json array;
  size_t found_at = std::string::npos;
  size_t found_end = 0;
  for (size_t pos = raw.find('['); pos != std::string::npos;
       pos = raw.find('[', pos + 1)) {
    const size_t end = match_bracket(raw, pos);
    if (end == std::string::npos) continue;
    json candidate = json::parse(raw.begin() + pos, raw.begin() + end,
                                 nullptr, false);
    if (!candidate.is_discarded() && candidate.is_array()) {
      array = std::move(candidate);
      found_at = pos;
      found_end = end;
      break;
    }
  }
  if (found_at == std::string::npos) {
    rec.repairs.push_back({"output_rejected", "no well-formed JSON array found"});
    return rec;
  }
  const bool leading = raw.find_first_not_of(" \t\r\n") < found_at;
  const bool trailing = raw.find_first_not_of(" \t\r\n", found_end) != std::string::npos;
  if (leading || trailing) {
    rec.repairs.push_back({"stripped_prose",
                           "text around the JSON array was ignored"});
  }

  const bool want_category = subtask == Subtask::ASQP;
  for (const auto& item : array) {
    if (!item.is_object()) {
      ++rec.rejected;
      rec.repairs.push_back({"item_not_object", item.dump()});
      continue;
    }
    SentimentTuple t;
    const auto aspect = read_generated_term(item, "Aspect", rec);
    const auto opinion = read_generated_term(item, "Opinion", rec);
    if (!aspect || !opinion) {
      ++rec.rejected;
      rec.repairs.push_back({"item_missing_key",
                             "Aspect/Opinion missing or invalid: " + item.dump()});
      continue;
    }
    t.aspect = *aspect;
    t.opinion = *opinion;

    if (want_category) {
      const auto cat = item.find("Category");
      if (cat == item.end() || !cat->is_string() ||
          !valid_category(cat->get<std::string>())) {
        ++rec.rejected;
        rec.repairs.push_back({"item_missing_key",
                               "Category missing or invalid: " + item.dump()});
        continue;
      }
      t.category = cat->get<std::string>();
    } else if (item.contains("Category")) {
      rec.repairs.push_back({"ignored_category",
                             "Category key present in triplet output"});
    }

    const auto v_it = item.find("Valence");
    const auto a_it = item.find("Arousal");
    if (v_it == item.end() || a_it == item.end()) {
      ++rec.rejected;
      rec.repairs.push_back({"item_missing_key",
                             "Valence/Arousal missing: " + item.dump()});
      continue;
    }
    const auto valence = coerce_number(*v_it, rec, "Valence");
    const auto arousal = coerce_number(*a_it, rec, "Arousal");
    if (!valence || !arousal) {
      ++rec.rejected;
      rec.repairs.push_back({"item_missing_key",
                             "Valence/Arousal not numeric: " + item.dump()});
      continue;
    }
    t.va = {*valence, *arousal};
    rec.parsed.push_back(std::move(t));
  }
  return rec;
}

GenerationRecord clamp_tuples(GenerationRecord rec) {
  std::vector<SentimentTuple> kept;
  kept.reserve(rec.parsed.size());
  for (auto& t : rec.parsed) {
    if (!std::isfinite(t.va.valence) || !std::isfinite(t.va.arousal)) {
      ++rec.rejected;
      rec.repairs.push_back({"nonfinite_va", "tuple dropped"});
      continue;
    }
    const VAPair before = t.va;
    t.va.valence = std::clamp(t.va.valence, kVaMin, kVaMax);
    t.va.arousal = std::clamp(t.va.arousal, kVaMin, kVaMax);
    if (!(t.va == before)) {
      rec.repairs.push_back(
          {"clamped_va", io::format_va_string(t.va) + " from out-of-range"});
    }
    kept.push_back(std::move(t));
  }
  rec.parsed = std::move(kept);
  return rec;
}

io::SubmissionEntry to_submission_tuples(const GenerationRecord& rec,
                                         Subtask subtask,
                                         const std::string& id) {
  if (subtask == Subtask::ASR) {
    throw InvariantError("generation records map to ASTE/ASQP submissions");
  }
  io::SubmissionEntry entry;
  entry.id = id;
  entry.tuples = rec.parsed;
  return entry;
}

std::string serialize_generation(const std::vector<SentimentTuple>& tuples,
                                 Subtask subtask) {
  if (subtask == Subtask::ASR) {
    throw InvariantError("serialize_generation handles ASTE/ASQP tuples only");
  }
  const bool want_category = subtask == Subtask::ASQP;
  auto quoted = [](const std::string& s) { return json(s).dump(); };
  std::string out = "[";
  for (size_t i = 0; i < tuples.size(); ++i) {
    const auto& t = tuples[i];
    if (want_category && (!t.category || !valid_category(*t.category))) {
      throw InvariantError("ASQP tuple without a valid category");
    }
    if (!want_category && t.category) {
      throw InvariantError("ASTE tuple with a category");
    }
    if (i > 0) out += ", ";
    out += "{\"Aspect\": " + quoted(format_term(t.aspect));
    if (want_category) out += ", \"Category\": " + quoted(*t.category);
    out += ", \"Opinion\": " + quoted(format_term(t.opinion));
    out += ", \"Valence\": " + io::format_va_value(t.va.valence);
    out += ", \"Arousal\": " + io::format_va_value(t.va.arousal);
    out += "}";
  }
  out += "]";
  return out;
}

// ---------------------------------------------------------------------------
// Adapter-tuning configuration
// ---------------------------------------------------------------------------

void AdapterTuneConfig::validate() const {
  if (rank < 1) throw RangeError("lora rank must be >= 1");
  if (alpha <= 0.0) throw RangeError("lora alpha must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) throw RangeError("lora dropout must be in [0, 1)");
  if (target_modules.empty()) throw RangeError("target_modules must be nonempty");
  if (learning_rate <= 0.0) throw RangeError("learning_rate must be > 0");
  if (per_device_batch_size < 1) throw RangeError("batch size must be >= 1");
  if (gradient_accumulation_steps < 1) throw RangeError("accumulation steps must be >= 1");
  if (train_epochs < 1) throw RangeError("train_epochs must be >= 1");
  if (weight_decay < 0.0) throw RangeError("weight_decay must be >= 0");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) throw RangeError("warmup_ratio must be in [0, 1]");
  if (max_grad_norm <= 0.0) throw RangeError("max_grad_norm must be > 0");
  if (max_seq_len < 1) throw RangeError("max_seq_len must be >= 1");
}

std::string serialize_adapter_config(const AdapterTuneConfig& cfg) {
  cfg.validate();
  ordered_json doc;
  doc["train_epochs"] = cfg.train_epochs;
  doc["per_device_batch_size"] = cfg.per_device_batch_size;
  doc["gradient_accumulation_steps"] = cfg.gradient_accumulation_steps;
  doc["learning_rate"] = cfg.learning_rate;
  doc["weight_decay"] = cfg.weight_decay;
  doc["warmup_ratio"] = cfg.warmup_ratio;
  doc["lr_scheduler"] = cfg.lr_scheduler;
  doc["optimizer"] = cfg.optimizer;
  doc["max_seq_len"] = cfg.max_seq_len;
  doc["quantization"] = cfg.quantization;
  doc["precision"] = cfg.precision;
  doc["max_grad_norm"] = cfg.max_grad_norm;
  doc["lora"] = {{"rank", cfg.rank},
                 {"alpha", cfg.alpha},
                 {"dropout", cfg.dropout},
                 {"target_modules", cfg.target_modules}};
  return doc.dump(2) + "\n";
}

AdapterTuneConfig parse_adapter_config(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw FormatError("adapter config is not a JSON object");
  }
  AdapterTuneConfig cfg;
  try {
    cfg.train_epochs = doc.at("train_epochs").get<int>();
    cfg.per_device_batch_size = doc.at("per_device_batch_size").get<int>();
    cfg.gradient_accumulation_steps =
        doc.at("gradient_accumulation_steps").get<int>();
    cfg.learning_rate = doc.at("learning_rate").get<double>();
    cfg.weight_decay = doc.at("weight_decay").get<double>();
    cfg.warmup_ratio = doc.at("warmup_ratio").get<double>();
    cfg.lr_scheduler = doc.at("lr_scheduler").get<std::string>();
    cfg.optimizer = doc.at("optimizer").get<std::string>();
    cfg.max_seq_len = doc.at("max_seq_len").get<int>();
    cfg.quantization = doc.at("quantization").get<std::string>();
    cfg.precision = doc.at("precision").get<std::string>();
    cfg.max_grad_norm = doc.at("max_grad_norm").get<double>();
    const auto& lora = doc.at("lora");
    cfg.rank = lora.at("rank").get<int>();
    cfg.alpha = lora.at("alpha").get<double>();
    cfg.dropout = lora.at("dropout").get<double>();
    cfg.target_modules = lora.at("target_modules").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("adapter config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace dimabsa::gen
