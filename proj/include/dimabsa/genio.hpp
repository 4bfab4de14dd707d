#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dimabsa/core.hpp"
#include "dimabsa/dataio.hpp"

namespace dimabsa::gen {

// ---------------------------------------------------------------------------
// Chat-template profiles
// ---------------------------------------------------------------------------

enum class ProfileFamily { LlamaStyle, QwenStyle };

/// Native chat-template delimiters per backbone family. The strings are
/// bit-exact; prompts built against the wrong family will not tokenize as
/// special tokens downstream.
struct PromptProfile {
  ProfileFamily family = ProfileFamily::QwenStyle;
  std::string begin_of_text;  // emitted once at the start (may be empty)
  std::string turn_open;      // before the role name
  std::string turn_close;     // after the turn content
  bool greedy_decoding = true;  // required generation setting for this pipeline

  static PromptProfile llama();
  static PromptProfile qwen();
  static PromptProfile from_name(std::string_view name);
  std::string name() const;
};

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

struct Demonstration {
  std::string review_text;
  std::vector<SentimentTuple> gold;
};

struct PromptSpec {
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
  Subtask subtask = Subtask::ASTE;
  std::string instruction;
  std::string null_policy;          // appended when include_null_policy
  bool include_null_policy = false; // set when the partition carries NULLs
  std::vector<std::string> categories;  // ASQP only
  std::vector<Demonstration> demonstrations;
  std::string review_text;

  void validate() const;
};

/// Deterministic prompt string: instruction turn, demonstration input/output
/// turn pairs, final user turn with the review, then the assistant cue.
std::string build_prompt(const PromptSpec& spec, const PromptProfile& profile);

/// k distinct records, uniform without replacement, in draw order.
/// Deterministic under seed. Throws InvariantError if |train| < k.
std::vector<AnnotatedRecord> sample_demos(const io::DatasetSplit& train,
                                          int k, uint64_t seed);

Demonstration to_demonstration(const AnnotatedRecord& record);

// ---------------------------------------------------------------------------
// Instruction registry
// ---------------------------------------------------------------------------

struct InstructionEntry {
  std::string instruction;
  std::string null_policy;
};

/// Instruction texts per (language, domain, subtask). Keys are stable
/// ("ENG/Restaurant/ASTE") so released templates can be pasted in verbatim
/// over the shipped placeholders.
class PromptRegistry {
 public:
  static PromptRegistry builtin();
  static std::string key(Language lang, Domain domain, Subtask subtask);

  void merge_file(const std::string& path);
  InstructionEntry lookup(Language lang, Domain domain, Subtask subtask) const;

 private:
  std::map<std::string, InstructionEntry> entries_;
};

// ---------------------------------------------------------------------------
// Generated-output parsing
// ---------------------------------------------------------------------------

struct RepairEvent {
  std::string kind;    // "stripped_prose", "coerced_numeric_string", ...
  std::string detail;
};

struct GenerationRecord {
  std::string raw;
  std::vector<SentimentTuple> parsed;
  std::vector<RepairEvent> repairs;
  int rejected = 0;  // unrecoverable items
};

/// Extracts the first well-formed JSON array from arbitrary model output and
/// reads Aspect / Opinion / (Category) / Valence / Arousal per item. Numeric
/// strings are coerced; items missing required keys are dropped and counted.
/// Never throws on malformed output: no array at all yields an empty parse
/// with a whole-output rejection event.
GenerationRecord parse_generation(const std::string& raw, Subtask subtask);

/// Clips Valence/Arousal into [1.00, 9.00]; idempotent. Items whose VA is
/// not finite are dropped and counted as rejected.
GenerationRecord clamp_tuples(GenerationRecord rec);

/// Clamped record -> submission entry with "V#A" strings re-joined.
io::SubmissionEntry to_submission_tuples(const GenerationRecord& rec,
                                         Subtask subtask,
                                         const std::string& id);

/// Gold tuples -> the model-output JSON schema (explicit numeric Valence /
/// Arousal keys, two-decimal formatting). Training targets and demo outputs.
std::string serialize_generation(const std::vector<SentimentTuple>& tuples,
                                 Subtask subtask);

// ---------------------------------------------------------------------------
// Adapter-tuning configuration
// ---------------------------------------------------------------------------

/// Serializable fine-tuning recipe for the LLM extraction models (4-bit
/// loading + LoRA adapters). The toolkit only emits and validates this
/// document; training itself runs elsewhere.
struct AdapterTuneConfig {
  int rank = 16;
  double alpha = 32.0;
  double dropout = 0.2;
  std::vector<std::string> target_modules = {
      "q_proj", "k_proj", "v_proj", "o_proj",
      "gate_proj", "up_proj", "down_proj"};
  double learning_rate = 2e-4;
  int per_device_batch_size = 2;
  int gradient_accumulation_steps = 4;
  int train_epochs = 1;
  double weight_decay = 1e-4;
  double warmup_ratio = 0.03;
  std::string lr_scheduler = "linear";
  std::string optimizer = "paged_adamw_32bit";
  std::string quantization = "4-bit";
  std::string precision = "bf16";
  double max_grad_norm = 0.3;
  int max_seq_len = 2048;

  void validate() const;

  friend bool operator==(const AdapterTuneConfig&,
                         const AdapterTuneConfig&) = default;
};

std::string serialize_adapter_config(const AdapterTuneConfig& cfg);
AdapterTuneConfig parse_adapter_config(const std::string& text);

}  // namespace dimabsa::gen
