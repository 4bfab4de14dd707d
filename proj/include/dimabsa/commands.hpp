#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dimabsa/core.hpp"
#include "dimabsa/encoder.hpp"
#include "dimabsa/regressor.hpp"

namespace dimabsa::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kCacheEnvVar = "DIMABSA_CACHE_DIR";

/// Directory used when a command's --out is omitted: $DIMABSA_CACHE_DIR or
/// ./dimabsa-cache.
std::string cache_dir();

struct ValidateOptions {
  std::string input_path;
  Subtask subtask = Subtask::ASR;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
};

struct EvalOptions {
  std::string pred_path;
  std::string gold_path;
  Subtask subtask = Subtask::ASR;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
};

struct FlattenOptions {
  std::string input_path;
  std::string out_path;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
};

struct TrainOptions {
  std::string train_path;
  std::string dev_path;
  std::string out_dir;
  std::string config_path;  // optional JSON config; flags override it
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
  reg::TrainConfig train_cfg;
  reg::LossConfig loss_cfg;
  reg::ToyEncoderConfig encoder_cfg;
  std::string input_template = reg::kDefaultInputTemplate;
  std::string null_surface = reg::kDefaultNullSurface;
};

struct PredictOptions {
  std::string model_path;
  std::string input_path;
  std::string out_path;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
};

struct MakePromptsOptions {
  std::string train_path;
  std::string input_path;
  std::string out_dir;
  std::string registry_path;  // optional overrides for the builtin registry
  Subtask subtask = Subtask::ASTE;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
  std::string profile = "qwen";
  int shots = 3;  // the few-shot protocol's default demonstration count
  uint64_t seed = 0;
};

struct ParseGenerationsOptions {
  std::string input_path;   // JSONL records {"ID": ..., "Output": ...}
  std::string out_path;     // submission file
  std::string report_path;  // optional repair report
  Subtask subtask = Subtask::ASTE;
};

struct EdaOptions {
  std::string train_path;
  std::string dev_path;   // optional
  std::string test_path;  // optional
  std::string out_path;   // optional JSON report
  std::string plot_path;  // optional PSI heatmap (PPM)
  Subtask subtask = Subtask::ASQP;
  Language language = Language::ENG;
  Domain domain = Domain::Restaurant;
};

struct AdapterConfigOptions {
  std::string out_path;  // stdout when empty
  int rank = 16;
  double alpha = 32.0;
  double dropout = 0.2;
  double learning_rate = 2e-4;
  int max_seq_len = 2048;
};

int cmd_validate(const ValidateOptions& opts, std::ostream& out);
int cmd_eval(const EvalOptions& opts, std::ostream& out);
int cmd_flatten(const FlattenOptions& opts, std::ostream& out);
int cmd_train(const TrainOptions& opts, std::ostream& out);
int cmd_predict(const PredictOptions& opts, std::ostream& out);
int cmd_make_prompts(const MakePromptsOptions& opts, std::ostream& out);
int cmd_parse_generations(const ParseGenerationsOptions& opts,
                          std::ostream& out);
int cmd_eda(const EdaOptions& opts, std::ostream& out);
int cmd_adapter_config(const AdapterConfigOptions& opts, std::ostream& out);

/// Applies a JSON config file onto TrainOptions (fields present in the file
/// replace the struct's values; CLI flags are applied afterwards and win).
void apply_config_file(TrainOptions& opts, const std::string& path);

}  // namespace dimabsa::cli
