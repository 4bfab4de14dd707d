#include "dimabsa/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dimabsa/dataio.hpp"
#include "dimabsa/eda.hpp"
#include "dimabsa/genio.hpp"
#include "dimabsa/metrics.hpp"
#include "dimabsa/rng.hpp"

namespace dimabsa::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string cache_dir() {
  if (const char* env = std::getenv(kCacheEnvVar); env && *env) {
    return env;
  }
  return "dimabsa-cache";
}

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Every run records its effective configuration; primary outputs must be
/// byte-identical across reruns, so the timestamp lives only here.
void write_manifest(const std::string& path, const std::string& command,
                    ordered_json effective) {
  ordered_json doc;
  doc["command"] = command;
  doc["toolkit_version"] = kVersion;
  doc["timestamp"] = timestamp_utc();
  doc["effective"] = std::move(effective);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest: " + path);
  out << doc.dump(2) << "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << text;
}

int guarded(std::ostream& out, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
}

io::LoadResult load_or_fail(const std::string& path,
                            const io::LoadOptions& opts, std::ostream& out) {
  auto result = io::load_split_file(path, opts);
  if (!result.report.ok()) {
    out << result.report.to_text();
    throw Error(path + ": " +
                std::to_string(result.report.error_count()) +
                " hard validation errors");
  }
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const ValidateOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    io::LoadOptions load;
    load.subtask = opts.subtask;
    load.language = opts.language;
    load.domain = opts.domain;
    const auto result = io::load_split_file(opts.input_path, load);
    out << result.report.to_text();
    out << "records: " << result.split.records.size()
        << "  errors: " << result.report.error_count()
        << "  warnings: " << result.report.warning_count() << "\n";
    return result.report.ok() ? 0 : 1;
  });
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

namespace {

void check_id_sets(const io::DatasetSplit& pred, const io::DatasetSplit& gold) {
  std::set<std::string> pred_ids, gold_ids;
  for (const auto& r : pred.records) pred_ids.insert(r.review.id);
  for (const auto& r : gold.records) gold_ids.insert(r.review.id);
  if (pred_ids == gold_ids) return;
  std::string msg = "prediction/gold ID mismatch;";
  for (const auto& id : gold_ids) {
    if (!pred_ids.count(id)) msg += " missing:" + id;
  }
  for (const auto& id : pred_ids) {
    if (!gold_ids.count(id)) msg += " extra:" + id;
  }
  throw InvariantError(msg);
}

std::string aspect_key(const Term& t) { return t ? "S:" + *t : "N"; }

metrics::ScoreReport eval_asr(const io::DatasetSplit& pred,
                              const io::DatasetSplit& gold) {
  check_id_sets(pred, gold);
  std::map<std::string, const AnnotatedRecord*> pred_by_id;
  for (const auto& r : pred.records) pred_by_id[r.review.id] = &r;

  std::vector<VAPair> pred_vas, gold_vas;
  for (const auto& grec : gold.records) {
    const auto* prec = pred_by_id.at(grec.review.id);
    std::map<std::string, std::deque<VAPair>> supply;
    for (const auto& entry : prec->aspect_entries) {
      supply[aspect_key(entry.aspect)].push_back(entry.va);
    }
    for (const auto& entry : grec.aspect_entries) {
      auto& queue = supply[aspect_key(entry.aspect)];
      if (queue.empty()) {
        throw InvariantError("review " + grec.review.id +
                             ": no prediction for aspect '" +
                             format_term(entry.aspect) + "'");
      }
      pred_vas.push_back(queue.front());
      queue.pop_front();
      gold_vas.push_back(entry.va);
    }
    for (const auto& [key, queue] : supply) {
      if (!queue.empty()) {
        throw InvariantError("review " + grec.review.id +
                             ": prediction has extra aspect entries");
      }
    }
  }

  metrics::ScoreReport report;
  report.rmse_va = metrics::rmse_va(pred_vas, gold_vas);
  std::vector<double> pv, gv, pa, ga;
  for (size_t i = 0; i < pred_vas.size(); ++i) {
    pv.push_back(pred_vas[i].valence);
    gv.push_back(gold_vas[i].valence);
    pa.push_back(pred_vas[i].arousal);
    ga.push_back(gold_vas[i].arousal);
  }
  report.pcc_v = metrics::pcc(pv, gv);
  report.pcc_a = metrics::pcc(pa, ga);
  return report;
}

}  // namespace

int cmd_eval(const EvalOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    io::LoadOptions load;
    load.subtask = opts.subtask;
    load.language = opts.language;
    load.domain = opts.domain;
    const auto gold = load_or_fail(opts.gold_path, load, out);
    load.allow_missing_va = false;
    const auto pred = load_or_fail(opts.pred_path, load, out);

    metrics::ScoreReport report;
    if (opts.subtask == Subtask::ASR) {
      report = eval_asr(pred.split, gold.split);
    } else {
      check_id_sets(pred.split, gold.split);
      report = metrics::continuous_f1(io::entries_by_review(pred.split),
                                      io::entries_by_review(gold.split),
                                      opts.subtask);
    }
    out << report.to_text();
    return 0;
  });
}

// ---------------------------------------------------------------------------
// flatten
// ---------------------------------------------------------------------------

int cmd_flatten(const FlattenOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    io::LoadOptions load;
    load.subtask = Subtask::ASR;
    load.language = opts.language;
    load.domain = opts.domain;
    const auto result = load_or_fail(opts.input_path, load, out);
    const auto rows = io::flatten_asr(result.split);

    std::string text;
    for (const auto& row : rows) {
      ordered_json obj;
      obj["ID"] = row.review_id;
      obj["Text"] = row.review_text;
      obj["Aspect"] = format_term(row.aspect);
      obj["VA"] = io::format_va_string(row.target);
      text += obj.dump();
      text += "\n";
    }
    write_text_file(opts.out_path, text);
    write_manifest(opts.out_path + ".manifest.json", "flatten",
                   {{"input", opts.input_path}, {"out", opts.out_path}});
    out << "flattened " << result.split.records.size() << " reviews into "
        << rows.size() << " rows\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void apply_config_file(TrainOptions& opts, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw FormatError("config is not a JSON object: " + path);
  }
  if (doc.contains("train")) {
    const auto& t = doc["train"];
    auto& cfg = opts.train_cfg;
    cfg.learning_rate = t.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = t.value("batch_size", cfg.batch_size);
    cfg.dropout = t.value("dropout", cfg.dropout);
    cfg.warmup_ratio = t.value("warmup_ratio", cfg.warmup_ratio);
    cfg.plateau_factor = t.value("plateau_factor", cfg.plateau_factor);
    cfg.plateau_patience = t.value("plateau_patience", cfg.plateau_patience);
    cfg.early_stop_patience =
        t.value("early_stop_patience", cfg.early_stop_patience);
    cfg.max_epochs = t.value("max_epochs", cfg.max_epochs);
    cfg.max_seq_len = t.value("max_seq_len", cfg.max_seq_len);
    cfg.weight_decay = t.value("weight_decay", cfg.weight_decay);
    cfg.seed = t.value("seed", cfg.seed);
  }
  if (doc.contains("loss")) {
    const auto& l = doc["loss"];
    auto& cfg = opts.loss_cfg;
    cfg.gamma = l.value("gamma", cfg.gamma);
    cfg.beta = l.value("beta", cfg.beta);
    cfg.lambda_v = l.value("lambda_v", cfg.lambda_v);
    cfg.lambda_a = l.value("lambda_a", cfg.lambda_a);
    cfg.margin = l.value("margin", cfg.margin);
    cfg.pos_radius = l.value("pos_radius", cfg.pos_radius);
    cfg.neg_radius = l.value("neg_radius", cfg.neg_radius);
  }
  if (doc.contains("encoder")) {
    const auto& e = doc["encoder"];
    opts.encoder_cfg.vocab_size = e.value("vocab_size", opts.encoder_cfg.vocab_size);
    opts.encoder_cfg.dim = e.value("dim", opts.encoder_cfg.dim);
  }
  opts.input_template = doc.value("input_template", opts.input_template);
  opts.null_surface = doc.value("null_surface", opts.null_surface);
}

namespace {

ordered_json effective_train_config(const TrainOptions& opts) {
  ordered_json doc;
  doc["train"] = {{"learning_rate", opts.train_cfg.learning_rate},
                  {"batch_size", opts.train_cfg.batch_size},
                  {"dropout", opts.train_cfg.dropout},
                  {"warmup_ratio", opts.train_cfg.warmup_ratio},
                  {"plateau_factor", opts.train_cfg.plateau_factor},
                  {"plateau_patience", opts.train_cfg.plateau_patience},
                  {"early_stop_patience", opts.train_cfg.early_stop_patience},
                  {"max_epochs", opts.train_cfg.max_epochs},
                  {"max_seq_len", opts.train_cfg.max_seq_len},
                  {"weight_decay", opts.train_cfg.weight_decay},
                  {"seed", opts.train_cfg.seed}};
  doc["loss"] = {{"gamma", opts.loss_cfg.gamma},
                 {"beta", opts.loss_cfg.beta},
                 {"lambda_v", opts.loss_cfg.lambda_v},
                 {"lambda_a", opts.loss_cfg.lambda_a},
                 {"margin", opts.loss_cfg.margin},
                 {"pos_radius", opts.loss_cfg.pos_radius},
                 {"neg_radius", opts.loss_cfg.neg_radius}};
  doc["encoder"] = {{"vocab_size", opts.encoder_cfg.vocab_size},
                    {"dim", opts.encoder_cfg.dim}};
  doc["input_template"] = opts.input_template;
  doc["null_surface"] = opts.null_surface;
  doc["language"] = to_string(opts.language);
  doc["domain"] = to_string(opts.domain);
  doc["train_path"] = opts.train_path;
  doc["dev_path"] = opts.dev_path;
  return doc;
}

double mean_predictor_rmse(const std::vector<io::RegressionExample>& train_rows,
                           const std::vector<io::RegressionExample>& dev_rows) {
  VAPair mean{0.0, 0.0};
  for (const auto& row : train_rows) {
    mean.valence += row.target.valence;
    mean.arousal += row.target.arousal;
  }
  mean.valence /= static_cast<double>(train_rows.size());
  mean.arousal /= static_cast<double>(train_rows.size());
  std::vector<VAPair> preds(dev_rows.size(), mean), golds;
  for (const auto& row : dev_rows) golds.push_back(row.target);
  return metrics::rmse_va(preds, golds);
}

}  // namespace

int cmd_train(const TrainOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    io::LoadOptions load;
    load.subtask = Subtask::ASR;
    load.language = opts.language;
    load.domain = opts.domain;
    const auto train_split = load_or_fail(opts.train_path, load, out);
    load.split = Split::Dev;
    const auto dev_split = load_or_fail(opts.dev_path, load, out);

    const auto train_rows = io::flatten_asr(train_split.split);
    const auto dev_rows = io::flatten_asr(dev_split.split);

    const std::string out_dir =
        opts.out_dir.empty()
            ? cache_dir() + "/train-" + std::to_string(opts.train_cfg.seed)
            : opts.out_dir;
    fs::create_directories(out_dir);

    reg::ToyEncoderConfig encoder_cfg = opts.encoder_cfg;
    encoder_cfg.max_seq_len = opts.train_cfg.max_seq_len;
    encoder_cfg.seed = mix_seed(opts.train_cfg.seed, 0x454e43);
    auto encoder = std::make_shared<reg::ToyEncoder>(encoder_cfg);

    auto result = reg::train(train_rows, dev_rows, encoder, opts.train_cfg,
                             opts.loss_cfg, opts.input_template,
                             opts.null_surface);

    reg::save_checkpoint(result.model, out_dir + "/checkpoint.json");
    write_text_file(out_dir + "/history.tsv",
                    reg::history_to_tsv(result.history));
    write_manifest(out_dir + "/manifest.json", "train",
                   effective_train_config(opts));

    out << "train_rows: " << train_rows.size() << "\n";
    out << "dev_rows: " << dev_rows.size() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f",
                  mean_predictor_rmse(train_rows, dev_rows));
    out << "baseline_rmse_va: " << buf << "\n";
    out << "epochs_run: " << result.history.size() << "\n";
    out << "best_epoch: " << result.best_epoch << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", result.best_val_rmse);
    out << "best_val_rmse_va: " << buf << "\n";
    out << "checkpoint: " << out_dir << "/checkpoint.json\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const PredictOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    const auto model = reg::load_checkpoint(opts.model_path);

    io::LoadOptions load;
    load.subtask = Subtask::ASR;
    load.language = opts.language;
    load.domain = opts.domain;
    load.allow_missing_va = true;
    const auto input = load_or_fail(opts.input_path, load, out);

    const auto skeleton = io::flatten_asr(input.split);
    const auto predictions = reg::predict(model, skeleton);
    std::vector<io::PredictionRow> rows;
    rows.reserve(skeleton.size());
    for (size_t i = 0; i < skeleton.size(); ++i) {
      rows.push_back({skeleton[i].review_id, skeleton[i].aspect, predictions[i]});
    }
    const auto entries = io::group_predictions(rows, skeleton);
    io::write_submission_file(opts.out_path, entries, Subtask::ASR,
                              input.split.shape);
    write_manifest(opts.out_path + ".manifest.json", "predict",
                   {{"model", opts.model_path},
                    {"input", opts.input_path},
                    {"out", opts.out_path}});
    out << "predicted " << rows.size() << " rows over "
        << entries.size() << " reviews\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// make-prompts
// ---------------------------------------------------------------------------

int cmd_make_prompts(const MakePromptsOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    io::LoadOptions load;
    load.subtask = opts.subtask;
    load.language = opts.language;
    load.domain = opts.domain;
    const auto train = load_or_fail(opts.train_path, load, out);
    const auto input = load_or_fail(opts.input_path, load, out);

    auto registry = gen::PromptRegistry::builtin();
    if (!opts.registry_path.empty()) registry.merge_file(opts.registry_path);
    const auto entry =
        registry.lookup(opts.language, opts.domain, opts.subtask);

    bool has_nulls = false;
    std::set<std::string> category_set;
    for (const auto& rec : train.split.records) {
      for (const auto& t : rec.tuples) {
        if (!t.aspect || !t.opinion) has_nulls = true;
        if (t.category) category_set.insert(*t.category);
      }
    }

    std::vector<gen::Demonstration> demos;
    for (const auto& rec :
         gen::sample_demos(train.split, opts.shots, opts.seed)) {
      demos.push_back(gen::to_demonstration(rec));
    }

    const auto profile = gen::PromptProfile::from_name(opts.profile);
    const std::string out_dir =
        opts.out_dir.empty() ? cache_dir() + "/prompts" : opts.out_dir;
    fs::create_directories(out_dir);

    std::string index;
    for (const auto& rec : input.split.records) {
      gen::PromptSpec spec;
      spec.language = opts.language;
      spec.domain = opts.domain;
      spec.subtask = opts.subtask;
      spec.instruction = entry.instruction;
      spec.null_policy = entry.null_policy;
      spec.include_null_policy = has_nulls;
      if (opts.subtask == Subtask::ASQP) {
        spec.categories.assign(category_set.begin(), category_set.end());
      }
      spec.demonstrations = demos;
      spec.review_text = rec.review.text;

      const std::string file = rec.review.id + ".prompt.txt";
      write_text_file(out_dir + "/" + file, gen::build_prompt(spec, profile));
      ordered_json line;
      line["ID"] = rec.review.id;
      line["file"] = file;
      line["profile"] = profile.name();
      line["greedy_decoding"] = profile.greedy_decoding;
      line["shots"] = opts.shots;
      index += line.dump();
      index += "\n";
    }
    write_text_file(out_dir + "/index.jsonl", index);
    write_manifest(out_dir + "/manifest.json", "make-prompts",
                   {{"train", opts.train_path},
                    {"input", opts.input_path},
                    {"subtask", to_string(opts.subtask)},
                    {"language", to_string(opts.language)},
                    {"domain", to_string(opts.domain)},
                    {"profile", profile.name()},
                    {"greedy_decoding", profile.greedy_decoding},
                    {"shots", opts.shots},
                    {"seed", opts.seed},
                    {"null_policy_included", has_nulls}});
    out << "wrote " << input.split.records.size() << " prompts to "
        << out_dir << "\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// parse-generations
// ---------------------------------------------------------------------------

int cmd_parse_generations(const ParseGenerationsOptions& opts,
                          std::ostream& out) {
  return guarded(out, [&] {
    std::ifstream in(opts.input_path, std::ios::binary);
    if (!in) throw Error("cannot open generations: " + opts.input_path);

    std::vector<io::SubmissionEntry> entries;
    ordered_json report = ordered_json::array();
    std::string line;
    size_t line_no = 0;
    size_t total_rejected = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object() || !obj.contains("ID") ||
          !obj.contains("Output")) {
        throw FormatError("line " + std::to_string(line_no) +
                          ": expected {\"ID\": ..., \"Output\": ...}");
      }
      const std::string id = obj["ID"].get<std::string>();
      const auto rec = gen::clamp_tuples(gen::parse_generation(
          obj["Output"].get<std::string>(), opts.subtask));
      entries.push_back(gen::to_submission_tuples(rec, opts.subtask, id));
      total_rejected += static_cast<size_t>(rec.rejected);

      ordered_json row;
      row["ID"] = id;
      row["parsed"] = rec.parsed.size();
      row["rejected"] = rec.rejected;
      ordered_json events = ordered_json::array();
      for (const auto& r : rec.repairs) {
        events.push_back({{"kind", r.kind}, {"detail", r.detail}});
      }
      row["repairs"] = std::move(events);
      report.push_back(std::move(row));
    }

    io::write_submission_file(opts.out_path, entries, opts.subtask);
    if (!opts.report_path.empty()) {
      write_text_file(opts.report_path, report.dump(2) + "\n");
    }
    write_manifest(opts.out_path + ".manifest.json", "parse-generations",
                   {{"input", opts.input_path},
                    {"out", opts.out_path},
                    {"subtask", to_string(opts.subtask)}});
    out << "parsed " << entries.size() << " generations, rejected "
        << total_rejected << " items\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// eda
// ---------------------------------------------------------------------------

namespace {

void heatmap_color(double value, unsigned char* rgb) {
  // 0 -> green, 0.1 -> yellow, >= 0.3 -> deep red.
  const auto lerp = [](double a, double b, double t) {
    return static_cast<unsigned char>(a + (b - a) * t);
  };
  if (value < 0.1) {
    const double t = value / 0.1;
    rgb[0] = lerp(43, 255, t);
    rgb[1] = lerp(160, 221, t);
    rgb[2] = lerp(86, 85, t);
  } else {
    const double t = std::min(1.0, (value - 0.1) / 0.2);
    rgb[0] = lerp(255, 200, t);
    rgb[1] = lerp(221, 40, t);
    rgb[2] = lerp(85, 35, t);
  }
}

void write_psi_heatmap(const std::string& path,
                       const std::vector<eda::PsiReport>& reports) {
  std::vector<std::string> pairs;
  std::vector<eda::Feature> features;
  for (const auto& r : reports) {
    if (std::find(pairs.begin(), pairs.end(), r.comparison) == pairs.end()) {
      pairs.push_back(r.comparison);
    }
    if (std::find(features.begin(), features.end(), r.feature) ==
        features.end()) {
      features.push_back(r.feature);
    }
  }
  if (pairs.empty() || features.empty()) return;

  constexpr int kCell = 48;
  const int width = kCell * static_cast<int>(pairs.size());
  const int height = kCell * static_cast<int>(features.size());
  std::vector<unsigned char> pixels(3 * width * height, 255);
  for (const auto& r : reports) {
    const auto row = static_cast<int>(
        std::find(features.begin(), features.end(), r.feature) -
        features.begin());
    const auto col = static_cast<int>(
        std::find(pairs.begin(), pairs.end(), r.comparison) - pairs.begin());
    unsigned char rgb[3];
    heatmap_color(r.value, rgb);
    for (int y = row * kCell; y < (row + 1) * kCell; ++y) {
      for (int x = col * kCell; x < (col + 1) * kCell; ++x) {
        unsigned char* px = &pixels[3 * (y * width + x)];
        px[0] = rgb[0];
        px[1] = rgb[1];
        px[2] = rgb[2];
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write plot: " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

}  // namespace

int cmd_eda(const EdaOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    io::LoadOptions load;
    load.subtask = opts.subtask;
    load.language = opts.language;
    load.domain = opts.domain;

    std::map<Split, io::DatasetSplit> splits;
    load.split = Split::Train;
    splits[Split::Train] = load_or_fail(opts.train_path, load, out).split;
    if (!opts.dev_path.empty()) {
      load.split = Split::Dev;
      splits[Split::Dev] = load_or_fail(opts.dev_path, load, out).split;
    }
    if (!opts.test_path.empty()) {
      load.split = Split::Test;
      splits[Split::Test] = load_or_fail(opts.test_path, load, out).split;
    }

    ordered_json doc;
    char buf[64];
    for (const auto& [kind, split] : splits) {
      const auto stats = eda::split_stats(split);
      std::snprintf(buf, sizeof buf, "reviews=%zu mean_length=%.2f mean_density=%.2f",
                    stats.review_count, stats.mean_length(), stats.mean_density());
      out << "split " << to_string(kind) << ": " << buf << "\n";
      ordered_json s;
      s["reviews"] = stats.review_count;
      s["mean_length"] = stats.mean_length();
      s["mean_density"] = stats.mean_density();
      s["categories"] = stats.category_counts;
      doc["splits"][to_string(kind)] = std::move(s);

      if (split.subtask != Subtask::ASR) {
        const auto nulls = eda::null_analysis(split);
        std::snprintf(buf, sizeof buf,
                      "rate=%.4f aspect_only=%.4f opinion_only=%.4f both=%.4f",
                      nulls.null_rate, nulls.aspect_only, nulls.opinion_only,
                      nulls.both);
        out << "null " << to_string(kind) << ": " << buf << "\n";
        doc["null"][to_string(kind)] = {{"rate", nulls.null_rate},
                                        {"aspect_only", nulls.aspect_only},
                                        {"opinion_only", nulls.opinion_only},
                                        {"both", nulls.both}};
      }
    }

    std::vector<eda::PsiReport> psi_reports;
    if (splits.size() > 1) {
      psi_reports = eda::psi_matrix(splits, eda::default_features(opts.subtask));
      out << "feature\tpair\tvalue\tlevel\n";
      ordered_json psi_json = ordered_json::array();
      for (const auto& r : psi_reports) {
        std::snprintf(buf, sizeof buf, "%.4f", r.value);
        out << to_string(r.feature) << "\t" << r.comparison << "\t" << buf
            << "\t" << to_string(r.level)
            << (r.degenerate ? "\t(degenerate binning)" : "") << "\n";
        psi_json.push_back({{"feature", to_string(r.feature)},
                            {"pair", r.comparison},
                            {"value", r.value},
                            {"level", to_string(r.level)},
                            {"degenerate", r.degenerate}});
      }
      doc["psi"] = std::move(psi_json);
    }

    if (!opts.out_path.empty()) {
      write_text_file(opts.out_path, doc.dump(2) + "\n");
      write_manifest(opts.out_path + ".manifest.json", "eda",
                     {{"train", opts.train_path},
                      {"dev", opts.dev_path},
                      {"test", opts.test_path},
                      {"subtask", to_string(opts.subtask)}});
    }
    if (!opts.plot_path.empty() && !psi_reports.empty()) {
      write_psi_heatmap(opts.plot_path, psi_reports);
    }
    return 0;
  });
}

// ---------------------------------------------------------------------------
// adapter-config
// ---------------------------------------------------------------------------

int cmd_adapter_config(const AdapterConfigOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    gen::AdapterTuneConfig cfg;
    cfg.rank = opts.rank;
    cfg.alpha = opts.alpha;
    cfg.dropout = opts.dropout;
    cfg.learning_rate = opts.learning_rate;
    cfg.max_seq_len = opts.max_seq_len;
    const std::string doc = gen::serialize_adapter_config(cfg);
    if (opts.out_path.empty()) {
      out << doc;
    } else {
      write_text_file(opts.out_path, doc);
      out << "wrote adapter config to " << opts.out_path << "\n";
    }
    return 0;
  });
}

}  // namespace dimabsa::cli
