#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dimabsa/commands.hpp"

namespace cli = dimabsa::cli;
using dimabsa::parse_domain;
using dimabsa::parse_language;
using dimabsa::parse_subtask;

int main(int argc, char** argv) {
  CLI::App app{"DimABSA toolkit: validation, scoring, regression training, "
               "prompt assembly and dataset analysis for the three "
               "aspect-level VA subtasks"};
  app.require_subcommand(1);

  // --- validate ---
  cli::ValidateOptions validate_opts;
  std::string subtask = "asr", lang = "eng", domain = "restaurant";
  auto* validate = app.add_subcommand("validate", "Check a task JSON file");
  validate->add_option("--input", validate_opts.input_path, "input file")
      ->required();
  validate->add_option("--subtask", subtask, "asr|aste|asqp");
  validate->add_option("--lang", lang, "language code");
  validate->add_option("--domain", domain, "domain name");

  // --- eval ---
  cli::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Score predictions against gold");
  eval->add_option("--pred", eval_opts.pred_path, "prediction file")->required();
  eval->add_option("--gold", eval_opts.gold_path, "gold file")->required();
  eval->add_option("--subtask", subtask, "asr|aste|asqp");
  eval->add_option("--lang", lang, "language code");
  eval->add_option("--domain", domain, "domain name");

  // --- flatten ---
  cli::FlattenOptions flatten_opts;
  auto* flatten = app.add_subcommand("flatten",
                                     "Flatten an ASR split to review/aspect rows");
  flatten->add_option("--input", flatten_opts.input_path, "ASR gold file")
      ->required();
  flatten->add_option("--out", flatten_opts.out_path, "output JSONL")->required();
  flatten->add_option("--lang", lang, "language code");
  flatten->add_option("--domain", domain, "domain name");

  // --- train ---
  cli::TrainOptions train_opts;
  uint64_t seed = 0;
  auto* train = app.add_subcommand("train", "Train the VA regressor");
  train->add_option("--train", train_opts.train_path, "training split")->required();
  train->add_option("--dev", train_opts.dev_path, "validation split")->required();
  train->add_option("--out", train_opts.out_dir, "output directory");
  train->add_option("--config", train_opts.config_path, "JSON config file");
  train->add_option("--seed", seed, "RNG seed")->required();
  train->add_option("--lang", lang, "language code");
  train->add_option("--domain", domain, "domain name");
  auto* lr_opt = train->add_option("--learning-rate",
                                   train_opts.train_cfg.learning_rate);
  auto* batch_opt = train->add_option("--batch-size",
                                      train_opts.train_cfg.batch_size);
  auto* epochs_opt = train->add_option("--max-epochs",
                                       train_opts.train_cfg.max_epochs);
  auto* dropout_opt = train->add_option("--dropout", train_opts.train_cfg.dropout);
  auto* dim_opt = train->add_option("--encoder-dim", train_opts.encoder_cfg.dim);
  auto* vocab_opt = train->add_option("--encoder-vocab",
                                      train_opts.encoder_cfg.vocab_size);

  // --- predict ---
  cli::PredictOptions predict_opts;
  auto* predict = app.add_subcommand("predict", "Predict VA for an ASR input");
  predict->add_option("--model", predict_opts.model_path, "checkpoint")->required();
  predict->add_option("--input", predict_opts.input_path, "input file")->required();
  predict->add_option("--out", predict_opts.out_path, "submission file")->required();
  predict->add_option("--lang", lang, "language code");
  predict->add_option("--domain", domain, "domain name");

  // --- make-prompts ---
  cli::MakePromptsOptions prompts_opts;
  auto* prompts = app.add_subcommand("make-prompts",
                                     "Build extraction prompts per review");
  prompts->add_option("--train", prompts_opts.train_path,
                      "training split (demos, categories, NULL policy)")
      ->required();
  prompts->add_option("--input", prompts_opts.input_path, "reviews to prompt")
      ->required();
  prompts->add_option("--out", prompts_opts.out_dir, "output directory");
  prompts->add_option("--registry", prompts_opts.registry_path,
                      "instruction registry overrides (JSON)");
  std::string prompts_subtask = "aste";
  prompts->add_option("--subtask", prompts_subtask, "aste|asqp");
  prompts->add_option("--lang", lang, "language code");
  prompts->add_option("--domain", domain, "domain name");
  prompts->add_option("--profile", prompts_opts.profile, "llama|qwen");
  prompts->add_option("--shots", prompts_opts.shots,
                      "demonstrations per prompt (default 3; 0 for zero-shot)");
  prompts->add_option("--seed", seed, "RNG seed")->required();

  // --- parse-generations ---
  cli::ParseGenerationsOptions parse_opts;
  auto* parse = app.add_subcommand("parse-generations",
                                   "Parse raw model output into a submission");
  parse->add_option("--input", parse_opts.input_path,
                    "JSONL of {\"ID\", \"Output\"}")->required();
  parse->add_option("--out", parse_opts.out_path, "submission file")->required();
  parse->add_option("--report", parse_opts.report_path, "repair report (JSON)");
  std::string parse_subtask_name = "aste";
  parse->add_option("--subtask", parse_subtask_name, "aste|asqp");

  // --- eda ---
  cli::EdaOptions eda_opts;
  auto* eda = app.add_subcommand("eda", "Split statistics, NULL rates and PSI");
  eda->add_option("--train", eda_opts.train_path, "training split")->required();
  eda->add_option("--dev", eda_opts.dev_path, "dev split");
  eda->add_option("--test", eda_opts.test_path, "test split");
  eda->add_option("--out", eda_opts.out_path, "JSON report");
  eda->add_option("--plot", eda_opts.plot_path, "PSI heatmap (PPM image)");
  eda->add_option("--subtask", subtask, "asr|aste|asqp");
  eda->add_option("--lang", lang, "language code");
  eda->add_option("--domain", domain, "domain name");

  // --- adapter-config ---
  cli::AdapterConfigOptions adapter_opts;
  auto* adapter = app.add_subcommand("adapter-config",
                                     "Emit the LLM fine-tuning configuration");
  adapter->add_option("--out", adapter_opts.out_path, "output file (stdout if absent)");
  adapter->add_option("--rank", adapter_opts.rank, "LoRA rank");
  adapter->add_option("--alpha", adapter_opts.alpha, "LoRA alpha");
  adapter->add_option("--lora-dropout", adapter_opts.dropout, "LoRA dropout");
  adapter->add_option("--learning-rate", adapter_opts.learning_rate);
  adapter->add_option("--max-seq-len", adapter_opts.max_seq_len);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      validate_opts.subtask = parse_subtask(subtask);
      validate_opts.language = parse_language(lang);
      validate_opts.domain = parse_domain(domain);
      return cli::cmd_validate(validate_opts, std::cout);
    }
    if (eval->parsed()) {
      eval_opts.subtask = parse_subtask(subtask);
      eval_opts.language = parse_language(lang);
      eval_opts.domain = parse_domain(domain);
      return cli::cmd_eval(eval_opts, std::cout);
    }
    if (flatten->parsed()) {
      flatten_opts.language = parse_language(lang);
      flatten_opts.domain = parse_domain(domain);
      return cli::cmd_flatten(flatten_opts, std::cout);
    }
    if (train->parsed()) {
      // Config file first, explicit flags win.
      const cli::TrainOptions flag_values = train_opts;
      if (!train_opts.config_path.empty()) {
        cli::apply_config_file(train_opts, train_opts.config_path);
      }
      if (lr_opt->count()) train_opts.train_cfg.learning_rate = flag_values.train_cfg.learning_rate;
      if (batch_opt->count()) train_opts.train_cfg.batch_size = flag_values.train_cfg.batch_size;
      if (epochs_opt->count()) train_opts.train_cfg.max_epochs = flag_values.train_cfg.max_epochs;
      if (dropout_opt->count()) train_opts.train_cfg.dropout = flag_values.train_cfg.dropout;
      if (dim_opt->count()) train_opts.encoder_cfg.dim = flag_values.encoder_cfg.dim;
      if (vocab_opt->count()) train_opts.encoder_cfg.vocab_size = flag_values.encoder_cfg.vocab_size;
      train_opts.train_cfg.seed = seed;
      train_opts.language = parse_language(lang);
      train_opts.domain = parse_domain(domain);
      return cli::cmd_train(train_opts, std::cout);
    }
    if (predict->parsed()) {
      predict_opts.language = parse_language(lang);
      predict_opts.domain = parse_domain(domain);
      return cli::cmd_predict(predict_opts, std::cout);
    }
    if (prompts->parsed()) {
      prompts_opts.subtask = parse_subtask(prompts_subtask);
      prompts_opts.language = parse_language(lang);
      prompts_opts.domain = parse_domain(domain);
      prompts_opts.seed = seed;
      return cli::cmd_make_prompts(prompts_opts, std::cout);
    }
    if (parse->parsed()) {
      parse_opts.subtask = parse_subtask(parse_subtask_name);
      return cli::cmd_parse_generations(parse_opts, std::cout);
    }
    if (eda->parsed()) {
      eda_opts.subtask = parse_subtask(subtask);
      eda_opts.language = parse_language(lang);
      eda_opts.domain = parse_domain(domain);
      return cli::cmd_eda(eda_opts, std::cout);
    }
    if (adapter->parsed()) {
      return cli::cmd_adapter_config(adapter_opts, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
