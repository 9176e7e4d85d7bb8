// lexpred command-line entry point.
//
// Exit codes: 0 success, 1 validation/usage error, 2 runtime error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lexpred/experiment.hpp"

using namespace lexpred;

namespace {

struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::string labels;
  std::string gazetteer;
  std::string task;
  std::string arch;
  int64_t seed = -1;
  int jobs = 0;
  bool anonymized = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file (JSON)");
  cmd->add_option("--data", f.data, "corpus directory");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--labels", f.labels,
                  "label vocabulary: 'schema' or a labels.json path");
  cmd->add_option("--gazetteer", f.gazetteer, "gazetteer TSV file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--jobs", f.jobs, "worker pool size");
  cmd->add_option("--task", f.task, "binary | multilabel | importance");
  cmd->add_option("--arch", f.arch,
                  "bigru-att | han | lwan | flat-trunc | hier-enc | majority "
                  "| coin-toss | bow-linear");
  cmd->add_flag("--anonymized", f.anonymized,
                "switch to the anonymized corpus variant");
}

ExperimentConfig build_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config.empty()) cfg = ExperimentConfig::load(f.config);
  if (!f.data.empty()) cfg.data_dir = f.data;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.labels.empty()) cfg.labels = f.labels;
  if (!f.gazetteer.empty()) cfg.gazetteer = f.gazetteer;
  if (!f.task.empty()) cfg.task = f.task;
  if (!f.arch.empty()) cfg.arch = f.arch;
  if (f.seed >= 0) cfg.train.seed = uint64_t(f.seed);
  if (f.jobs > 0) cfg.jobs = f.jobs;
  if (f.anonymized) cfg.anonymized = true;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural legal judgment prediction toolkit"};
  app.require_subcommand(1);

  CommonFlags f_ingest, f_stats, f_anon, f_train, f_search, f_eval, f_explain;

  auto* c_ingest =
      app.add_subcommand("ingest", "validate a corpus and write canonical files");
  add_common(c_ingest, f_ingest);

  auto* c_stats = app.add_subcommand("stats", "corpus statistics table");
  add_common(c_stats, f_stats);

  auto* c_anon =
      app.add_subcommand("anonymize", "mask recognized entities with type tags");
  add_common(c_anon, f_anon);

  auto* c_train = app.add_subcommand("train", "train a model (or baseline)");
  add_common(c_train, f_train);
  int train_runs = 0;
  c_train->add_option("--runs", train_runs, "seeded runs to aggregate");

  auto* c_search =
      app.add_subcommand("search", "random hyperparameter search");
  add_common(c_search, f_search);
  int search_trials = 0;
  c_search->add_option("--trials", search_trials, "number of sampled configs");

  auto* c_eval = app.add_subcommand("evaluate", "metrics for a finished run");
  add_common(c_eval, f_eval);
  std::string eval_run, eval_split = "test";
  c_eval->add_option("--run", eval_run, "run directory (with checkpoint)")
      ->required();
  c_eval->add_option("--split", eval_split, "split to evaluate");

  auto* c_explain =
      app.add_subcommand("explain", "attention trace + heatmap for one case");
  add_common(c_explain, f_explain);
  std::string explain_run, explain_case;
  c_explain->add_option("--run", explain_run, "run directory")->required();
  c_explain->add_option("--case-id", explain_case, "case to explain")
      ->required();

  auto* c_synth =
      app.add_subcommand("synth", "generate a synthetic planted-signal corpus");
  SynthParams sp;
  std::string synth_out;
  c_synth->add_option("--out", synth_out, "output directory")->required();
  c_synth->add_option("--cases", sp.n_cases, "number of cases");
  c_synth->add_option("--vocab", sp.vocab_size, "filler vocabulary size");
  c_synth->add_option("--facts-per-case", sp.facts_per_case, "facts per case");
  c_synth->add_option("--words-per-fact", sp.words_per_fact, "words per fact");
  c_synth->add_option("--labels", sp.n_labels, "number of labels");
  c_synth->add_option("--signal-fact", sp.signal_fact,
                      "fact index holding the signature tokens (-1 = random)");
  c_synth->add_option("--signal-word", sp.signal_word,
                      "word position of the signature (-1 = random)");
  c_synth->add_flag("--decoys", sp.decoys,
                    "plant decoy tokens for absent labels");
  int64_t synth_seed = -1;
  c_synth->add_option("--seed", synth_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (c_ingest->parsed()) cmd_ingest(build_config(f_ingest));
    if (c_stats->parsed()) cmd_stats(build_config(f_stats));
    if (c_anon->parsed()) cmd_anonymize(build_config(f_anon));
    if (c_train->parsed()) {
      auto cfg = build_config(f_train);
      if (train_runs > 0) cfg.runs = train_runs;
      cmd_train(cfg);
    }
    if (c_search->parsed()) {
      auto cfg = build_config(f_search);
      if (search_trials > 0) cfg.trials = search_trials;
      cmd_search(cfg);
    }
    if (c_eval->parsed())
      cmd_evaluate(build_config(f_eval), eval_run, eval_split);
    if (c_explain->parsed())
      cmd_explain(build_config(f_explain), explain_run, explain_case);
    if (c_synth->parsed()) {
      if (synth_seed >= 0) sp.seed = uint64_t(synth_seed);
      cmd_synth(sp, synth_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
