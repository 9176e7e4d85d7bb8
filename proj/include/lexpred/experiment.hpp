#pragma once
// Experiment configuration and the command implementations behind the CLI.
// Everything is reproducible from the config file + seed alone.

#include <optional>
#include <string>
#include <vector>

#include "lexpred/baselines.hpp"
#include "lexpred/models.hpp"
#include "lexpred/synth.hpp"
#include "lexpred/training.hpp"

namespace lexpred {

struct ExperimentConfig {
  std::string name = "exp";
  std::string data_dir;
  std::string out_dir;
  std::string labels = "schema";  // "schema" or a labels.json path
  std::string task = "binary";
  std::string arch = "bigru-att";  // or majority | coin-toss | bow-linear
  bool anonymized = false;         // swap in the anonymized corpus variant
  std::string gazetteer;
  std::string embedding_file;
  int vocab_min_freq = 1;
  bool balance = true;  // balanced train/dev subsample, binary task only
  double tau = 0.5;
  int runs = 1;
  int jobs = 1;
  int trials = 50;  // random search

  // model dims
  int hidden = 300;
  int stack = 1;
  int embed_dim = 200;
  int max_len = 512;
  TransformerDims tf;
  bool frozen_embeddings = false;
  bool multilabel_softmax = false;

  // bow-linear baseline
  double svm_lambda = 1e-4;
  int svm_epochs = 20;
  size_t tfidf_top_k = 10000;

  TrainConfig train;

  static ExperimentConfig from_json_string(const std::string& s);
  static ExperimentConfig load(const std::string& path);
  std::string to_json_string() const;
  void save(const std::string& path) const;
  void validate() const;

  ModelSpec model_spec(size_t vocab_size, size_t num_labels) const;
};

struct PreparedData {
  Corpus corpus;        // after optional anonymization / balancing
  TokenVocab vocab;
  TaskDatasets data;
};

LabelVocabulary resolve_labels(const ExperimentConfig& cfg);
PreparedData prepare_data(const ExperimentConfig& cfg);

// Train one seeded run and write checkpoint / history.json / metrics.json /
// config.json / vocab.json into run_dir. Returns the run result.
RunResult run_single_training(const ExperimentConfig& cfg,
                              const PreparedData& prepared, uint64_t seed,
                              const std::string& run_dir);

// command entry points; artifacts land under cfg.out_dir
void cmd_ingest(const ExperimentConfig& cfg);
void cmd_stats(const ExperimentConfig& cfg);
void cmd_anonymize(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_search(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& run_dir,
                  const std::string& split);
void cmd_explain(const ExperimentConfig& cfg, const std::string& run_dir,
                 const std::string& case_id);
void cmd_synth(const SynthParams& params, const std::string& out_dir);

}  // namespace lexpred
