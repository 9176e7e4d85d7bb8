#include "lexpred/experiment.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lexpred {

namespace {

void write_text_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  if (!os) throw RuntimeFailure("cannot open " + path);
  os << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool is_neural_arch(const std::string& arch) {
  return arch == "bigru-att" || arch == "han" || arch == "lwan" ||
         arch == "flat-trunc" || arch == "hier-enc";
}

}  // namespace

// ---------------------------------------------------------------------------
// config

ExperimentConfig ExperimentConfig::from_json_string(const std::string& s) {
  json j = json::parse(s);
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.data_dir = j.value("data", c.data_dir);
  c.out_dir = j.value("out", c.out_dir);
  c.labels = j.value("labels", c.labels);
  c.task = j.value("task", c.task);
  c.arch = j.value("arch", c.arch);
  c.anonymized = j.value("anonymized", c.anonymized);
  c.gazetteer = j.value("gazetteer", c.gazetteer);
  c.embedding_file = j.value("embeddings", c.embedding_file);
  c.vocab_min_freq = j.value("vocab_min_freq", c.vocab_min_freq);
  c.balance = j.value("balance", c.balance);
  c.tau = j.value("tau", c.tau);
  c.runs = j.value("runs", c.runs);
  c.jobs = j.value("jobs", c.jobs);
  c.trials = j.value("trials", c.trials);
  if (j.contains("model")) {
    const json& m = j["model"];
    c.hidden = m.value("hidden", c.hidden);
    c.stack = m.value("stack", c.stack);
    c.embed_dim = m.value("embed_dim", c.embed_dim);
    c.max_len = m.value("max_len", c.max_len);
    c.frozen_embeddings = m.value("frozen_embeddings", c.frozen_embeddings);
    c.multilabel_softmax = m.value("multilabel_softmax", c.multilabel_softmax);
    if (m.contains("transformer")) {
      const json& t = m["transformer"];
      c.tf.layers = t.value("layers", c.tf.layers);
      c.tf.heads = t.value("heads", c.tf.heads);
      c.tf.model_dim = t.value("model_dim", c.tf.model_dim);
      c.tf.ff_dim = t.value("ff_dim", c.tf.ff_dim);
      c.tf.max_positions = t.value("max_positions", c.tf.max_positions);
    }
  }
  if (j.contains("baseline")) {
    const json& b = j["baseline"];
    c.svm_lambda = b.value("lambda", c.svm_lambda);
    c.svm_epochs = b.value("epochs", c.svm_epochs);
    c.tfidf_top_k = b.value("tfidf_top_k", c.tfidf_top_k);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train.batch = t.value("batch", c.train.batch);
    c.train.dropout = t.value("dropout", c.train.dropout);
    c.train.word_dropout = t.value("word_dropout", c.train.word_dropout);
    c.train.lr = t.value("lr", c.train.lr);
    c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    c.train.patience = t.value("patience", c.train.patience);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.produced_by_search =
        t.value("produced_by_search", c.train.produced_by_search);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_json_string(read_text_file(path));
}

std::string ExperimentConfig::to_json_string() const {
  json j;
  j["name"] = name;
  j["data"] = data_dir;
  j["out"] = out_dir;
  j["labels"] = labels;
  j["task"] = task;
  j["arch"] = arch;
  j["anonymized"] = anonymized;
  if (!gazetteer.empty()) j["gazetteer"] = gazetteer;
  if (!embedding_file.empty()) j["embeddings"] = embedding_file;
  j["vocab_min_freq"] = vocab_min_freq;
  j["balance"] = balance;
  j["tau"] = tau;
  j["runs"] = runs;
  j["jobs"] = jobs;
  j["trials"] = trials;
  j["model"] = {{"hidden", hidden},
                {"stack", stack},
                {"embed_dim", embed_dim},
                {"max_len", max_len},
                {"frozen_embeddings", frozen_embeddings},
                {"multilabel_softmax", multilabel_softmax},
                {"transformer",
                 {{"layers", tf.layers},
                  {"heads", tf.heads},
                  {"model_dim", tf.model_dim},
                  {"ff_dim", tf.ff_dim},
                  {"max_positions", tf.max_positions}}}};
  j["baseline"] = {{"lambda", svm_lambda},
                   {"epochs", svm_epochs},
                   {"tfidf_top_k", tfidf_top_k}};
  j["train"] = {{"batch", train.batch},
                {"dropout", train.dropout},
                {"word_dropout", train.word_dropout},
                {"lr", train.lr},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"seed", train.seed},
                {"produced_by_search", train.produced_by_search}};
  return j.dump(2) + "\n";
}

void ExperimentConfig::save(const std::string& path) const {
  write_text_file(path, to_json_string());
}

void ExperimentConfig::validate() const {
  task_from_string(task);
  if (is_neural_arch(arch)) arch_from_string(arch);
  else if (arch != "majority" && arch != "coin-toss" && arch != "bow-linear")
    throw ValidationError("config: unknown arch '" + arch + "'");
  if (train.batch < 1) throw ValidationError("config: field 'batch' must be >= 1");
  if (train.patience < 1)
    throw ValidationError("config: field 'patience' must be >= 1");
  if (train.lr <= 0.0) throw ValidationError("config: field 'lr' must be > 0");
  if (train.dropout < 0.0 || train.dropout >= 1.0)
    throw ValidationError("config: field 'dropout' must be in [0,1)");
  if (train.word_dropout < 0.0 || train.word_dropout > 1.0)
    throw ValidationError("config: field 'word_dropout' must be in [0,1]");
  if (tau < 0.0 || tau > 1.0)
    throw ValidationError("config: field 'tau' must be in [0,1]");
  if (vocab_min_freq < 1)
    throw ValidationError("config: field 'vocab_min_freq' must be >= 1");
  // search-produced configs must sit inside the declared ranges
  if (train.produced_by_search)
    validate_search_ranges(train, hidden, stack);
}

ModelSpec ExperimentConfig::model_spec(size_t vocab_size,
                                       size_t num_labels) const {
  ModelSpec spec;
  spec.arch = arch_from_string(arch);
  spec.task = task_from_string(task);
  spec.hidden = hidden;
  spec.stack = stack;
  spec.embed_dim = embed_dim;
  spec.dropout = train.dropout;
  spec.word_dropout = train.word_dropout;
  spec.max_len = max_len;
  spec.num_labels = int(num_labels);
  spec.vocab_size = int(vocab_size);
  spec.tf = tf;
  spec.frozen_embeddings = frozen_embeddings;
  spec.multilabel_softmax = multilabel_softmax;
  return spec;
}

// ---------------------------------------------------------------------------
// data preparation

LabelVocabulary resolve_labels(const ExperimentConfig& cfg) {
  if (cfg.labels == "schema") return LabelVocabulary::echr_schema();
  return LabelVocabulary::from_file(cfg.labels);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  if (cfg.data_dir.empty())
    throw ValidationError("config: field 'data' is required");
  PreparedData out;
  out.corpus = ingest_corpus(cfg.data_dir, FieldMap::defaults(),
                             resolve_labels(cfg));
  if (cfg.anonymized) {
    if (cfg.gazetteer.empty())
      throw ValidationError(
          "config: --anonymized needs a gazetteer file");
    out.corpus = anonymize_corpus(out.corpus, Gazetteer::load(cfg.gazetteer));
  }
  if (cfg.task == "binary" && cfg.balance) {
    for (const char* name : {"train", "dev"}) {
      CorpusSplit* s = out.corpus.split(name);
      if (s) *s = balance_binary(*s, mix_seed(cfg.train.seed, 0xba1a9ce));
    }
  }
  const CorpusSplit* train = out.corpus.split("train");
  if (!train) throw ValidationError("corpus has no train split");
  out.vocab = build_token_vocab(*train, cfg.vocab_min_freq);

  out.data.labels = out.corpus.labels;
  out.data.strata = stratify_labels(*train, out.corpus.labels);
  for (auto& c : train->cases)
    out.data.train.push_back(encode_case(c, out.vocab, out.corpus.labels));
  if (auto* dev = out.corpus.split("dev"))
    for (auto& c : dev->cases)
      out.data.dev.push_back(encode_case(c, out.vocab, out.corpus.labels));
  if (auto* test = out.corpus.split("test"))
    for (auto& c : test->cases)
      out.data.test.push_back(encode_case(c, out.vocab, out.corpus.labels));
  return out;
}

// ---------------------------------------------------------------------------
// training runs

RunResult run_single_training(const ExperimentConfig& cfg,
                              const PreparedData& prepared, uint64_t seed,
                              const std::string& run_dir) {
  fs::create_directories(run_dir);
  ModelSpec spec =
      cfg.model_spec(prepared.vocab.size(), prepared.data.labels.size());
  auto model = nn::Model<float>::build(spec, seed);
  if (!cfg.embedding_file.empty()) {
    // text embedding file rows override the seeded initialization
    auto vecs = nn::load_embedding_file(cfg.embedding_file);
    nn::load_pretrained_rows(model.token_embedding(), vecs,
                             prepared.vocab.tokens);
  }
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  RunResult result = nn::train_model(model, prepared.data, tc);

  model.save((fs::path(run_dir) / "checkpoint").string());
  write_text_file((fs::path(run_dir) / "history.json").string(),
                  history_to_json_string(result));
  write_text_file((fs::path(run_dir) / "metrics.json").string(),
                  result.test_metrics.to_json_string());
  ExperimentConfig resolved = cfg;
  resolved.train.seed = seed;
  resolved.save((fs::path(run_dir) / "config.json").string());
  prepared.vocab.save((fs::path(run_dir) / "vocab.json").string());
  return result;
}

namespace {

MetricsReport baseline_metrics(const ExperimentConfig& cfg,
                               const PreparedData& prepared) {
  const Corpus& corpus = prepared.corpus;
  const CorpusSplit* train = corpus.split("train");
  const CorpusSplit* test = corpus.split("test");
  if (!train || !test) throw ValidationError("baseline: missing splits");
  Task task = task_from_string(cfg.task);
  MetricsReport rep;
  rep.task = cfg.task;

  if (cfg.arch == "majority") {
    if (task == Task::Binary) {
      std::vector<int> train_y, pred, gold;
      for (auto& c : train->cases) train_y.push_back(c.violated() ? 1 : 0);
      auto p = majority_predict(train_y);
      for (auto& c : test->cases) {
        pred.push_back(p.binary_class);
        gold.push_back(c.violated() ? 1 : 0);
      }
      rep.macro = macro_prf(pred, gold);
    } else if (task == Task::Importance) {
      std::vector<double> train_y, pred, gold;
      for (auto& c : train->cases) train_y.push_back(double(c.importance));
      auto p = majority_predict_importance(train_y);
      for (auto& c : test->cases) {
        pred.push_back(p.importance_score);
        gold.push_back(double(c.importance));
      }
      rep.mae_value = mae(pred, gold);
      rep.rho = spearman_rho(pred, gold);
      if (!rep.rho) rep.rho_na_reason = "constant predictions";
    } else {
      throw ValidationError("majority baseline covers binary and importance");
    }
    return rep;
  }

  if (cfg.arch == "coin-toss") {
    if (task != Task::Binary)
      throw ValidationError("coin-toss baseline covers the binary task");
    std::vector<int> gold;
    for (auto& c : test->cases) gold.push_back(c.violated() ? 1 : 0);
    auto pred = coin_toss_predict(gold.size(), cfg.train.seed);
    rep.macro = macro_prf(pred, gold);
    return rep;
  }

  // bow-linear
  TfidfFeaturizer feat;
  feat.top_k = cfg.tfidf_top_k;
  feat.fit(*train);
  auto Xtr = feat.featurize(train->cases);
  auto Xte = feat.featurize(test->cases);
  if (task == Task::Binary) {
    std::vector<int> ytr, pred, gold;
    for (auto& c : train->cases) ytr.push_back(c.violated() ? 1 : 0);
    auto m = svm_train(Xtr, ytr, feat.dim(), cfg.svm_lambda, cfg.svm_epochs,
                       cfg.train.seed);
    for (size_t i = 0; i < Xte.size(); ++i) {
      pred.push_back(m.decide(Xte[i]));
      gold.push_back(test->cases[i].violated() ? 1 : 0);
    }
    rep.macro = macro_prf(pred, gold);
  } else if (task == Task::Multilabel) {
    std::vector<std::vector<std::string>> ytr, pred, gold;
    for (auto& c : train->cases) ytr.push_back(c.violated_articles);
    auto m = ovr_train(Xtr, ytr, corpus.labels, feat.dim(), cfg.svm_lambda,
                       cfg.svm_epochs, cfg.train.seed);
    for (size_t i = 0; i < Xte.size(); ++i) {
      pred.push_back(m.decide_labels(Xte[i]));
      gold.push_back(test->cases[i].violated_articles);
    }
    auto strata = stratify_labels(*train, corpus.labels);
    auto scores = stratified_report(pred, gold, corpus.labels, strata);
    rep.micro_all = scores.all;
    rep.micro_frequent = scores.frequent;
    rep.micro_few = scores.few;
    if (!scores.few) rep.micro_na_reason = "stratum is empty";
  } else {
    std::vector<double> ytr, pred, gold;
    for (auto& c : train->cases) ytr.push_back(double(c.importance));
    auto m = svr_train(Xtr, ytr, feat.dim(), cfg.svm_lambda, 0.1,
                       cfg.svm_epochs, cfg.train.seed);
    for (size_t i = 0; i < Xte.size(); ++i) {
      pred.push_back(std::clamp(m.predict_value(Xte[i]), 1.0, 4.0));
      gold.push_back(double(test->cases[i].importance));
    }
    rep.mae_value = mae(pred, gold);
    rep.rho = spearman_rho(pred, gold);
    if (!rep.rho) rep.rho_na_reason = "zero rank variance";
  }
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------
// commands

void cmd_ingest(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw ValidationError("ingest: --out is required");
  PreparedData prepared;
  prepared.corpus = ingest_corpus(cfg.data_dir, FieldMap::defaults(),
                                  resolve_labels(cfg));
  write_corpus(cfg.out_dir, prepared.corpus);
  StatsReport stats = compute_stats(prepared.corpus);
  std::cout << format_stats_table(stats);
}

void cmd_stats(const ExperimentConfig& cfg) {
  Corpus corpus = ingest_corpus(cfg.data_dir, FieldMap::defaults(),
                                resolve_labels(cfg));
  StatsReport stats = compute_stats(corpus);
  std::cout << format_stats_table(stats);
  auto strata = stratify_labels(*corpus.split("train"), corpus.labels);
  std::cout << "label strata: frequent=" << strata.frequent.size()
            << " few=" << strata.few.size() << " zero=" << strata.zero.size()
            << "\n";
  if (!cfg.out_dir.empty()) {
    json j;
    for (auto& [name, s] : stats.per_split) {
      j["splits"][name] = {{"cases", s.case_count},
                           {"words_per_case", s.mean_words},
                           {"facts_per_case", s.mean_facts},
                           {"articles_per_case", s.mean_articles},
                           {"empty", s.empty_flag}};
    }
    for (auto& [score, n] : stats.importance_histogram)
      j["importance_histogram"][std::to_string(score)] = n;
    j["violation_ratio"] = stats.violation_ratio;
    j["strata"] = {{"frequent", strata.frequent.size()},
                   {"few", strata.few.size()},
                   {"zero", strata.zero.size()}};
    write_text_file((fs::path(cfg.out_dir) / "stats.json").string(),
                    j.dump(2) + "\n");
  }
}

void cmd_anonymize(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty())
    throw ValidationError("anonymize: --out is required");
  if (cfg.gazetteer.empty())
    throw ValidationError("anonymize: --gazetteer is required");
  Corpus corpus = ingest_corpus(cfg.data_dir, FieldMap::defaults(),
                                resolve_labels(cfg));
  Corpus masked = anonymize_corpus(corpus, Gazetteer::load(cfg.gazetteer));
  write_corpus(cfg.out_dir, masked);
  std::cout << "anonymized corpus written to " << cfg.out_dir << "\n";
}

void cmd_train(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw ValidationError("train: --out is required");
  PreparedData prepared = prepare_data(cfg);

  if (!is_neural_arch(cfg.arch)) {
    MetricsReport rep = baseline_metrics(cfg, prepared);
    write_text_file((fs::path(cfg.out_dir) / "metrics.json").string(),
                    rep.to_json_string());
    cfg.save((fs::path(cfg.out_dir) / "config.json").string());
    std::cout << rep.format_table();
    return;
  }

  fs::path trial_dir = fs::path(cfg.out_dir) / "trial-0";
  if (cfg.runs <= 1) {
    auto run_dir = trial_dir / ("seed-" + std::to_string(cfg.train.seed));
    RunResult r =
        run_single_training(cfg, prepared, cfg.train.seed, run_dir.string());
    std::cout << "best epoch " << r.best_epoch << " (dev loss "
              << r.best_dev_loss << ")\n"
              << r.test_metrics.format_table();
    return;
  }

  // multi-run protocol: per-seed artifacts plus an aggregate recomputable
  // from them
  auto seeds = multi_run_seeds(cfg.train.seed, cfg.runs);
  std::vector<MetricsReport> reports(seeds.size());
  std::atomic<size_t> next{0};
  std::vector<std::string> errors(seeds.size());
  int jobs = std::max(1, cfg.jobs);
  auto worker = [&]() {
    for (;;) {
      size_t k = next.fetch_add(1);
      if (k >= seeds.size()) return;
      try {
        auto run_dir = trial_dir / ("seed-" + std::to_string(seeds[k]));
        RunResult r =
            run_single_training(cfg, prepared, seeds[k], run_dir.string());
        reports[k] = r.test_metrics;
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (!e.empty()) throw RuntimeFailure("multi-run: " + e);

  auto agg = aggregate_reports(reports);
  write_text_file((fs::path(cfg.out_dir) / "aggregate.json").string(),
                  aggregate_to_json_string(agg));
  for (auto& [namek, entry] : agg)
    std::cout << namek << ": " << entry.mean << " +/- " << entry.stddev
              << "\n";
}

void cmd_search(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw ValidationError("search: --out is required");
  PreparedData prepared = prepare_data(cfg);
  SearchSpace space;
  auto draws = sample_search(space, cfg.trials, cfg.train.seed);

  struct Trial {
    SearchDraw draw;
    double dev_loss = 0.0;
    std::string error;
  };
  std::vector<Trial> trials(draws.size());
  for (size_t k = 0; k < draws.size(); ++k) trials[k].draw = draws[k];

  std::atomic<size_t> next{0};
  int jobs = std::max(1, cfg.jobs);
  auto worker = [&]() {
    for (;;) {
      size_t k = next.fetch_add(1);
      if (k >= trials.size()) return;
      try {
        ExperimentConfig tc = cfg;
        tc.train.batch = trials[k].draw.batch;
        tc.train.dropout = trials[k].draw.dropout;
        tc.train.word_dropout = trials[k].draw.word_dropout;
        tc.hidden = trials[k].draw.hidden;
        tc.stack = trials[k].draw.stack;
        tc.train.produced_by_search = true;
        tc.validate();
        uint64_t trial_seed = mix_seed(cfg.train.seed, k + 1);
        auto run_dir = fs::path(cfg.out_dir) / ("trial-" + std::to_string(k)) /
                       ("seed-" + std::to_string(trial_seed));
        RunResult r =
            run_single_training(tc, prepared, trial_seed, run_dir.string());
        trials[k].dev_loss = r.best_dev_loss;
      } catch (const std::exception& e) {
        trials[k].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& t : trials)
    if (!t.error.empty()) throw RuntimeFailure("search: " + t.error);

  std::vector<size_t> ranked(trials.size());
  for (size_t i = 0; i < ranked.size(); ++i) ranked[i] = i;
  std::stable_sort(ranked.begin(), ranked.end(), [&](size_t a, size_t b) {
    return trials[a].dev_loss < trials[b].dev_loss;
  });

  json j = json::array();
  for (size_t i : ranked) {
    j.push_back({{"trial", i},
                 {"batch", trials[i].draw.batch},
                 {"dropout", trials[i].draw.dropout},
                 {"word_dropout", trials[i].draw.word_dropout},
                 {"hidden", trials[i].draw.hidden},
                 {"stack", trials[i].draw.stack},
                 {"dev_loss", trials[i].dev_loss}});
  }
  write_text_file((fs::path(cfg.out_dir) / "trials.json").string(),
                  j.dump(2) + "\n");

  ExperimentConfig best = cfg;
  const SearchDraw& bd = trials[ranked[0]].draw;
  best.train.batch = bd.batch;
  best.train.dropout = bd.dropout;
  best.train.word_dropout = bd.word_dropout;
  best.hidden = bd.hidden;
  best.stack = bd.stack;
  best.train.produced_by_search = true;
  best.save((fs::path(cfg.out_dir) / "best_config.json").string());
  std::cout << "best trial " << ranked[0] << " dev loss "
            << trials[ranked[0]].dev_loss << "\n";
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& run_dir,
                  const std::string& split) {
  ExperimentConfig run_cfg =
      ExperimentConfig::load((fs::path(run_dir) / "config.json").string());
  run_cfg.data_dir = cfg.data_dir.empty() ? run_cfg.data_dir : cfg.data_dir;
  TokenVocab vocab =
      TokenVocab::load((fs::path(run_dir) / "vocab.json").string());

  Corpus corpus = ingest_corpus(run_cfg.data_dir, FieldMap::defaults(),
                                resolve_labels(run_cfg));
  if (run_cfg.anonymized)
    corpus = anonymize_corpus(corpus, Gazetteer::load(run_cfg.gazetteer));

  TaskDatasets data;
  data.labels = corpus.labels;
  data.strata = stratify_labels(*corpus.split("train"), corpus.labels);
  const CorpusSplit* s = corpus.split(split);
  if (!s) throw ValidationError("evaluate: no split named '" + split + "'");
  std::vector<EncodedCase> cases;
  for (auto& c : s->cases) cases.push_back(encode_case(c, vocab, corpus.labels));

  ModelSpec spec = run_cfg.model_spec(vocab.size(), corpus.labels.size());
  auto model = nn::Model<float>::build(spec, run_cfg.train.seed);
  model.load((fs::path(run_dir) / "checkpoint").string());
  MetricsReport rep = nn::evaluate_model(model, data, cases, run_cfg.tau);
  std::cout << rep.format_table();
  if (!cfg.out_dir.empty())
    write_text_file((fs::path(cfg.out_dir) / "metrics.json").string(),
                    rep.to_json_string());
}

void cmd_explain(const ExperimentConfig& cfg, const std::string& run_dir,
                 const std::string& case_id) {
  ExperimentConfig run_cfg =
      ExperimentConfig::load((fs::path(run_dir) / "config.json").string());
  run_cfg.data_dir = cfg.data_dir.empty() ? run_cfg.data_dir : cfg.data_dir;
  if (cfg.out_dir.empty()) throw ValidationError("explain: --out is required");
  TokenVocab vocab =
      TokenVocab::load((fs::path(run_dir) / "vocab.json").string());
  Corpus corpus = ingest_corpus(run_cfg.data_dir, FieldMap::defaults(),
                                resolve_labels(run_cfg));
  if (run_cfg.anonymized)
    corpus = anonymize_corpus(corpus, Gazetteer::load(run_cfg.gazetteer));

  const Case* target = nullptr;
  for (auto& s : corpus.splits)
    for (auto& c : s.cases)
      if (c.case_id == case_id) target = &c;
  if (!target)
    throw ValidationError("explain: case '" + case_id + "' not found");

  ModelSpec spec = run_cfg.model_spec(vocab.size(), corpus.labels.size());
  auto model = nn::Model<float>::build(spec, run_cfg.train.seed);
  model.load((fs::path(run_dir) / "checkpoint").string());

  AttentionTrace trace = capture_trace(model, *target, vocab, corpus.labels);
  write_text_file((fs::path(cfg.out_dir) / "trace.json").string(),
                  trace.to_json_string());
  export_heatmap(trace, (fs::path(cfg.out_dir) / "trace.html").string());
  std::cout << "trace written for " << case_id << "\n";

  std::string gaz_path =
      !cfg.gazetteer.empty() ? cfg.gazetteer : run_cfg.gazetteer;
  if (!gaz_path.empty()) {
    auto share =
        entity_attention_share(trace, *target, Gazetteer::load(gaz_path));
    json j;
    j["entity_attention_share"] = share.share;
    j["skipped_spans"] = share.skipped;
    write_text_file((fs::path(cfg.out_dir) / "entity_share.json").string(),
                    j.dump(2) + "\n");
    std::cout << "entity attention share: " << share.share << "\n";
  }
}

void cmd_synth(const SynthParams& params, const std::string& out_dir) {
  if (out_dir.empty()) throw ValidationError("synth: --out is required");
  Corpus corpus = generate_synth_corpus(params);
  write_corpus(out_dir, corpus);
  json meta;
  meta["cases"] = params.n_cases;
  meta["vocab_size"] = params.vocab_size;
  meta["facts_per_case"] = params.facts_per_case;
  meta["words_per_fact"] = params.words_per_fact;
  meta["n_labels"] = params.n_labels;
  meta["signal_fact"] = params.signal_fact;
  meta["signal_word"] = params.signal_word;
  meta["decoys"] = params.decoys;
  meta["seed"] = params.seed;
  write_text_file((fs::path(out_dir) / "synth.json").string(),
                  meta.dump(2) + "\n");
  std::cout << "synthetic corpus written to " << out_dir << "\n";
}

}  // namespace lexpred
