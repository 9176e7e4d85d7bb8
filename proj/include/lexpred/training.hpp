#pragma once
// Losses, Adam, early stopping, the training loop, random hyperparameter
// search, and multi-run aggregation.

#include <cmath>
#include <string>
#include <vector>

#include "lexpred/evaluation.hpp"
#include "lexpred/models.hpp"

namespace lexpred {

struct TrainConfig {
  int batch = 16;
  double dropout = 0.0;
  double word_dropout = 0.0;
  double lr = 0.001;
  int max_epochs = 20;
  int patience = 3;
  uint64_t seed = 1;
  bool produced_by_search = false;
};

// The §-style discrete search ranges; hidden/stack come from the encoder
// options.
struct SearchSpace {
  std::vector<int> batch = {8, 12, 16};
  std::vector<double> dropout = {0.1, 0.2, 0.3, 0.4};
  std::vector<double> word_dropout = {0.0, 0.01, 0.02};
  std::vector<int> hidden = {200, 300, 400};
  std::vector<int> stack = {1, 2};
};

struct SearchDraw {
  int batch = 16;
  double dropout = 0.1;
  double word_dropout = 0.0;
  int hidden = 300;
  int stack = 1;
};

// n independent uniform draws over the discrete product space; duplicates
// allowed.
std::vector<SearchDraw> sample_search(const SearchSpace& space, int n,
                                      uint64_t seed);

// Search-produced configs must stay inside the declared ranges; throws a
// ValidationError naming the offending field.
void validate_search_ranges(const TrainConfig& cfg, int hidden, int stack,
                            const SearchSpace& space = SearchSpace());

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct RunResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 1-based
  double best_dev_loss = 0.0;
  MetricsReport test_metrics;
};

std::string history_to_json_string(const RunResult& r);

struct TaskDatasets {
  std::vector<EncodedCase> train, dev, test;
  LabelVocabulary labels;
  FrequencyStrata strata;
};

// early-stopping bookkeeping: stop after `patience` epochs without a strict
// improvement of the dev loss
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ValidationError("patience must be >= 1");
  }
  // returns true if this epoch's dev loss improved on the best so far
  bool observe(double dev_loss) {
    ++epoch_;
    if (epoch_ == 1 || dev_loss < best_) {
      best_ = dev_loss;
      best_epoch_ = epoch_;
      bad_ = 0;
      return true;
    }
    ++bad_;
    return false;
  }
  bool should_stop() const { return bad_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int bad_ = 0;
  int best_epoch_ = 0;
  double best_ = 0.0;
};

// ---------------------------------------------------------------------------
// losses (score epsilon-clamped at 1e-7 before the log)

namespace nn {

template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
  return ad::add_const(ad::scale(x, T(-1)), T(1));
}

template <typename T>
Tensor<T> loss_binary(const Tensor<T>& score, int gold) {
  Tensor<T> s = ad::clamp(score, T(1e-7), T(1.0 - 1e-7));
  Tensor<T> term = gold ? ad::log_t(s) : ad::log_t(one_minus(s));
  return ad::scale(ad::sum_all(term), T(-1));
}

// mean over labels of the per-label cross-entropy (sigmoid head)
template <typename T>
Tensor<T> loss_multilabel(const Tensor<T>& scores,
                          const std::vector<uint8_t>& gold) {
  if (size_t(scores.size()) != gold.size())
    throw ValidationError("loss_multilabel: score/label count mismatch");
  Tensor<T> s = ad::clamp(scores, T(1e-7), T(1.0 - 1e-7));
  std::vector<T> y(gold.size());
  for (size_t i = 0; i < gold.size(); ++i) y[i] = T(gold[i]);
  Tensor<T> yt = Tensor<T>::from_values(scores.shape(), std::move(y));
  Tensor<T> ce = ad::add(ad::mul(yt, ad::log_t(s)),
                         ad::mul(one_minus(yt), ad::log_t(one_minus(s))));
  return ad::scale(ad::mean_all(ce), T(-1));
}

// softmax-over-(L+1) option: cross-entropy against a target distribution
// uniform over the gold labels, or the no-violation class when empty
template <typename T>
Tensor<T> loss_multilabel_softmax(const Tensor<T>& probs,
                                  const std::vector<uint8_t>& gold) {
  size_t L = gold.size();
  if (size_t(probs.size()) != L + 1)
    throw ValidationError("loss_multilabel_softmax: expects L+1 probs");
  size_t npos = 0;
  for (uint8_t g : gold) npos += g;
  std::vector<T> target(L + 1, T(0));
  if (npos == 0) {
    target[L] = T(1);
  } else {
    for (size_t i = 0; i < L; ++i)
      if (gold[i]) target[i] = T(1.0 / double(npos));
  }
  Tensor<T> t = Tensor<T>::from_values(probs.shape(), std::move(target));
  Tensor<T> p = ad::clamp(probs, T(1e-7), T(1.0));
  return ad::scale(ad::sum_all(ad::mul(t, ad::log_t(p))), T(-1));
}

template <typename T>
Tensor<T> loss_importance(const Tensor<T>& pred, double gold) {
  Tensor<T> g = Tensor<T>::from_values(pred.shape(),
                                       std::vector<T>(size_t(pred.size()),
                                                      T(gold)));
  return ad::sum_all(ad::abs_t(ad::sub(pred, g)));
}

template <typename T>
Tensor<T> case_loss(const Model<T>& model, const ForwardOut<T>& out,
                    const EncodedCase& ec) {
  switch (model.spec.task) {
    case Task::Binary: return loss_binary(out.scores, ec.binary_label);
    case Task::Multilabel:
      return model.spec.multilabel_softmax
                 ? loss_multilabel_softmax(out.scores, ec.labels)
                 : loss_multilabel(out.scores, ec.labels);
    case Task::Importance: return loss_importance(out.scores, ec.importance);
  }
  throw ValidationError("case_loss: unknown task");
}

// ---------------------------------------------------------------------------
// Adam (bias-corrected), beta1=0.9, beta2=0.999, eps=1e-8

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  int64_t t = 0;

  void init(const ParamList<T>& params) {
    m.clear();
    v.clear();
    for (auto& p : params) {
      m.emplace_back(p.tensor.values().size(), T(0));
      v.emplace_back(p.tensor.values().size(), T(0));
    }
    t = 0;
  }
};

template <typename T>
void adam_step(ParamList<T>& params, AdamState<T>& state, double lr = 0.001,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (state.m.size() != params.size())
    throw ValidationError("adam_step: state/parameter count mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(beta1, double(state.t));
  double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    if (!params[pi].trainable) continue;
    auto& w = params[pi].tensor.values();
    auto& g = params[pi].tensor.grad();
    if (g.size() != w.size())
      throw ValidationError("adam_step: gradient shape mismatch for " +
                            params[pi].name);
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (size_t i = 0; i < w.size(); ++i) {
      double gi = double(g[i]);
      m[i] = T(beta1 * double(m[i]) + (1.0 - beta1) * gi);
      v[i] = T(beta2 * double(v[i]) + (1.0 - beta2) * gi * gi);
      double mhat = double(m[i]) / bc1;
      double vhat = double(v[i]) / bc2;
      w[i] = T(double(w[i]) - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

// ---------------------------------------------------------------------------
// training loop

template <typename T>
double dataset_loss(const Model<T>& model,
                    const std::vector<EncodedCase>& cases) {
  ad::NoGradGuard ng;
  double total = 0.0;
  for (auto& ec : cases) {
    auto out = model.forward(ec);
    total += double(case_loss(model, out, ec).item());
  }
  return cases.empty() ? 0.0 : total / double(cases.size());
}

template <typename T>
MetricsReport evaluate_model(const Model<T>& model, const TaskDatasets& data,
                             const std::vector<EncodedCase>& cases,
                             double tau = 0.5) {
  ad::NoGradGuard ng;
  MetricsReport rep;
  rep.task = task_to_string(model.spec.task);
  switch (model.spec.task) {
    case Task::Binary: {
      std::vector<int> pred, gold;
      for (auto& ec : cases) {
        pred.push_back(predict_case(model, ec, data.labels, tau).binary);
        gold.push_back(ec.binary_label);
      }
      rep.macro = macro_prf(pred, gold);
      break;
    }
    case Task::Multilabel: {
      std::vector<std::vector<std::string>> pred, gold;
      for (auto& ec : cases) {
        pred.push_back(predict_case(model, ec, data.labels, tau).labels);
        std::vector<std::string> g;
        for (size_t l = 0; l < ec.labels.size(); ++l)
          if (ec.labels[l]) g.push_back(data.labels.articles[l]);
        gold.push_back(std::move(g));
      }
      auto scores = stratified_report(pred, gold, data.labels, data.strata);
      rep.micro_all = scores.all;
      rep.micro_frequent = scores.frequent;
      rep.micro_few = scores.few;
      if (!scores.few) rep.micro_na_reason = "stratum is empty";
      break;
    }
    case Task::Importance: {
      std::vector<double> pred, gold;
      for (auto& ec : cases) {
        pred.push_back(predict_case(model, ec, data.labels, tau).importance);
        gold.push_back(ec.importance);
      }
      rep.mae_value = mae(pred, gold);
      rep.rho = spearman_rho(pred, gold);
      if (!rep.rho) rep.rho_na_reason = "zero rank variance";
      break;
    }
  }
  return rep;
}

// Mini-batch epochs with seeded shuffling, early stopping on the dev loss,
// best-checkpoint restoration, and test metrics from the restored model.
template <typename T>
RunResult train_model(Model<T>& model, const TaskDatasets& data,
                      const TrainConfig& cfg) {
  if (data.train.empty()) throw ValidationError("train: empty training split");
  if (cfg.batch < 1) throw ValidationError("train: batch must be >= 1");

  // dropout rates flow through the model spec
  model.spec.dropout = cfg.dropout;
  model.spec.word_dropout = cfg.word_dropout;

  ParamList<T> params = model.params();
  ParamList<T> trainable;
  for (auto& p : params)
    if (p.trainable) trainable.push_back(p);
  AdamState<T> adam;
  adam.init(trainable);

  Rng rng(cfg.seed);
  EarlyStopper stopper(cfg.patience);
  RunResult result;
  std::vector<std::vector<T>> best_snapshot = model.snapshot();

  std::vector<size_t> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t processed = 0;
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch)) {
      size_t stop = std::min(order.size(), start + size_t(cfg.batch));
      std::vector<Tensor<T>> losses;
      for (size_t k = start; k < stop; ++k) {
        const EncodedCase& ec = data.train[order[k]];
        auto out = model.forward(ec, true, &rng);
        losses.push_back(case_loss(model, out, ec));
      }
      Tensor<T> batch_loss = losses[0];
      for (size_t k = 1; k < losses.size(); ++k)
        batch_loss = ad::add(batch_loss, losses[k]);
      batch_loss = ad::scale(batch_loss, T(1.0 / double(losses.size())));
      double lv = double(batch_loss.item());
      if (std::isnan(lv) || std::isinf(lv))
        throw RuntimeFailure("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(start / size_t(cfg.batch)));
      epoch_loss += lv * double(stop - start);
      processed += stop - start;
      ad::backward(batch_loss);
      adam_step(trainable, adam, cfg.lr);
      for (auto& p : trainable) p.tensor.zero_grad();
    }
    epoch_loss /= double(processed);
    double dev_loss = dataset_loss(model, data.dev);
    result.history.push_back({epoch, epoch_loss, dev_loss});
    if (stopper.observe(dev_loss)) best_snapshot = model.snapshot();
    if (stopper.should_stop()) break;
  }

  model.restore(best_snapshot);
  result.best_epoch = stopper.best_epoch();
  result.best_dev_loss = stopper.best_loss();
  result.test_metrics = evaluate_model(model, data, data.test);
  return result;
}

}  // namespace nn

// five runs with derived seeds; reports mean and population std
std::vector<uint64_t> multi_run_seeds(uint64_t base_seed, int runs);

}  // namespace lexpred
