#include "lexpred/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lexpred/text.hpp"

namespace lexpred {

// ---------------------------------------------------------------------------
// tf-idf featurizer

std::vector<std::string> TfidfFeaturizer::case_ngrams(const Case& c) const {
  std::vector<std::string> toks;
  for (auto& f : c.facts) {
    auto t = text::tokenize(f);
    toks.insert(toks.end(), t.begin(), t.end());
  }
  std::vector<std::string> grams;
  for (int n = min_n; n <= max_n; ++n) {
    if (int(toks.size()) < n) break;
    for (size_t i = 0; i + size_t(n) <= toks.size(); ++i) {
      std::string g = toks[i];
      for (int k = 1; k < n; ++k) {
        g += ' ';
        g += toks[i + size_t(k)];
      }
      grams.push_back(std::move(g));
    }
  }
  return grams;
}

void TfidfFeaturizer::fit(const CorpusSplit& train) {
  std::unordered_map<std::string, size_t> freq;
  std::unordered_map<std::string, size_t> df;
  for (auto& c : train.cases) {
    auto grams = case_ngrams(c);
    std::set<std::string> distinct;
    for (auto& g : grams) {
      freq[g]++;
      distinct.insert(g);
    }
    for (auto& g : distinct) df[g]++;
  }
  std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);

  ngrams_.clear();
  index_.clear();
  idf_.clear();
  double n_docs = double(train.cases.size());
  for (auto& [g, cnt] : ranked) {
    index_[g] = int(ngrams_.size());
    ngrams_.push_back(g);
    idf_.push_back(std::log(n_docs / double(df[g])));
  }
  fitted_ = true;
}

SparseVec TfidfFeaturizer::featurize(const Case& c) const {
  if (!fitted_)
    throw ValidationError("tfidf: featurize called before fit");
  std::map<int, double> acc;
  for (auto& g : case_ngrams(c)) {
    auto it = index_.find(g);
    if (it != index_.end()) acc[it->second] += 1.0;
  }
  SparseVec v;
  double norm2 = 0.0;
  for (auto& [idx, tf] : acc) {
    double x = tf * idf_[size_t(idx)];
    if (x != 0.0) v.emplace_back(idx, x);
    norm2 += x * x;
  }
  if (norm2 > 0.0) {
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& [idx, x] : v) x *= inv;
  }
  return v;
}

std::vector<SparseVec> TfidfFeaturizer::featurize(
    const std::vector<Case>& cases) const {
  std::vector<SparseVec> out;
  out.reserve(cases.size());
  for (auto& c : cases) out.push_back(featurize(c));
  return out;
}

// ---------------------------------------------------------------------------
// linear models

double LinearModel::margin(const SparseVec& x, size_t out_idx) const {
  const auto& wv = w.at(out_idx);
  double s = b.at(out_idx);
  for (auto& [i, v] : x) s += wv[size_t(i)] * v;
  return s;
}

std::vector<std::string> LinearModel::decide_labels(const SparseVec& x) const {
  std::vector<std::string> out;
  for (size_t l = 0; l < label_names.size(); ++l)
    if (margin(x, l) >= 0.0) out.push_back(label_names[l]);
  return out;
}

namespace {

// one pass of pegasos-style updates on (x, y in {-1,+1})
void hinge_epoch(std::vector<double>& w, double& b, double lambda,
                 const std::vector<SparseVec>& X, const std::vector<int>& y01,
                 std::vector<size_t>& order, Rng& rng, int64_t& t) {
  rng.shuffle(order);
  for (size_t k : order) {
    ++t;
    double eta = 1.0 / (lambda * double(t));
    double yv = y01[k] ? 1.0 : -1.0;
    double m = b;
    for (auto& [i, v] : X[k]) m += w[size_t(i)] * v;
    double shrink = 1.0 - eta * lambda;
    for (auto& wi : w) wi *= shrink;
    if (yv * m < 1.0) {
      for (auto& [i, v] : X[k]) w[size_t(i)] += eta * yv * v;
      b += eta * yv;
    }
  }
}

}  // namespace

LinearModel svm_train(const std::vector<SparseVec>& features,
                      const std::vector<int>& labels, size_t dim,
                      double lambda, int epochs, uint64_t seed) {
  if (features.size() != labels.size())
    throw ValidationError("svm_train: feature/label count mismatch");
  bool has0 = false, has1 = false;
  for (int y : labels) (y ? has1 : has0) = true;
  if (!has0 || !has1)
    throw ValidationError("svm_train: both classes required");
  LinearModel m;
  m.mode = LinearMode::BinaryHinge;
  m.lambda = lambda;
  m.w.assign(1, std::vector<double>(dim, 0.0));
  m.b.assign(1, 0.0);
  std::vector<size_t> order(features.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  int64_t t = 0;
  for (int e = 0; e < epochs; ++e)
    hinge_epoch(m.w[0], m.b[0], lambda, features, labels, order, rng, t);
  return m;
}

LinearModel ovr_train(const std::vector<SparseVec>& features,
                      const std::vector<std::vector<std::string>>& label_sets,
                      const LabelVocabulary& vocab, size_t dim, double lambda,
                      int epochs, uint64_t seed) {
  if (features.size() != label_sets.size())
    throw ValidationError("ovr_train: feature/label count mismatch");
  LinearModel m;
  m.mode = LinearMode::OneVsRestHinge;
  m.lambda = lambda;
  for (size_t l = 0; l < vocab.size(); ++l) {
    const std::string& article = vocab.articles[l];
    std::vector<int> y(features.size(), 0);
    bool any = false;
    for (size_t i = 0; i < label_sets.size(); ++i)
      for (auto& a : label_sets[i])
        if (a == article) {
          y[i] = 1;
          any = true;
        }
    std::vector<double> w(dim, 0.0);
    double b = -1.0;  // articles absent from training stay never-predicted
    if (any) {
      b = 0.0;
      std::vector<size_t> order(features.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      // per-label stream so removing one label cannot shift another's draws
      Rng rng(mix_seed(seed, l));
      int64_t t = 0;
      for (int e = 0; e < epochs; ++e)
        hinge_epoch(w, b, lambda, features, y, order, rng, t);
    }
    m.w.push_back(std::move(w));
    m.b.push_back(b);
    m.label_names.push_back(article);
  }
  return m;
}

LinearModel svr_train(const std::vector<SparseVec>& features,
                      const std::vector<double>& targets, size_t dim,
                      double lambda, double epsilon, int epochs,
                      uint64_t seed) {
  if (features.size() != targets.size())
    throw ValidationError("svr_train: feature/target count mismatch");
  LinearModel m;
  m.mode = LinearMode::EpsRegression;
  m.lambda = lambda;
  m.epsilon = epsilon;
  m.w.assign(1, std::vector<double>(dim, 0.0));
  m.b.assign(1, 0.0);
  auto& w = m.w[0];
  auto& b = m.b[0];
  std::vector<size_t> order(features.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  int64_t t = 0;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (size_t k : order) {
      ++t;
      double eta = 1.0 / (lambda * double(t));
      double pred = b;
      for (auto& [i, v] : features[k]) pred += w[size_t(i)] * v;
      double err = pred - targets[k];
      double shrink = 1.0 - eta * lambda;
      for (auto& wi : w) wi *= shrink;
      if (std::abs(err) > epsilon) {
        double sgn = err > 0.0 ? 1.0 : -1.0;
        for (auto& [i, v] : features[k]) w[size_t(i)] -= eta * sgn * v;
        b -= eta * sgn;
      }
    }
  }
  return m;
}

double svm_objective(const LinearModel& m, const std::vector<SparseVec>& X,
                     const std::vector<int>& y) {
  double reg = 0.0;
  for (double wi : m.w[0]) reg += wi * wi;
  reg *= 0.5 * m.lambda;
  double hinge = 0.0;
  for (size_t k = 0; k < X.size(); ++k) {
    double yv = y[k] ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - yv * m.margin(X[k]));
  }
  return reg + hinge / double(X.size());
}

// ---------------------------------------------------------------------------
// trivial baselines

MajorityPredictor majority_predict(const std::vector<int>& binary_labels) {
  if (binary_labels.empty())
    throw ValidationError("majority: empty training labels");
  size_t n1 = 0;
  for (int y : binary_labels) n1 += size_t(y != 0);
  size_t n0 = binary_labels.size() - n1;
  MajorityPredictor p;
  p.binary_class = n1 > n0 ? 1 : 0;  // tie -> lower class id
  return p;
}

MajorityPredictor majority_predict_importance(
    const std::vector<double>& importance_labels) {
  if (importance_labels.empty())
    throw ValidationError("majority: empty training labels");
  std::map<double, size_t> counts;
  for (double y : importance_labels) counts[y]++;
  double best = counts.begin()->first;
  size_t best_n = counts.begin()->second;
  for (auto& [score, n] : counts) {
    if (n > best_n) {  // ties keep the lower score (map is ordered)
      best = score;
      best_n = n;
    }
  }
  MajorityPredictor p;
  p.importance_score = best;
  return p;
}

std::vector<int> coin_toss_predict(size_t n_cases, uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(n_cases);
  for (auto& v : out) v = rng.bernoulli(0.5) ? 1 : 0;
  return out;
}

}  // namespace lexpred
