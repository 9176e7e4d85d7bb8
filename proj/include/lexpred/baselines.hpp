#pragma once
// Majority, coin-toss, and TF-IDF n-gram linear max-margin baselines.

#include <string>
#include <unordered_map>
#include <vector>

#include "lexpred/common.hpp"
#include "lexpred/corpus.hpp"

namespace lexpred {

// sparse feature vector: (index, value) pairs sorted by index
using SparseVec = std::vector<std::pair<int, double>>;

class TfidfFeaturizer {
 public:
  int min_n = 1;
  int max_n = 5;
  size_t top_k = 10000;

  // vocabulary = top-K most frequent [min_n, max_n]-grams of the training
  // cases (ties broken lexicographically); idf = ln(N / df)
  void fit(const CorpusSplit& train);

  bool fitted() const { return fitted_; }
  size_t dim() const { return ngrams_.size(); }
  const std::vector<std::string>& ngrams() const { return ngrams_; }
  const std::vector<double>& idf() const { return idf_; }

  // tf (raw count) * idf, L2-normalized
  SparseVec featurize(const Case& c) const;
  std::vector<SparseVec> featurize(const std::vector<Case>& cases) const;

 private:
  std::vector<std::string> ngrams_;
  std::unordered_map<std::string, int> index_;
  std::vector<double> idf_;
  bool fitted_ = false;

  std::vector<std::string> case_ngrams(const Case& c) const;
};

enum class LinearMode { BinaryHinge, OneVsRestHinge, EpsRegression };

struct LinearModel {
  LinearMode mode = LinearMode::BinaryHinge;
  std::vector<std::vector<double>> w;  // one weight vector per output
  std::vector<double> b;
  double lambda = 1e-4;
  double epsilon = 0.1;  // regression insensitivity
  std::vector<std::string> label_names;  // one-vs-rest ordering

  double margin(const SparseVec& x, size_t out_idx = 0) const;
  // binary: decision at margin 0
  int decide(const SparseVec& x) const { return margin(x) >= 0.0 ? 1 : 0; }
  std::vector<std::string> decide_labels(const SparseVec& x) const;
  double predict_value(const SparseVec& x) const { return margin(x); }
};

// primal subgradient descent on the hinge loss with L2 regularization
LinearModel svm_train(const std::vector<SparseVec>& features,
                      const std::vector<int>& labels,  // 0/1
                      size_t dim, double lambda, int epochs, uint64_t seed);

LinearModel ovr_train(const std::vector<SparseVec>& features,
                      const std::vector<std::vector<std::string>>& label_sets,
                      const LabelVocabulary& vocab, size_t dim, double lambda,
                      int epochs, uint64_t seed);

// epsilon-insensitive regression
LinearModel svr_train(const std::vector<SparseVec>& features,
                      const std::vector<double>& targets, size_t dim,
                      double lambda, double epsilon, int epochs,
                      uint64_t seed);

// regularized objective value, for the non-increase property
double svm_objective(const LinearModel& m, const std::vector<SparseVec>& X,
                     const std::vector<int>& y);

struct MajorityPredictor {
  int binary_class = 0;
  double importance_score = 4.0;
};

// most frequent class / score; ties break toward the lower value
MajorityPredictor majority_predict(const std::vector<int>& binary_labels);
MajorityPredictor majority_predict_importance(
    const std::vector<double>& importance_labels);

// fair Bernoulli per case, seeded
std::vector<int> coin_toss_predict(size_t n_cases, uint64_t seed);

}  // namespace lexpred
