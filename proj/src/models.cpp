#include "lexpred/models.hpp"

#include <algorithm>

namespace lexpred {

Arch arch_from_string(const std::string& s) {
  if (s == "bigru-att") return Arch::BigruAtt;
  if (s == "han") return Arch::Han;
  if (s == "lwan") return Arch::Lwan;
  if (s == "flat-trunc") return Arch::FlatTrunc;
  if (s == "hier-enc") return Arch::HierEnc;
  throw ValidationError("unknown architecture '" + s + "'");
}

std::string arch_to_string(Arch a) {
  switch (a) {
    case Arch::BigruAtt: return "bigru-att";
    case Arch::Han: return "han";
    case Arch::Lwan: return "lwan";
    case Arch::FlatTrunc: return "flat-trunc";
    case Arch::HierEnc: return "hier-enc";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  if (s == "binary") return Task::Binary;
  if (s == "multilabel") return Task::Multilabel;
  if (s == "importance") return Task::Importance;
  throw ValidationError("unknown task '" + s + "'");
}

std::string task_to_string(Task t) {
  switch (t) {
    case Task::Binary: return "binary";
    case Task::Multilabel: return "multilabel";
    case Task::Importance: return "importance";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (arch == Arch::Lwan && task != Task::Multilabel)
    throw ValidationError(
        "model: lwan is only valid with task=multilabel");
  if (task == Task::Multilabel && num_labels < 1)
    throw ValidationError("model: multilabel task needs num_labels >= 1");
  if (vocab_size < 4) throw ValidationError("model: vocab_size not set");
  if (hidden < 1 || embed_dim < 1 || stack < 1)
    throw ValidationError("model: dims must be positive");
  if (arch == Arch::FlatTrunc && max_len + 1 > tf.max_positions)
    throw ValidationError(
        "model: max_len + 1 (classification token) exceeds transformer max "
        "positions");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ValidationError("model: dropout must be in [0,1)");
  if (word_dropout < 0.0 || word_dropout > 1.0)
    throw ValidationError("model: word_dropout must be in [0,1]");
}

namespace nn {

std::vector<int> apply_word_dropout(const std::vector<int>& ids, double p,
                                    Rng& rng) {
  std::vector<int> out = ids;
  if (p <= 0.0) return out;
  for (auto& id : out)
    if (id != TokenVocab::kPad && rng.bernoulli(p)) id = TokenVocab::kUnk;
  return out;
}

}  // namespace nn

Prediction predict(const std::vector<double>& scores, Task task,
                   const LabelVocabulary& labels, bool softmax_head,
                   double tau) {
  Prediction pred;
  switch (task) {
    case Task::Binary:
      if (scores.size() != 1)
        throw ValidationError("predict: binary head expects one score");
      pred.binary_score = scores[0];
      pred.binary = scores[0] >= tau ? 1 : 0;
      break;
    case Task::Multilabel: {
      size_t L = labels.size();
      size_t expect = softmax_head ? L + 1 : L;
      if (scores.size() != expect)
        throw ValidationError("predict: multilabel head score count " +
                              std::to_string(scores.size()) +
                              " does not match label count");
      pred.label_scores.assign(scores.begin(), scores.begin() + long(L));
      for (size_t l = 0; l < L; ++l)
        if (scores[l] >= tau) pred.labels.push_back(labels.articles[l]);
      break;
    }
    case Task::Importance:
      if (scores.size() != 1)
        throw ValidationError("predict: importance head expects one score");
      pred.importance = std::clamp(scores[0], 1.0, 4.0);
      break;
  }
  return pred;
}

}  // namespace lexpred
