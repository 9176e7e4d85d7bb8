#include "lexpred/synth.hpp"

#include <algorithm>
#include <cstdio>

namespace lexpred {

std::string synth_label_id(int l) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "A%02d", l);
  return buf;
}

std::string synth_signature_token(int l) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "siga%02d", l);
  return buf;
}

std::string synth_decoy_token(int l) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "decoya%02d", l);
  return buf;
}

namespace {

std::string filler_token(int64_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "tok%04d", int(i));
  return buf;
}

}  // namespace

Corpus generate_synth_corpus(const SynthParams& p) {
  if (p.n_cases < 3 || p.vocab_size < 1 || p.facts_per_case < 1 ||
      p.words_per_fact < 1 || p.n_labels < 1)
    throw ValidationError("synth: parameters must be positive");
  if (p.signal_fact >= p.facts_per_case)
    throw ValidationError("synth: signal_fact " +
                          std::to_string(p.signal_fact) +
                          " >= facts_per_case " +
                          std::to_string(p.facts_per_case));
  if (p.signal_word >= p.words_per_fact)
    throw ValidationError("synth: signal_word out of range");

  std::vector<std::string> label_ids;
  for (int l = 0; l < p.n_labels; ++l) label_ids.push_back(synth_label_id(l));

  Rng rng(p.seed);
  std::vector<Case> cases;
  for (int i = 0; i < p.n_cases; ++i) {
    Case c;
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%06d", i);
    c.case_id = idbuf;

    std::vector<int> active;
    double prob = p.label_p0;
    for (int l = 0; l < p.n_labels; ++l) {
      if (rng.bernoulli(prob)) active.push_back(l);
      prob *= p.label_decay;
    }

    // filler words per fact
    std::vector<std::vector<std::string>> words(size_t(p.facts_per_case));
    for (auto& fact : words) {
      fact.resize(size_t(p.words_per_fact));
      for (auto& w : fact)
        w = filler_token(rng.uniform_int(p.vocab_size));
    }

    // plant one signature per active label (and decoys for absent labels
    // when requested) so presence is exact
    auto plant = [&](int l, bool is_sig) {
      int f = p.signal_fact >= 0 ? p.signal_fact
                                 : int(rng.uniform_int(p.facts_per_case));
      int wpos = p.signal_word >= 0 ? p.signal_word
                                    : int(rng.uniform_int(p.words_per_fact));
      words[size_t(f)][size_t(wpos)] =
          is_sig ? synth_signature_token(l) : synth_decoy_token(l);
    };
    if (p.decoys) {
      // fixed slots: label l owns word slot l of the signal fact so that a
      // case's masked view is independent of which labels are active
      for (int l = 0; l < p.n_labels; ++l) {
        int f = p.signal_fact >= 0 ? p.signal_fact : 0;
        int wpos = (p.signal_word >= 0 ? p.signal_word : 0) + l;
        if (wpos >= p.words_per_fact)
          throw ValidationError(
              "synth: decoys need words_per_fact >= signal_word + n_labels");
        bool is_active =
            std::find(active.begin(), active.end(), l) != active.end();
        words[size_t(f)][size_t(wpos)] =
            is_active ? synth_signature_token(l) : synth_decoy_token(l);
      }
    } else {
      for (int l : active) plant(l, true);
    }

    for (int f = 0; f < p.facts_per_case; ++f) {
      std::string fact = std::to_string(f + 1) + ".";
      for (auto& w : words[size_t(f)]) {
        fact += ' ';
        fact += w;
      }
      c.facts.push_back(std::move(fact));
    }

    for (int l : active) c.violated_articles.push_back(synth_label_id(l));
    c.importance = std::max(1, 4 - int(active.size()));
    cases.push_back(std::move(c));
  }

  // 70/15/15 split; years satisfy the chronological rule
  size_t n_train = size_t(double(p.n_cases) * 0.70);
  size_t n_dev = size_t(double(p.n_cases) * 0.15);
  Corpus corpus;
  corpus.labels = LabelVocabulary::from_articles(label_ids);
  CorpusSplit train{"train", {}}, dev{"dev", {}}, test{"test", {}};
  for (size_t i = 0; i < cases.size(); ++i) {
    Case& c = cases[i];
    if (i < n_train) {
      c.year = 1960 + int(i % 54);
      train.cases.push_back(std::move(c));
    } else if (i < n_train + n_dev) {
      c.year = 1960 + int(i % 54);
      dev.cases.push_back(std::move(c));
    } else {
      c.year = 2014 + int(i % 5);
      test.cases.push_back(std::move(c));
    }
  }
  corpus.splits = {std::move(train), std::move(dev), std::move(test)};
  return corpus;
}

std::vector<std::string> bayes_rule_labels(const Case& c, int n_labels) {
  std::string joined;
  for (auto& f : c.facts) {
    joined += f;
    joined += ' ';
  }
  std::vector<std::string> out;
  for (int l = 0; l < n_labels; ++l) {
    std::string sig = synth_signature_token(l);
    size_t pos = joined.find(sig);
    while (pos != std::string::npos) {
      bool left_ok = pos == 0 || joined[pos - 1] == ' ';
      size_t end = pos + sig.size();
      bool right_ok = end == joined.size() || joined[end] == ' ' ||
                      joined[end] == '.';
      if (left_ok && right_ok) {
        out.push_back(synth_label_id(l));
        break;
      }
      pos = joined.find(sig, pos + 1);
    }
  }
  return out;
}

}  // namespace lexpred
