#pragma once
// Synthetic corpus generator: plants one signature token per active label so
// that the Bayes-optimal rule (predict a label iff its signature is present)
// is exact. The verification substrate for the learning, truncation, and
// anonymization checks.

#include <cstdint>
#include <string>
#include <vector>

#include "lexpred/corpus.hpp"

namespace lexpred {

struct SynthParams {
  int n_cases = 2000;
  int vocab_size = 500;     // filler token count
  int facts_per_case = 5;
  int words_per_fact = 12;
  int n_labels = 10;
  int signal_fact = -1;     // fact index for signatures; -1 = per-case random
  int signal_word = -1;     // word position inside the fact; -1 = random
  bool decoys = false;      // plant a decoy token for every absent label
  double label_p0 = 0.35;   // P(label 0); decays geometrically
  double label_decay = 0.62;
  uint64_t seed = 7;
};

std::string synth_label_id(int l);      // "A00", "A01", ...
std::string synth_signature_token(int l);  // "siga00", ...
std::string synth_decoy_token(int l);      // "decoya00", ...

// deterministic per (params, seed); split 70/15/15 chronologically
Corpus generate_synth_corpus(const SynthParams& p);

// predict label l iff its signature token appears in the case
std::vector<std::string> bayes_rule_labels(const Case& c, int n_labels);

}  // namespace lexpred
