#pragma once
// Word- and fact-level attention capture, JSON/HTML export, and the
// entity-attention-share probe.

#include <optional>
#include <string>
#include <vector>

#include "lexpred/anonymizer.hpp"
#include "lexpred/corpus.hpp"

namespace lexpred {

struct AttentionTrace {
  std::string case_id;
  std::string model_tag;
  // one weight vector per fact; flat architectures use a single vector over
  // the concatenated token sequence
  std::vector<std::vector<double>> word_weights;
  std::vector<std::vector<std::string>> tokens;  // aligned with word_weights
  std::optional<std::vector<double>> fact_weights;  // hierarchical models only

  std::string to_json_string() const;
  static AttentionTrace from_json_string(const std::string& s);
};

// Self-contained static HTML: words shaded by min-max-normalized weight,
// one vertical heat bar per fact. Raw weights are kept in data attributes.
void export_heatmap(const AttentionTrace& trace, const std::string& path);
std::string render_heatmap(const AttentionTrace& trace);

// Weights recovered from data-w attributes of a rendered heatmap, in
// document order (parse-back check).
std::vector<double> parse_heatmap_weights(const std::string& html);

struct EntityShare {
  double share = 0.0;    // attention mass on entity tokens, in [0, 1]
  size_t skipped = 0;    // spans that aligned with no token
};

// Fraction of word-attention mass on entity tokens, averaged over facts
// weighted by fact attention. Fact texts come from the case the trace was
// captured on; flat traces are aligned against the concatenated facts.
EntityShare entity_attention_share(const AttentionTrace& trace,
                                   const Case& source_case,
                                   const Gazetteer& gazetteer);

// Direct form: per-fact entity flags aligned to the trace tokens.
double entity_attention_share(const AttentionTrace& trace,
                              const std::vector<std::vector<uint8_t>>& flags);

}  // namespace lexpred
