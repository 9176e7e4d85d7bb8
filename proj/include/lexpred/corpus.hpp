#pragma once
// Case corpora: ingestion, fact segmentation, splits, balancing, label
// strata, token vocabulary, and summary statistics.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexpred/common.hpp"

namespace lexpred {

struct Case {
  std::string case_id;
  std::vector<std::string> facts;              // ordered fact paragraphs
  std::vector<std::string> violated_articles;  // sorted, unique
  int importance = 4;                          // 1 (key case) .. 4
  int year = 0;
  std::string raw_text;  // optional source text

  bool violated() const { return !violated_articles.empty(); }
};

struct LabelVocabulary {
  std::vector<std::string> articles;
  std::unordered_map<std::string, int> index;

  static LabelVocabulary from_articles(std::vector<std::string> ids);
  static LabelVocabulary from_file(const std::string& path);
  // Convention + protocol article identifiers, 66 labels.
  static LabelVocabulary echr_schema();

  size_t size() const { return articles.size(); }
  bool contains(const std::string& a) const { return index.count(a) > 0; }
  int id(const std::string& a) const;
};

struct CorpusSplit {
  std::string name;  // train | dev | test
  std::vector<Case> cases;
};

struct Corpus {
  LabelVocabulary labels;
  std::vector<CorpusSplit> splits;

  const CorpusSplit* split(const std::string& name) const;
  CorpusSplit* split(const std::string& name);
};

// Alias table mapping source field names onto the canonical schema.
struct FieldMap {
  std::map<std::string, std::string> aliases;

  static FieldMap defaults();  // covers the released ECHR dump field names
  std::string resolve(const std::string& key) const;
};

struct SegmentResult {
  std::vector<std::string> facts;
  bool warned = false;  // set when no numbered paragraph was found
};

// One fact per numbered paragraph ("N. ..." at line start); text before the
// first numbered paragraph is discarded. Joining the facts with newlines
// reproduces the input minus the preamble.
SegmentResult segment_facts(const std::string& raw_case_text);

struct SplitStats {
  size_t case_count = 0;
  double mean_words = 0.0;
  double mean_facts = 0.0;
  double mean_articles = 0.0;
  bool empty_flag = false;
};

struct StatsReport {
  std::vector<std::pair<std::string, SplitStats>> per_split;
  std::map<int, size_t> importance_histogram;
  double violation_ratio = 0.0;  // over all splits
};

StatsReport compute_stats(const Corpus& corpus);
std::string format_stats_table(const StatsReport& r);

struct FrequencyStrata {
  std::vector<std::string> frequent;  // train count >= threshold
  std::vector<std::string> few;       // train count in [1, threshold)
  std::vector<std::string> zero;      // train count == 0
  int threshold = 50;
};

FrequencyStrata stratify_labels(const CorpusSplit& train,
                                const LabelVocabulary& vocab,
                                int threshold = 50);

// Seeded subsample of the majority binary class down to the minority count.
CorpusSplit balance_binary(const CorpusSplit& split, uint64_t seed);

struct TokenVocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSep = 2;
  static constexpr int kCls = 3;

  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  int id(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnk : it->second;
  }
  size_t size() const { return tokens.size(); }

  void save(const std::string& path) const;
  static TokenVocab load(const std::string& path);
};

// Train-split tokens with frequency >= min_freq, plus reserved specials and
// the entity type tags. No dev/test leakage by construction.
TokenVocab build_token_vocab(const CorpusSplit& train, int min_freq);

// Ingestion. `path` may be a directory holding train/dev/test as .json
// (array), .jsonl, or a subdirectory of one-JSON-file-per-case documents.
Corpus ingest_corpus(const std::string& path, const FieldMap& field_map,
                     const LabelVocabulary& labels);

// Parse one split already loaded as JSON text (one case per element).
std::vector<Case> parse_cases_json(const std::string& json_text,
                                   const FieldMap& field_map,
                                   const LabelVocabulary& labels);

void validate_case(const Case& c, const LabelVocabulary& labels);

// Canonical JSON-lines serialization (round-trips through ingest).
void write_split_jsonl(const std::string& path,
                       const std::vector<Case>& cases);
void write_corpus(const std::string& dir, const Corpus& corpus);

// token ids per fact plus task targets
struct EncodedCase {
  std::string case_id;
  std::vector<std::vector<int>> fact_ids;
  int binary_label = 0;
  std::vector<uint8_t> labels;  // multi-hot over the label vocabulary
  double importance = 4.0;
};

EncodedCase encode_case(const Case& c, const TokenVocab& vocab,
                        const LabelVocabulary& labels);

}  // namespace lexpred
