#include "lexpred/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lexpred/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lexpred {

// ---------------------------------------------------------------------------
// label vocabulary

LabelVocabulary LabelVocabulary::from_articles(std::vector<std::string> ids) {
  LabelVocabulary v;
  v.articles = std::move(ids);
  for (size_t i = 0; i < v.articles.size(); ++i) {
    if (!v.index.emplace(v.articles[i], int(i)).second)
      throw ValidationError("label vocabulary: duplicate article '" +
                            v.articles[i] + "'");
  }
  return v;
}

LabelVocabulary LabelVocabulary::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("labels: cannot open " + path);
  json j;
  is >> j;
  std::vector<std::string> ids;
  for (auto& e : j) ids.push_back(e.get<std::string>());
  return from_articles(std::move(ids));
}

LabelVocabulary LabelVocabulary::echr_schema() {
  // Convention articles 1..50 plus the protocol articles, 66 identifiers.
  std::vector<std::string> ids;
  for (int a = 1; a <= 50; ++a) ids.push_back(std::to_string(a));
  for (const char* p : {"P1-1", "P1-2", "P1-3", "P4-1", "P4-2", "P4-3",
                        "P4-4", "P6-1", "P6-2", "P6-3", "P7-1", "P7-2",
                        "P7-3", "P7-4", "P7-5", "P12-1"})
    ids.push_back(p);
  return from_articles(std::move(ids));
}

int LabelVocabulary::id(const std::string& a) const {
  auto it = index.find(a);
  if (it == index.end())
    throw ValidationError("label vocabulary: unknown article '" + a + "'");
  return it->second;
}

const CorpusSplit* Corpus::split(const std::string& name) const {
  for (auto& s : splits)
    if (s.name == name) return &s;
  return nullptr;
}

CorpusSplit* Corpus::split(const std::string& name) {
  for (auto& s : splits)
    if (s.name == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// field map

FieldMap FieldMap::defaults() {
  FieldMap m;
  m.aliases = {
      {"ITEMID", "case_id"},          {"itemid", "case_id"},
      {"TEXT", "facts"},              {"text", "facts"},
      {"VIOLATED_ARTICLES", "violated_articles"},
      {"violated_articles", "violated_articles"},
      {"IMPORTANCE", "importance"},   {"importance", "importance"},
      {"DATE", "year"},               {"date", "year"},
      {"case_id", "case_id"},         {"facts", "facts"},
      {"year", "year"},               {"raw_text", "raw_text"},
  };
  return m;
}

std::string FieldMap::resolve(const std::string& key) const {
  auto it = aliases.find(key);
  return it == aliases.end() ? key : it->second;
}

// ---------------------------------------------------------------------------
// fact segmentation

namespace {

// matches ^\s*\d+\.\s  (line-anchored numbered paragraph)
bool numbered_paragraph_start(const std::string& line) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  size_t d = i;
  while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d])))
    ++d;
  if (d == i) return false;
  if (d >= line.size() || line[d] != '.') return false;
  ++d;
  return d < line.size() &&
         (line[d] == ' ' || line[d] == '\t');
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      lines.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  // a trailing newline produces an empty last line; keep it so that the
  // join-with-newline round trip stays exact
  return lines;
}

}  // namespace

SegmentResult segment_facts(const std::string& raw_case_text) {
  SegmentResult res;
  auto lines = split_lines(raw_case_text);
  std::optional<size_t> first;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (numbered_paragraph_start(lines[i])) {
      first = i;
      break;
    }
  }
  if (!first) {
    res.warned = true;
    return res;
  }
  std::string current;
  bool have = false;
  for (size_t i = *first; i < lines.size(); ++i) {
    if (numbered_paragraph_start(lines[i])) {
      if (have) res.facts.push_back(current);
      current = lines[i];
      have = true;
    } else {
      current += "\n" + lines[i];
    }
  }
  if (have) res.facts.push_back(current);
  return res;
}

// ---------------------------------------------------------------------------
// statistics

StatsReport compute_stats(const Corpus& corpus) {
  StatsReport rep;
  size_t total = 0, violated = 0;
  for (auto& split : corpus.splits) {
    SplitStats s;
    s.case_count = split.cases.size();
    if (split.cases.empty()) {
      s.empty_flag = true;
    } else {
      double words = 0, facts = 0, arts = 0;
      for (auto& c : split.cases) {
        std::string joined;
        for (size_t i = 0; i < c.facts.size(); ++i) {
          if (i) joined += ' ';
          joined += c.facts[i];
        }
        words += double(text::whitespace_tokens(joined).size());
        facts += double(c.facts.size());
        arts += double(c.violated_articles.size());
      }
      double n = double(split.cases.size());
      s.mean_words = words / n;
      s.mean_facts = facts / n;
      s.mean_articles = arts / n;
    }
    for (auto& c : split.cases) {
      rep.importance_histogram[c.importance]++;
      ++total;
      if (c.violated()) ++violated;
    }
    rep.per_split.emplace_back(split.name, s);
  }
  rep.violation_ratio = total ? double(violated) / double(total) : 0.0;
  return rep;
}

std::string format_stats_table(const StatsReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %10s %10s %10s %12s\n", "Subset",
                "Cases", "Words/C", "Facts/C", "Articles/C");
  os << buf;
  for (auto& [name, s] : r.per_split) {
    std::snprintf(buf, sizeof(buf), "%-8s %10zu %10.0f %10.0f %12.2f%s\n",
                  name.c_str(), s.case_count, s.mean_words, s.mean_facts,
                  s.mean_articles, s.empty_flag ? "  (empty)" : "");
    os << buf;
  }
  os << "importance histogram:";
  for (auto& [score, n] : r.importance_histogram)
    os << " " << score << ":" << n;
  os << "\n";
  std::snprintf(buf, sizeof(buf), "violation ratio: %.3f\n",
                r.violation_ratio);
  os << buf;
  return os.str();
}

// ---------------------------------------------------------------------------
// strata

FrequencyStrata stratify_labels(const CorpusSplit& train,
                                const LabelVocabulary& vocab, int threshold) {
  if (threshold < 1)
    throw ValidationError("stratify_labels: threshold must be >= 1");
  std::map<std::string, size_t> counts;
  for (auto& a : vocab.articles) counts[a] = 0;
  for (auto& c : train.cases)
    for (auto& a : c.violated_articles) {
      auto it = counts.find(a);
      if (it == counts.end())
        throw ValidationError("stratify_labels: article '" + a +
                              "' not in vocabulary");
      it->second++;
    }
  FrequencyStrata s;
  s.threshold = threshold;
  for (auto& a : vocab.articles) {
    size_t n = counts[a];
    if (n >= size_t(threshold))
      s.frequent.push_back(a);
    else if (n >= 1)
      s.few.push_back(a);
    else
      s.zero.push_back(a);
  }
  return s;
}

// ---------------------------------------------------------------------------
// balancing

CorpusSplit balance_binary(const CorpusSplit& split, uint64_t seed) {
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < split.cases.size(); ++i)
    (split.cases[i].violated() ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw ValidationError("balance_binary: split '" + split.name +
                          "' is missing one binary class");
  auto& majority = pos.size() > neg.size() ? pos : neg;
  size_t keep = std::min(pos.size(), neg.size());
  Rng rng(seed);
  rng.shuffle(majority);
  majority.resize(keep);
  std::vector<size_t> chosen;
  chosen.insert(chosen.end(), pos.begin(), pos.end());
  chosen.insert(chosen.end(), neg.begin(), neg.end());
  std::sort(chosen.begin(), chosen.end());  // preserve original order
  CorpusSplit out;
  out.name = split.name;
  for (size_t i : chosen) out.cases.push_back(split.cases[i]);
  return out;
}

// ---------------------------------------------------------------------------
// token vocabulary

TokenVocab build_token_vocab(const CorpusSplit& train, int min_freq) {
  if (min_freq < 1)
    throw ValidationError("build_token_vocab: min_freq must be >= 1");
  std::unordered_map<std::string, size_t> freq;
  for (auto& c : train.cases)
    for (auto& f : c.facts)
      for (auto& tok : text::tokenize(f)) freq[tok]++;

  TokenVocab v;
  v.tokens = {"<pad>", "<unk>", "<sep>", "<cls>"};
  for (auto& tag : text::entity_tags()) v.tokens.push_back(tag);

  std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (auto& [tok, n] : ranked) {
    if (n < size_t(min_freq)) break;
    if (text::is_entity_tag(tok)) continue;  // already reserved
    v.tokens.push_back(tok);
  }
  for (size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = int(i);
  return v;
}

void TokenVocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw RuntimeFailure("vocab: cannot open " + path);
  json j = tokens;
  os << j.dump() << "\n";
}

TokenVocab TokenVocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("vocab: cannot open " + path);
  json j;
  is >> j;
  TokenVocab v;
  for (auto& t : j) v.tokens.push_back(t.get<std::string>());
  for (size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = int(i);
  return v;
}

// ---------------------------------------------------------------------------
// ingestion

void validate_case(const Case& c, const LabelVocabulary& labels) {
  if (c.case_id.empty()) throw ValidationError("case with empty case_id");
  if (c.facts.empty())
    throw ValidationError("case '" + c.case_id + "': facts must be non-empty");
  if (c.importance < 1 || c.importance > 4)
    throw ValidationError("case '" + c.case_id + "': importance " +
                          std::to_string(c.importance) +
                          " outside [1,4]");
  for (auto& a : c.violated_articles)
    if (!labels.contains(a))
      throw ValidationError("case '" + c.case_id + "': unknown article '" + a +
                            "'");
}

namespace {

int parse_year_field(const json& v, const std::string& case_id) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    // accept a bare year or any date string with a 4-digit year group
    for (size_t i = 0; i + 4 <= s.size(); ++i) {
      bool four = true;
      for (size_t k = 0; k < 4; ++k)
        four = four && std::isdigit(static_cast<unsigned char>(s[i + k]));
      if (four && (i + 4 == s.size() ||
                   !std::isdigit(static_cast<unsigned char>(s[i + 4])))) {
        return std::stoi(s.substr(i, 4));
      }
    }
  }
  throw ValidationError("case '" + case_id + "': cannot parse year");
}

int parse_importance_field(const json& v, const std::string& case_id) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    try {
      return std::stoi(v.get<std::string>());
    } catch (...) {
    }
  }
  throw ValidationError("case '" + case_id + "': cannot parse importance");
}

Case case_from_json(const json& doc, const FieldMap& field_map,
                    const LabelVocabulary& labels) {
  json canon = json::object();
  for (auto& [key, val] : doc.items()) canon[field_map.resolve(key)] = val;

  Case c;
  if (!canon.contains("case_id"))
    throw ValidationError("case document missing required field 'case_id'");
  c.case_id = canon["case_id"].is_string()
                  ? canon["case_id"].get<std::string>()
                  : canon["case_id"].dump();

  for (const char* field : {"facts", "importance", "year"})
    if (!canon.contains(field))
      throw ValidationError("case '" + c.case_id +
                            "': missing required field '" + field + "'");

  const json& facts = canon["facts"];
  if (facts.is_string()) {
    c.raw_text = facts.get<std::string>();
    c.facts = segment_facts(c.raw_text).facts;
  } else if (facts.is_array()) {
    for (auto& f : facts) c.facts.push_back(f.get<std::string>());
  } else {
    throw ValidationError("case '" + c.case_id + "': field 'facts' must be an "
                          "array of strings or a raw text string");
  }

  std::set<std::string> arts;
  if (canon.contains("violated_articles"))
    for (auto& a : canon["violated_articles"])
      arts.insert(a.is_string() ? a.get<std::string>() : a.dump());
  c.violated_articles.assign(arts.begin(), arts.end());

  c.importance = parse_importance_field(canon["importance"], c.case_id);
  c.year = parse_year_field(canon["year"], c.case_id);
  if (canon.contains("raw_text") && canon["raw_text"].is_string())
    c.raw_text = canon["raw_text"].get<std::string>();

  validate_case(c, labels);
  return c;
}

std::vector<Case> load_split_file(const fs::path& p, const FieldMap& fm,
                                  const LabelVocabulary& labels) {
  std::vector<Case> cases;
  std::ifstream is(p);
  if (!is) throw RuntimeFailure("ingest: cannot open " + p.string());
  if (p.extension() == ".jsonl") {
    std::string line;
    while (std::getline(is, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      cases.push_back(case_from_json(json::parse(line), fm, labels));
    }
  } else {
    json j;
    is >> j;
    if (!j.is_array())
      throw ValidationError("ingest: " + p.string() +
                            " must hold a JSON array of cases");
    for (auto& doc : j) cases.push_back(case_from_json(doc, fm, labels));
  }
  return cases;
}

std::vector<Case> load_split_dir(const fs::path& dir, const FieldMap& fm,
                                 const LabelVocabulary& labels) {
  std::vector<fs::path> files;
  for (auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Case> cases;
  for (auto& f : files) {
    std::ifstream is(f);
    json j;
    is >> j;
    cases.push_back(case_from_json(j, fm, labels));
  }
  return cases;
}

void check_chronology(const CorpusSplit& s) {
  for (auto& c : s.cases) {
    bool ok = (s.name == "test") ? c.year >= 2014 : c.year <= 2013;
    if (!ok)
      throw ValidationError("split '" + s.name + "': case '" + c.case_id +
                            "' year " + std::to_string(c.year) +
                            " violates the chronological split rule");
  }
}

}  // namespace

std::vector<Case> parse_cases_json(const std::string& json_text,
                                   const FieldMap& field_map,
                                   const LabelVocabulary& labels) {
  json j = json::parse(json_text);
  std::vector<Case> cases;
  if (j.is_array())
    for (auto& doc : j) cases.push_back(case_from_json(doc, field_map, labels));
  else
    cases.push_back(case_from_json(j, field_map, labels));
  return cases;
}

Corpus ingest_corpus(const std::string& path, const FieldMap& field_map,
                     const LabelVocabulary& labels) {
  fs::path root(path);
  if (!fs::exists(root))
    throw RuntimeFailure("ingest: path does not exist: " + path);
  Corpus corpus;
  corpus.labels = labels;
  for (const char* name : {"train", "dev", "test"}) {
    CorpusSplit split;
    split.name = name;
    fs::path arr = root / (std::string(name) + ".json");
    fs::path jl = root / (std::string(name) + ".jsonl");
    fs::path dir = root / name;
    if (fs::exists(jl))
      split.cases = load_split_file(jl, field_map, labels);
    else if (fs::exists(arr))
      split.cases = load_split_file(arr, field_map, labels);
    else if (fs::is_directory(dir))
      split.cases = load_split_dir(dir, field_map, labels);
    else
      throw ValidationError("ingest: no '" + std::string(name) +
                            "' split found under " + path);
    std::sort(split.cases.begin(), split.cases.end(),
              [](const Case& a, const Case& b) { return a.case_id < b.case_id; });
    for (size_t i = 1; i < split.cases.size(); ++i)
      if (split.cases[i].case_id == split.cases[i - 1].case_id)
        throw ValidationError("ingest: duplicate case_id '" +
                              split.cases[i].case_id + "' in split " +
                              split.name);
    check_chronology(split);
    corpus.splits.push_back(std::move(split));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// serialization

namespace {
json case_to_json(const Case& c) {
  json j;
  j["case_id"] = c.case_id;
  j["facts"] = c.facts;
  j["violated_articles"] = c.violated_articles;
  j["importance"] = c.importance;
  j["year"] = c.year;
  if (!c.raw_text.empty()) j["raw_text"] = c.raw_text;
  return j;
}
}  // namespace

void write_split_jsonl(const std::string& path,
                       const std::vector<Case>& cases) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw RuntimeFailure("write: cannot open " + path);
  for (auto& c : cases) os << case_to_json(c).dump() << "\n";
}

void write_corpus(const std::string& dir, const Corpus& corpus) {
  fs::create_directories(dir);
  for (auto& s : corpus.splits)
    write_split_jsonl((fs::path(dir) / (s.name + ".jsonl")).string(), s.cases);
  std::ofstream os(fs::path(dir) / "labels.json", std::ios::trunc);
  os << json(corpus.labels.articles).dump() << "\n";
}

// ---------------------------------------------------------------------------
// encoding

EncodedCase encode_case(const Case& c, const TokenVocab& vocab,
                        const LabelVocabulary& labels) {
  EncodedCase e;
  e.case_id = c.case_id;
  for (auto& f : c.facts) {
    std::vector<int> ids;
    for (auto& tok : text::tokenize(f)) ids.push_back(vocab.id(tok));
    if (ids.empty()) ids.push_back(TokenVocab::kUnk);
    e.fact_ids.push_back(std::move(ids));
  }
  e.binary_label = c.violated() ? 1 : 0;
  e.labels.assign(labels.size(), 0);
  for (auto& a : c.violated_articles) e.labels[size_t(labels.id(a))] = 1;
  e.importance = double(c.importance);
  return e;
}

}  // namespace lexpred
