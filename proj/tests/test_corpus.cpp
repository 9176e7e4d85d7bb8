// Corpus module tests: ingestion, segmentation, stats, strata, balancing,
// vocabulary. Derived expectations come from independent line-scanning and
// recounting oracles written here.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lexpred/common.hpp"
#include "lexpred/corpus.hpp"
#include "lexpred/text.hpp"

using namespace lexpred;
namespace fs = std::filesystem;

namespace {

LabelVocabulary toy_labels() {
  return LabelVocabulary::from_articles({"3", "6", "P1-1"});
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("lexpred_corpus_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  os << content;
}

Case make_case(const std::string& id, std::vector<std::string> facts,
               std::vector<std::string> arts, int importance, int year) {
  Case c;
  c.case_id = id;
  c.facts = std::move(facts);
  c.violated_articles = std::move(arts);
  c.importance = importance;
  c.year = year;
  return c;
}

}  // namespace

TEST_CASE("echr schema has 66 unique labels") {
  auto v = LabelVocabulary::echr_schema();
  CHECK(v.size() == 66);
  std::set<std::string> uniq(v.articles.begin(), v.articles.end());
  CHECK(uniq.size() == 66);
  CHECK(v.contains("3"));
  CHECK(v.contains("P1-1"));
}

TEST_CASE("ingest: missing facts field names the case") {
  auto dir = temp_dir("missing");
  write_file(dir / "train.jsonl",
             R"({"case_id":"c1","facts":["1. a."],"violated_articles":["3"],"importance":1,"year":2000})"
             "\n"
             R"({"case_id":"c2","violated_articles":[],"importance":2,"year":2001})"
             "\n"
             R"({"case_id":"c3","facts":["1. b."],"violated_articles":[],"importance":3,"year":2002})"
             "\n");
  write_file(dir / "dev.jsonl", "");
  write_file(dir / "test.jsonl", "");
  try {
    ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels());
    FAIL("expected a schema error");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("c2") != std::string::npos);
    CHECK(msg.find("facts") != std::string::npos);
  }
}

TEST_CASE("ingest: importance histogram and validation") {
  auto dir = temp_dir("hist");
  write_file(dir / "train.jsonl",
             R"({"case_id":"a","facts":["1. x."],"violated_articles":["3"],"importance":1,"year":2000})"
             "\n"
             R"({"case_id":"b","facts":["1. y."],"violated_articles":[],"importance":4,"year":2001})"
             "\n");
  write_file(dir / "dev.jsonl", "");
  write_file(dir / "test.jsonl", "");
  auto corpus = ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels());
  CHECK(corpus.split("train")->cases.size() == 2);
  auto stats = compute_stats(corpus);
  CHECK(stats.importance_histogram.at(1) == 1);
  CHECK(stats.importance_histogram.at(4) == 1);

  // importance outside [1,4] rejected
  write_file(dir / "train.jsonl",
             R"({"case_id":"a","facts":["1. x."],"violated_articles":[],"importance":5,"year":2000})"
             "\n");
  CHECK_THROWS_AS(
      ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels()),
      ValidationError);

  // unknown article rejected
  write_file(dir / "train.jsonl",
             R"({"case_id":"a","facts":["1. x."],"violated_articles":["99"],"importance":1,"year":2000})"
             "\n");
  CHECK_THROWS_AS(
      ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels()),
      ValidationError);
}

TEST_CASE("ingest: field aliases cover the released dump schema") {
  auto dir = temp_dir("alias");
  write_file(dir / "train.jsonl",
             R"({"ITEMID":"001-1","TEXT":["1. Fact."],"VIOLATED_ARTICLES":["3"],"IMPORTANCE":"2","DATE":"1999-05-12 00:00:00"})"
             "\n");
  write_file(dir / "dev.jsonl", "");
  write_file(dir / "test.jsonl", "");
  auto corpus = ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels());
  const Case& c = corpus.split("train")->cases[0];
  CHECK(c.case_id == "001-1");
  CHECK(c.facts.size() == 1);
  CHECK(c.importance == 2);
  CHECK(c.year == 1999);
}

TEST_CASE("ingest: chronological split rule enforced") {
  auto dir = temp_dir("chrono");
  write_file(dir / "train.jsonl",
             R"({"case_id":"a","facts":["1. x."],"violated_articles":[],"importance":1,"year":2015})"
             "\n");
  write_file(dir / "dev.jsonl", "");
  write_file(dir / "test.jsonl", "");
  CHECK_THROWS_AS(
      ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels()),
      ValidationError);
}

TEST_CASE("round-trip: ingest(serialize(corpus)) == corpus") {
  Corpus corpus;
  corpus.labels = toy_labels();
  CorpusSplit train{"train",
                    {make_case("a", {"1. First fact.", "2. Second."}, {"3"},
                               1, 1999),
                     make_case("b", {"1. Another."}, {}, 4, 2001)}};
  CorpusSplit dev{"dev", {make_case("c", {"1. Dev."}, {"6"}, 2, 2010)}};
  CorpusSplit test{"test", {make_case("d", {"1. Test."}, {"P1-1"}, 3, 2015)}};
  corpus.splits = {train, dev, test};

  auto dir = temp_dir("roundtrip");
  write_corpus(dir.string(), corpus);
  auto back = ingest_corpus(dir.string(), FieldMap::defaults(), toy_labels());

  REQUIRE(back.splits.size() == 3);
  for (size_t s = 0; s < 3; ++s) {
    REQUIRE(back.splits[s].cases.size() == corpus.splits[s].cases.size());
    for (size_t i = 0; i < back.splits[s].cases.size(); ++i) {
      const Case& x = corpus.splits[s].cases[i];
      const Case& y = back.splits[s].cases[i];
      CHECK(x.case_id == y.case_id);
      CHECK(x.facts == y.facts);
      CHECK(x.violated_articles == y.violated_articles);
      CHECK(x.importance == y.importance);
      CHECK(x.year == y.year);
    }
  }
}

TEST_CASE("segment_facts: numbered paragraphs") {
  auto r = segment_facts("1. The applicant was born.\n2. He was arrested.");
  REQUIRE(r.facts.size() == 2);
  CHECK(r.facts[0] == "1. The applicant was born.");
  CHECK(r.facts[1] == "2. He was arrested.");
  CHECK(!r.warned);

  auto r2 = segment_facts("PREAMBLE\n1. Fact one.");
  REQUIRE(r2.facts.size() == 1);
  CHECK(r2.facts[0] == "1. Fact one.");

  auto r3 = segment_facts("no numbering here at all");
  CHECK(r3.facts.empty());
  CHECK(r3.warned);
}

TEST_CASE("segment_facts: 45-paragraph case against a line-scanning oracle") {
  // independent oracle: scan lines, count starts, and keep the tail
  std::ostringstream doc;
  doc << "PROCEDURE\nThe case originated etc.\n";
  for (int i = 1; i <= 45; ++i) {
    doc << i << ". Paragraph number " << i << " first line.\n";
    if (i % 3 == 0) doc << "   continuation line for " << i << "\n";
  }
  std::string input = doc.str();

  // oracle: locate the first numbered line; everything from there on,
  // re-joined, must equal the concatenation of the produced facts
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char ch : input) {
      if (ch == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else
        cur += ch;
    }
    lines.push_back(cur);
  }
  size_t first = 0;
  int starts = 0;
  bool found = false;
  for (size_t i = 0; i < lines.size(); ++i) {
    size_t d = 0;
    while (d < lines[i].size() && isdigit((unsigned char)lines[i][d])) ++d;
    bool is_start = d > 0 && d + 1 < lines[i].size() && lines[i][d] == '.' &&
                    lines[i][d + 1] == ' ';
    if (is_start) {
      ++starts;
      if (!found) {
        first = i;
        found = true;
      }
    }
  }
  std::string tail;
  for (size_t i = first; i < lines.size(); ++i) {
    if (i > first) tail += "\n";
    tail += lines[i];
  }

  auto r = segment_facts(input);
  CHECK(int(r.facts.size()) == starts);
  CHECK(r.facts.size() == 45);
  std::string joined;
  for (size_t i = 0; i < r.facts.size(); ++i) {
    if (i) joined += "\n";
    joined += r.facts[i];
  }
  CHECK(joined == tail);
}

TEST_CASE("compute_stats: single case and recount oracle") {
  Corpus corpus;
  corpus.labels = toy_labels();
  corpus.splits = {{"train",
                    {make_case("a",
                               {"1. one two three four", "2. five six seven eight nine ten"},
                               {"3"}, 2, 2000)}},
                   {"dev", {}},
                   {"test", {}}};
  auto stats = compute_stats(corpus);
  CHECK(stats.per_split[0].second.case_count == 1);
  CHECK(stats.per_split[0].second.mean_words == 12.0);  // includes "1." "2."
  CHECK(stats.per_split[0].second.mean_facts == 2.0);
  CHECK(stats.per_split[0].second.mean_articles == 1.0);
  CHECK(stats.per_split[1].second.empty_flag);
  CHECK(stats.violation_ratio == 1.0);
}

TEST_CASE("compute_stats: 100-case synthetic corpus matches brute recount") {
  Rng rng(33);
  Corpus corpus;
  corpus.labels = toy_labels();
  CorpusSplit train{"train", {}};
  for (int i = 0; i < 100; ++i) {
    int nf = 1 + int(rng.uniform_int(4));
    std::vector<std::string> facts;
    for (int f = 0; f < nf; ++f) {
      std::string fact = std::to_string(f + 1) + ".";
      int nw = 1 + int(rng.uniform_int(7));
      for (int w = 0; w < nw; ++w)
        fact += " w" + std::to_string(rng.uniform_int(50));
      facts.push_back(fact);
    }
    std::vector<std::string> arts;
    if (rng.bernoulli(0.5)) arts.push_back("3");
    char id[16];
    snprintf(id, sizeof(id), "c%03d", i);
    train.cases.push_back(
        make_case(id, facts, arts, 1 + int(rng.uniform_int(4)), 2000));
  }
  corpus.splits = {train, {"dev", {}}, {"test", {}}};

  // independent recount with istringstream word splitting
  double words = 0, facts = 0, arts = 0;
  for (auto& c : train.cases) {
    for (auto& f : c.facts) {
      std::istringstream ss(f);
      std::string w;
      while (ss >> w) words += 1;
      facts += 1;
    }
    arts += double(c.violated_articles.size());
  }
  auto stats = compute_stats(corpus);
  CHECK(stats.per_split[0].second.mean_words ==
        doctest::Approx(words / 100.0).epsilon(1e-12));
  CHECK(stats.per_split[0].second.mean_facts ==
        doctest::Approx(facts / 100.0).epsilon(1e-12));
  CHECK(stats.per_split[0].second.mean_articles ==
        doctest::Approx(arts / 100.0).epsilon(1e-12));
}

TEST_CASE("stratify_labels: definition, errors, and filter oracle") {
  LabelVocabulary vocab = LabelVocabulary::from_articles({"A", "B", "C"});
  CorpusSplit train{"train", {}};
  for (int i = 0; i < 60; ++i)
    train.cases.push_back(make_case("a" + std::to_string(i), {"1. x"}, {"A"},
                                    1, 2000));
  for (int i = 0; i < 10; ++i)
    train.cases.push_back(make_case("b" + std::to_string(i), {"1. x"}, {"B"},
                                    1, 2000));
  auto s = stratify_labels(train, vocab, 50);
  CHECK(s.frequent == std::vector<std::string>{"A"});
  CHECK(s.few == std::vector<std::string>{"B"});
  CHECK(s.zero == std::vector<std::string>{"C"});

  CHECK_THROWS_AS(stratify_labels(train, vocab, 0), ValidationError);

  // random counts vs a brute-force filter
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> ids;
    for (int l = 0; l < 8; ++l) ids.push_back("L" + std::to_string(l));
    auto v = LabelVocabulary::from_articles(ids);
    CorpusSplit t{"train", {}};
    std::map<std::string, int> truth;
    for (auto& a : ids) truth[a] = 0;
    int n = 30 + int(rng.uniform_int(40));
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> arts;
      for (auto& a : ids)
        if (rng.bernoulli(0.3)) {
          arts.push_back(a);
          truth[a]++;
        }
      t.cases.push_back(
          make_case("c" + std::to_string(i), {"1. x"}, arts, 1, 2000));
    }
    int thr = 2 + int(rng.uniform_int(10));
    auto strata = stratify_labels(t, v, thr);
    std::set<std::string> got_f(strata.frequent.begin(), strata.frequent.end());
    std::set<std::string> got_w(strata.few.begin(), strata.few.end());
    std::set<std::string> got_z(strata.zero.begin(), strata.zero.end());
    size_t total = 0;
    for (auto& [a, cnt] : truth) {
      ++total;
      if (cnt >= thr)
        CHECK(got_f.count(a) == 1);
      else if (cnt >= 1)
        CHECK(got_w.count(a) == 1);
      else
        CHECK(got_z.count(a) == 1);
    }
    CHECK(got_f.size() + got_w.size() + got_z.size() == total);
  }
}

TEST_CASE("balance_binary: min-count rule, identity, determinism") {
  CorpusSplit split{"train", {}};
  for (int i = 0; i < 10; ++i)
    split.cases.push_back(
        make_case("p" + std::to_string(i), {"1. x"}, {"3"}, 1, 2000));
  for (int i = 0; i < 4; ++i)
    split.cases.push_back(
        make_case("n" + std::to_string(i), {"1. x"}, {}, 1, 2000));

  auto bal = balance_binary(split, 99);
  size_t pos = 0, neg = 0;
  std::set<std::string> in_ids;
  for (auto& c : split.cases) in_ids.insert(c.case_id);
  for (auto& c : bal.cases) {
    (c.violated() ? pos : neg)++;
    CHECK(in_ids.count(c.case_id) == 1);  // output subset of input
  }
  CHECK(pos == 4);
  CHECK(neg == 4);

  // already balanced -> unchanged
  CorpusSplit even{"train", {}};
  for (int i = 0; i < 5; ++i) {
    even.cases.push_back(
        make_case("p" + std::to_string(i), {"1. x"}, {"3"}, 1, 2000));
    even.cases.push_back(
        make_case("n" + std::to_string(i), {"1. x"}, {}, 1, 2000));
  }
  auto bal2 = balance_binary(even, 7);
  REQUIRE(bal2.cases.size() == even.cases.size());
  for (size_t i = 0; i < even.cases.size(); ++i)
    CHECK(bal2.cases[i].case_id == even.cases[i].case_id);

  // same seed twice -> identical case_id lists
  auto b1 = balance_binary(split, 1234);
  auto b2 = balance_binary(split, 1234);
  REQUIRE(b1.cases.size() == b2.cases.size());
  for (size_t i = 0; i < b1.cases.size(); ++i)
    CHECK(b1.cases[i].case_id == b2.cases[i].case_id);

  CorpusSplit oneclass{"train",
                       {make_case("p", {"1. x"}, {"3"}, 1, 2000)}};
  CHECK_THROWS_AS(balance_binary(oneclass, 1), ValidationError);
}

TEST_CASE("build_token_vocab: frequency rule, reserved ids, no leakage") {
  CorpusSplit train{"train", {make_case("a", {"a a b"}, {}, 1, 2000)}};
  auto v = build_token_vocab(train, 2);
  CHECK(v.tokens[TokenVocab::kPad] == "<pad>");
  CHECK(v.tokens[TokenVocab::kUnk] == "<unk>");
  CHECK(v.index.count("a") == 1);
  CHECK(v.index.count("b") == 0);
  CHECK(v.id("b") == TokenVocab::kUnk);

  auto v1 = build_token_vocab(train, 1);
  CHECK(v1.index.count("a") == 1);
  CHECK(v1.index.count("b") == 1);

  // dev-only token maps to UNK
  CHECK(v1.id("devonly") == TokenVocab::kUnk);

  CHECK_THROWS_AS(build_token_vocab(train, 0), ValidationError);

  // entity tags are always present, unlowered
  CHECK(v.id("LOCATION") != TokenVocab::kUnk);
}

TEST_CASE("tokenizer: lowercase, punctuation boundaries, tags preserved") {
  auto toks = text::tokenize("The applicant, Mr X., was in LOCATION.");
  CHECK(toks[0] == "the");
  bool has_comma = false, has_tag = false;
  for (auto& t : toks) {
    if (t == ",") has_comma = true;
    if (t == "LOCATION") has_tag = true;
  }
  CHECK(has_comma);
  CHECK(has_tag);
}

TEST_CASE("encode_case: ids, labels, binary flag") {
  CorpusSplit train{"train", {make_case("a", {"1. alpha beta"}, {}, 1, 2000)}};
  auto v = build_token_vocab(train, 1);
  auto labels = toy_labels();
  Case c = make_case("x", {"1. alpha gamma"}, {"6"}, 2, 2001);
  auto e = encode_case(c, v, labels);
  REQUIRE(e.fact_ids.size() == 1);
  CHECK(e.fact_ids[0].size() == 4);  // "1", ".", "alpha", "gamma"
  CHECK(e.fact_ids[0][2] == v.id("alpha"));
  CHECK(e.fact_ids[0][3] == TokenVocab::kUnk);
  CHECK(e.binary_label == 1);
  CHECK(e.labels[size_t(labels.id("6"))] == 1);
  CHECK(e.importance == 2.0);
}
