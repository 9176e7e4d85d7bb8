// Entity recognition and masking tests, including the split-and-join oracle
// for untouched text and the idempotence property.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "lexpred/anonymizer.hpp"
#include "lexpred/common.hpp"

using namespace lexpred;

namespace {

Gazetteer toy_gazetteer() {
  Gazetteer g;
  g.add("Kharkiv", EntityType::Location);
  g.add("New York", EntityType::Location);
  g.add("York", EntityType::Location);
  g.add("Ivanov", EntityType::Person);
  return g;
}

}  // namespace

TEST_CASE("recognize_entities: gazetteer hits") {
  Gazetteer g = toy_gazetteer();
  auto spans = recognize_entities("beaten in Kharkiv", g);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].start == 10);
  CHECK(spans[0].end == 17);
  CHECK(spans[0].type == EntityType::Location);

  CHECK(recognize_entities("no hits and no digits here", Gazetteer()).empty());

  // longest match wins over the nested entry
  auto ny = recognize_entities("moved to New York today", g);
  REQUIRE(ny.size() == 1);
  CHECK(ny[0].end - ny[0].start == std::string("New York").size());
}

TEST_CASE("recognize_entities: built-in date and number patterns") {
  Gazetteer g;
  auto spans = recognize_entities("arrested on 5 May 1999 with 3 others", g);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].type == EntityType::Date);
  CHECK(spans[0].end - spans[0].start == std::string("5 May 1999").size());
  CHECK(spans[1].type == EntityType::Number);

  auto iso = recognize_entities("filed 1999-05-12 in person", g);
  REQUIRE(iso.size() == 1);
  CHECK(iso[0].type == EntityType::Date);

  // digits inside words are not numbers
  CHECK(recognize_entities("case no abc123def", g).empty());
}

TEST_CASE("mask_entities: replacement and errors") {
  Gazetteer g = toy_gazetteer();
  std::string text = "in Kharkiv";
  auto masked = mask_entities(text, recognize_entities(text, g));
  CHECK(masked == "in LOCATION");

  CHECK(mask_entities("unchanged", {}) == "unchanged");

  std::vector<EntitySpan> overlapping = {{0, 5, EntityType::Person},
                                         {3, 8, EntityType::Location}};
  CHECK_THROWS_AS(mask_entities("abcdefghij", overlapping), ValidationError);

  std::vector<EntitySpan> out_of_range = {{0, 100, EntityType::Person}};
  CHECK_THROWS_AS(mask_entities("short", out_of_range), ValidationError);
}

TEST_CASE("mask_entities: non-span text byte-identical (split-join oracle)") {
  Gazetteer g = toy_gazetteer();
  std::string text = "Mr Ivanov went from Kharkiv to New York in winter";
  auto spans = recognize_entities(text, g);
  REQUIRE(spans.size() == 3);
  auto masked = mask_entities(text, spans);

  // oracle: rebuild by splicing tags between the untouched segments
  std::string expected;
  size_t cur = 0;
  for (auto& sp : spans) {
    expected += text.substr(cur, sp.start - cur);
    expected += entity_type_tag(sp.type);
    cur = sp.end;
  }
  expected += text.substr(cur);
  CHECK(masked == expected);
  CHECK(masked == "Mr PERSON went from LOCATION to LOCATION in winter");
}

TEST_CASE("anonymize_corpus: idempotence and label invariance") {
  Gazetteer g = toy_gazetteer();
  Corpus corpus;
  corpus.labels = LabelVocabulary::from_articles({"3"});
  Case c;
  c.case_id = "k1";
  c.facts = {"1. Beaten in Kharkiv on 5 May 1999.",
             "2. Mr Ivanov complained 3 times."};
  c.violated_articles = {"3"};
  c.importance = 1;
  c.year = 2000;
  corpus.splits = {{"train", {c}}, {"dev", {}}, {"test", {}}};

  auto once = anonymize_corpus(corpus, g);
  const Case& m = once.split("train")->cases[0];
  // hand-built expectation (paragraph numbers are digit runs too)
  CHECK(m.facts[0] == "NUMBER. Beaten in LOCATION on DATE.");
  CHECK(m.facts[1] == "NUMBER. Mr PERSON complained NUMBER times.");
  CHECK(m.violated_articles == c.violated_articles);
  CHECK(m.importance == c.importance);

  auto twice = anonymize_corpus(once, g);
  CHECK(twice.split("train")->cases[0].facts == m.facts);

  // no gazetteer surface survives in the masked output
  for (auto& f : m.facts) {
    for (auto& [surface, type] : g.entries())
      CHECK(f.find(surface) == std::string::npos);
  }
}

TEST_CASE("gazetteer: conflicting types and tag collisions rejected") {
  Gazetteer g;
  g.add("Paris", EntityType::Location);
  CHECK_THROWS_AS(g.add("Paris", EntityType::Person), ValidationError);
  CHECK_THROWS_AS(g.add("LOCATION", EntityType::Location), ValidationError);
  g.add("Paris", EntityType::Location);  // same type duplicate is fine
}

TEST_CASE("gazetteer file loader") {
  auto g = Gazetteer::load(std::string(LEXPRED_TEST_DATA) + "/gazetteer.tsv");
  auto spans = recognize_entities("the District Police Station of Kharkiv", g);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].type == EntityType::Org);
  CHECK(spans[1].type == EntityType::Location);
}

TEST_CASE("word boundaries: no match inside larger words") {
  Gazetteer g = toy_gazetteer();
  auto spans = recognize_entities("Yorkshire is a county", g);
  CHECK(spans.empty());
}
