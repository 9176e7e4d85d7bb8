#pragma once
// Rule/gazetteer entity recognition and type-tag masking, used to produce
// the anonymized corpus variant for the bias probe.

#include <cstddef>
#include <string>
#include <vector>

#include "lexpred/common.hpp"
#include "lexpred/corpus.hpp"

namespace lexpred {

enum class EntityType { Person, Location, Org, Date, Number };

const std::string& entity_type_tag(EntityType t);
EntityType entity_type_from_tag(const std::string& tag);

struct EntitySpan {
  size_t start = 0;  // byte offsets, [start, end)
  size_t end = 0;
  EntityType type = EntityType::Person;
};

class Gazetteer {
 public:
  Gazetteer() = default;

  // surface -> type; rejects conflicting duplicate surfaces and surfaces
  // equal to a type tag (masking must be a fixed point)
  void add(const std::string& surface, EntityType type);

  // one `surface<TAB>TYPE` entry per line, UTF-8
  static Gazetteer load(const std::string& path);

  bool empty() const { return entries_.empty(); }

  // entries sorted by surface length (longest first), then lexicographic
  const std::vector<std::pair<std::string, EntityType>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, EntityType>> entries_;
  bool sorted_ = true;
  void sort_entries();
};

// Longest-match-first, left-to-right. Built-in patterns recognize dates
// ("5 May 1999", ISO dates) and digit runs; gazetteer entries win over the
// built-ins at the same position.
std::vector<EntitySpan> recognize_entities(const std::string& text,
                                           const Gazetteer& gazetteer);

// Replace each span by its type tag, right-to-left so offsets stay valid.
std::string mask_entities(const std::string& text,
                          const std::vector<EntitySpan>& spans);

Case anonymize_case(const Case& c, const Gazetteer& gazetteer);
Corpus anonymize_corpus(const Corpus& corpus, const Gazetteer& gazetteer);

}  // namespace lexpred
