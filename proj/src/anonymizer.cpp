#include "lexpred/anonymizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

namespace lexpred {

namespace {

const std::array<std::pair<EntityType, const char*>, 5> kTypeTags = {{
    {EntityType::Person, "PERSON"},
    {EntityType::Location, "LOCATION"},
    {EntityType::Org, "ORG"},
    {EntityType::Date, "DATE"},
    {EntityType::Number, "NUMBER"},
}};

inline bool word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

// word boundary on both sides of [start, end)
bool bounded(const std::string& s, size_t start, size_t end) {
  if (start > 0 && word_byte(static_cast<unsigned char>(s[start - 1])) &&
      word_byte(static_cast<unsigned char>(s[start])))
    return false;
  if (end < s.size() && word_byte(static_cast<unsigned char>(s[end - 1])) &&
      word_byte(static_cast<unsigned char>(s[end])))
    return false;
  return true;
}

size_t digit_run(const std::string& s, size_t i) {
  size_t j = i;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  return j - i;
}

const char* kMonths[] = {"January", "February", "March",     "April",
                         "May",     "June",     "July",      "August",
                         "September", "October", "November", "December"};

size_t match_month(const std::string& s, size_t i) {
  for (const char* m : kMonths) {
    size_t len = std::char_traits<char>::length(m);
    if (s.compare(i, len, m) == 0 && bounded(s, i, i + len)) return len;
    if (len > 3 && s.compare(i, 3, m, 3) == 0 && bounded(s, i, i + 3))
      return 3;  // "Jan" .. "Dec" abbreviations
  }
  return 0;
}

// "5 May 1999" style or ISO "1999-05-05"; returns match length or 0
size_t match_date(const std::string& s, size_t i) {
  size_t d = digit_run(s, i);
  if (d == 4) {  // ISO
    size_t p = i + 4;
    if (p + 6 <= s.size() && s[p] == '-' && digit_run(s, p + 1) == 2 &&
        p + 3 < s.size() && s[p + 3] == '-' && digit_run(s, p + 4) == 2 &&
        bounded(s, i, p + 6))
      return 10;
  }
  if (d >= 1 && d <= 2) {  // day month year
    size_t p = i + d;
    if (p < s.size() && s[p] == ' ') {
      size_t m = match_month(s, p + 1);
      if (m > 0) {
        size_t q = p + 1 + m;
        if (q < s.size() && s[q] == ' ' && digit_run(s, q + 1) == 4 &&
            bounded(s, i, q + 5))
          return q + 5 - i;
      }
    }
  }
  return 0;
}

}  // namespace

const std::string& entity_type_tag(EntityType t) {
  static const std::array<std::string, 5> tags = {"PERSON", "LOCATION", "ORG",
                                                  "DATE", "NUMBER"};
  return tags[size_t(t)];
}

EntityType entity_type_from_tag(const std::string& tag) {
  for (auto& [t, name] : kTypeTags)
    if (tag == name) return t;
  throw ValidationError("gazetteer: unknown entity type '" + tag + "'");
}

void Gazetteer::add(const std::string& surface, EntityType type) {
  if (surface.empty()) throw ValidationError("gazetteer: empty surface");
  for (auto& [t, name] : kTypeTags)
    if (surface == name)
      throw ValidationError("gazetteer: surface '" + surface +
                            "' collides with a type tag");
  for (auto& [s, t] : entries_) {
    if (s == surface) {
      if (t != type)
        throw ValidationError("gazetteer: surface '" + surface +
                              "' mapped to two types");
      return;
    }
  }
  entries_.emplace_back(surface, type);
  sort_entries();
}

void Gazetteer::sort_entries() {
  std::sort(entries_.begin(), entries_.end(), [](auto& a, auto& b) {
    if (a.first.size() != b.first.size())
      return a.first.size() > b.first.size();
    return a.first < b.first;
  });
}

Gazetteer Gazetteer::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("gazetteer: cannot open " + path);
  Gazetteer g;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError("gazetteer: line " + std::to_string(lineno) +
                            " has no <TAB> separator");
    g.add(line.substr(0, tab), entity_type_from_tag(line.substr(tab + 1)));
  }
  return g;
}

std::vector<EntitySpan> recognize_entities(const std::string& text,
                                           const Gazetteer& gazetteer) {
  std::vector<EntitySpan> spans;
  size_t i = 0, n = text.size();
  while (i < n) {
    // gazetteer first, longest entry first
    bool matched = false;
    for (auto& [surface, type] : gazetteer.entries()) {
      if (surface.size() > n - i) continue;
      if (text.compare(i, surface.size(), surface) == 0 &&
          bounded(text, i, i + surface.size())) {
        spans.push_back({i, i + surface.size(), type});
        i += surface.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::isdigit(static_cast<unsigned char>(text[i])) &&
        bounded(text, i, i + 1)) {
      size_t dlen = match_date(text, i);
      if (dlen > 0) {
        spans.push_back({i, i + dlen, EntityType::Date});
        i += dlen;
        continue;
      }
      size_t r = digit_run(text, i);
      if (bounded(text, i, i + r)) {
        spans.push_back({i, i + r, EntityType::Number});
        i += r;
        continue;
      }
      i += r;
      continue;
    }
    ++i;
  }
  return spans;
}

std::string mask_entities(const std::string& text,
                          const std::vector<EntitySpan>& spans) {
  std::vector<EntitySpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const EntitySpan& a, const EntitySpan& b) {
              return a.start < b.start;
            });
  for (size_t k = 0; k < sorted.size(); ++k) {
    auto& s = sorted[k];
    if (s.start >= s.end || s.end > text.size())
      throw ValidationError("mask_entities: span out of range");
    if (k > 0 && sorted[k - 1].end > s.start)
      throw ValidationError("mask_entities: overlapping spans");
  }
  std::string out = text;
  for (size_t k = sorted.size(); k-- > 0;) {
    auto& s = sorted[k];
    out.replace(s.start, s.end - s.start, entity_type_tag(s.type));
  }
  return out;
}

Case anonymize_case(const Case& c, const Gazetteer& gazetteer) {
  Case out = c;
  for (auto& f : out.facts) f = mask_entities(f, recognize_entities(f, gazetteer));
  if (!out.raw_text.empty())
    out.raw_text =
        mask_entities(out.raw_text, recognize_entities(out.raw_text, gazetteer));
  return out;
}

Corpus anonymize_corpus(const Corpus& corpus, const Gazetteer& gazetteer) {
  Corpus out;
  out.labels = corpus.labels;
  for (auto& s : corpus.splits) {
    CorpusSplit ns;
    ns.name = s.name;
    ns.cases.reserve(s.cases.size());
    for (auto& c : s.cases) ns.cases.push_back(anonymize_case(c, gazetteer));
    out.splits.push_back(std::move(ns));
  }
  return out;
}

}  // namespace lexpred
