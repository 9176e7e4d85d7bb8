#pragma once
// Tokenization shared by the corpus, baselines, and anonymizer alignment.

#include <array>
#include <string>
#include <vector>

namespace lexpred::text {

// Entity type tags pass through tokenization unchanged; everything else is
// lowercased. Word runs are alnum sequences (bytes >= 0x80 count as letters
// so UTF-8 stays intact); any other printable char is its own token.
inline const std::array<std::string, 5>& entity_tags() {
  static const std::array<std::string, 5> tags = {"PERSON", "LOCATION", "ORG",
                                                  "DATE", "NUMBER"};
  return tags;
}

bool is_entity_tag(const std::string& tok);

struct TokenSpan {
  std::string token;
  size_t start = 0;  // byte offsets into the source text
  size_t end = 0;
};

std::vector<TokenSpan> tokenize_spans(const std::string& s);
std::vector<std::string> tokenize(const std::string& s);

// Plain whitespace split, used for word counts in corpus statistics.
std::vector<std::string> whitespace_tokens(const std::string& s);

std::string lowercase_ascii(std::string s);

}  // namespace lexpred::text
