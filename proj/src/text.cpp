#include "lexpred/text.hpp"

#include <cctype>

namespace lexpred::text {

namespace {

inline bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

bool is_entity_tag(const std::string& tok) {
  for (const auto& t : entity_tags())
    if (tok == t) return true;
  return false;
}

std::string lowercase_ascii(std::string s) {
  for (char& c : s)
    c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<TokenSpan> tokenize_spans(const std::string& s) {
  std::vector<TokenSpan> out;
  size_t i = 0, n = s.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (is_space_byte(c)) {
      ++i;
      continue;
    }
    if (is_word_byte(c)) {
      size_t j = i;
      while (j < n && is_word_byte(static_cast<unsigned char>(s[j]))) ++j;
      std::string raw = s.substr(i, j - i);
      out.push_back({is_entity_tag(raw) ? raw : lowercase_ascii(raw), i, j});
      i = j;
    } else {
      out.push_back({s.substr(i, 1), i, i + 1});
      ++i;
    }
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  for (auto& sp : tokenize_spans(s)) out.push_back(std::move(sp.token));
  return out;
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0, n = s.size();
  while (i < n) {
    while (i < n && is_space_byte(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < n && !is_space_byte(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace lexpred::text
