#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emgnn::text {

namespace detail {

inline constexpr std::array<std::string_view, 10> kDigitWords{
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Expands one whitespace-delimited, lowercased word. Only clitics with an
// unambiguous reading are rewritten; a possessive 's is left to the splitter.
inline std::string expand_contraction(std::string w) {
  static const std::array<std::pair<std::string_view, std::string_view>, 6> whole{{
      {"won't", "will not"},
      {"can't", "can not"},
      {"shan't", "shall not"},
      {"let's", "let us"},
      {"ain't", "is not"},
      {"y'all", "you all"},
  }};
  for (const auto& [from, to] : whole) {
    if (w == from) return std::string(to);
  }
  static const std::array<std::pair<std::string_view, std::string_view>, 5> suffixes{{
      {"n't", " not"},
      {"'re", " are"},
      {"'ve", " have"},
      {"'ll", " will"},
      {"'m", " am"},
  }};
  for (const auto& [from, to] : suffixes) {
    if (ends_with(w, from) && w.size() > from.size()) {
      return w.substr(0, w.size() - from.size()) + std::string(to);
    }
  }
  static const std::array<std::string_view, 10> is_hosts{
      "it", "that", "what", "there", "he", "she", "where", "who", "here", "how"};
  if (ends_with(w, "'s")) {
    const auto host = std::string_view(w).substr(0, w.size() - 2);
    for (auto h : is_hosts) {
      if (host == h) return std::string(host) + " is";
    }
  }
  return w;
}

inline bool is_word_char(unsigned char c) { return std::isalpha(c) || c >= 0x80; }

}  // namespace detail

/// Lowercases, expands contractions, spells digits as words and splits on
/// whitespace and punctuation; keeps at most `max_len` tokens.
inline std::vector<std::string> tokenize(std::string_view text, std::size_t max_len) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  std::string expanded;
  std::size_t i = 0;
  while (i < lower.size()) {
    if (std::isspace(static_cast<unsigned char>(lower[i]))) {
      expanded.push_back(' ');
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lower.size() && !std::isspace(static_cast<unsigned char>(lower[j]))) ++j;
    // Surrounding punctuation stays put; only the core is expanded.
    std::size_t a = i, b = j;
    while (a < b && !detail::is_word_char(static_cast<unsigned char>(lower[a]))) ++a;
    while (b > a && !detail::is_word_char(static_cast<unsigned char>(lower[b - 1]))) --b;
    expanded += lower.substr(i, a - i);
    expanded += detail::expand_contraction(lower.substr(a, b - a));
    expanded += lower.substr(b, j - b);
    i = j;
  }

  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : expanded) {
    const auto c = static_cast<unsigned char>(ch);
    if (detail::is_word_char(c)) {
      word.push_back(ch);
    } else if (std::isdigit(c)) {
      flush();
      out.emplace_back(detail::kDigitWords[c - '0']);
    } else if (std::isspace(c)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, ch);
    }
  }
  flush();
  if (out.size() > max_len) out.resize(max_len);
  return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k) s.push_back(' ');
    s += tokens[k];
  }
  return s;
}

}  // namespace emgnn::text
