#include "premise/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace premise {

namespace {

bool is_alnum(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead >= 0xF0) return 4;
  if (lead >= 0xE0) return 3;
  if (lead >= 0xC0) return 2;
  return 1;  // stray continuation byte
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> words, std::size_t max_len) : max_len_(max_len) {
  if (max_len_ == 0) throw std::invalid_argument("max_len must be positive");
  id_to_token_ = {"<unk>", "<empty>"};
  for (auto& w : words) {
    if (w == "<unk>" || w == "<empty>") continue;
    id_to_token_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<std::int32_t>(i)).second)
      throw std::invalid_argument("duplicate vocabulary entry '" + id_to_token_[i] + "'");
  }
}

Tokenizer Tokenizer::build(std::span<const std::string> texts, std::size_t max_len,
                           std::size_t min_frequency) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts)
    for (auto& tok : split(t)) ++freq[std::move(tok)];
  std::vector<std::string> words;
  for (const auto& [tok, n] : freq)
    if (n >= min_frequency) words.push_back(tok);
  return Tokenizer(std::move(words), max_len);
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_alnum(c)) {
      std::size_t j = i;
      std::string word;
      while (j < text.size() && is_alnum(static_cast<unsigned char>(text[j]))) {
        char ch = text[j++];
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
        word.push_back(ch);
      }
      out.push_back(std::move(word));
      i = j;
    } else if (c < 0x80) {
      out.emplace_back(1, text[i]);
      ++i;
    } else {
      const std::size_t n = std::min(utf8_length(c), text.size() - i);
      out.emplace_back(text.substr(i, n));
      i += n;
    }
  }
  return out;
}

std::vector<std::int32_t> Tokenizer::tokenize(std::string_view text) const {
  std::vector<std::int32_t> ids;
  for (const auto& tok : split(text)) {
    if (ids.size() == max_len_) break;
    ids.push_back(id(tok));
  }
  return ids;
}

std::int32_t Tokenizer::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

}  // namespace premise
