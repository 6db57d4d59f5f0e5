#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace premise {

// Word-level tokenizer. ASCII alphanumeric runs become lowercased words,
// every ASCII punctuation character and every non-ASCII code point is a
// token of its own, and whitespace separates.
class Tokenizer {
 public:
  static constexpr std::int32_t kUnkId = 0;
  static constexpr std::int32_t kEmptyId = 1;
  static constexpr std::size_t kDefaultMaxLen = 256;

  Tokenizer() : Tokenizer(std::vector<std::string>{}, kDefaultMaxLen) {}
  // `words` excludes the two reserved entries, which are always ids 0 and 1.
  Tokenizer(std::vector<std::string> words, std::size_t max_len);

  // Vocabulary of every distinct token in `texts`, sorted.
  static Tokenizer build(std::span<const std::string> texts, std::size_t max_len = kDefaultMaxLen,
                         std::size_t min_frequency = 1);

  static std::vector<std::string> split(std::string_view text);

  std::vector<std::int32_t> tokenize(std::string_view text) const;
  // Number of tokens before truncation.
  std::size_t raw_length(std::string_view text) const { return split(text).size(); }

  std::size_t vocab_size() const { return id_to_token_.size(); }
  std::size_t max_len() const { return max_len_; }
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  bool operator==(const Tokenizer& o) const {
    return max_len_ == o.max_len_ && id_to_token_ == o.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::size_t max_len_;
};

}  // namespace premise
