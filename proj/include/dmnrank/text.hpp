#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dmnrank {

using Tokens = std::vector<std::string>;
using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

enum class Truncation { head, tail };

Truncation parse_truncation(std::string_view name);
std::string_view to_string(Truncation t);

/// Whitespace tokenizer with optional lowercasing, punctuation stripping and
/// stopword removal. Punctuation characters are deleted, not used as
/// separators, and tokens left empty are dropped.
class Tokenizer {
 public:
  struct Options {
    bool lowercase = true;
    bool strip_punctuation = true;
    std::unordered_set<std::string> stopwords;
    /// Characters removed when strip_punctuation is on. Empty means ASCII ispunct.
    std::string punctuation;
  };

  Tokenizer();
  explicit Tokenizer(Options options);

  Tokens operator()(std::string_view raw) const;

  const Options& options() const noexcept { return options_; }

 private:
  bool is_punct(unsigned char c) const noexcept;

  Options options_;
  bool punct_table_[256] = {};
};

Tokens tokenize(std::string_view raw, const Tokenizer& tokenizer);

/// One token per line, blank lines ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

/// Keeps the first (head) or last (tail) max_len tokens.
Tokens truncate(const Tokens& tokens, std::size_t max_len, Truncation mode = Truncation::head);

class Vocabulary {
 public:
  /// Only PAD and UNK.
  Vocabulary();

  /// Ids assigned by descending frequency, ties broken lexicographically.
  static Vocabulary build(std::span<const Tokens> streams, std::size_t min_count);

  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return id_to_token_.size(); }
  std::size_t min_count() const noexcept { return min_count_; }
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  /// `token<TAB>id` per line, sorted by id.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void push(std::string token);

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::size_t min_count_ = 1;
};

Vocabulary build_vocab(std::span<const Tokens> streams, std::size_t min_count);

struct EncodedText {
  std::vector<TokenId> ids;
  std::size_t true_len = 0;

  std::size_t max_len() const noexcept { return ids.size(); }
  friend bool operator==(const EncodedText&, const EncodedText&) = default;
};

/// OOV tokens map to UNK; output always has exactly max_len ids.
EncodedText encode(const Tokens& tokens, const Vocabulary& vocab, std::size_t max_len,
                   Truncation mode = Truncation::head);

/// Tokens of the non-PAD prefix.
Tokens decode(const EncodedText& text, const Vocabulary& vocab);

}  // namespace dmnrank
