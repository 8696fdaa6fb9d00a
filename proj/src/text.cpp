#include "dmnrank/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "dmnrank/error.hpp"

namespace dmnrank {

Truncation parse_truncation(std::string_view name) {
  if (name == "head") return Truncation::head;
  if (name == "tail") return Truncation::tail;
  throw ConfigError("unknown truncation mode '" + std::string(name) + "' (expected head|tail)");
}

std::string_view to_string(Truncation t) { return t == Truncation::head ? "head" : "tail"; }

Tokenizer::Tokenizer() : Tokenizer(Options{}) {}

Tokenizer::Tokenizer(Options options) : options_(std::move(options)) {
  if (options_.punctuation.empty()) {
    for (int c = 0; c < 128; ++c) punct_table_[c] = std::ispunct(c) != 0;
  } else {
    for (unsigned char c : options_.punctuation) punct_table_[c] = true;
  }
}

bool Tokenizer::is_punct(unsigned char c) const noexcept { return punct_table_[c]; }

Tokens Tokenizer::operator()(std::string_view raw) const {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !options_.stopwords.contains(current)) out.push_back(current);
    current.clear();
  };
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
      continue;
    }
    if (options_.strip_punctuation && is_punct(c)) continue;
    if (options_.lowercase && c < 128) c = static_cast<unsigned char>(std::tolower(c));
    current.push_back(static_cast<char>(c));
  }
  flush();
  return out;
}

Tokens tokenize(std::string_view raw, const Tokenizer& tokenizer) { return tokenizer(raw); }

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    words.insert(line.substr(first, last - first + 1));
  }
  return words;
}

Tokens truncate(const Tokens& tokens, std::size_t max_len, Truncation mode) {
  if (tokens.size() <= max_len) return tokens;
  if (mode == Truncation::head) return {tokens.begin(), tokens.begin() + max_len};
  return {tokens.end() - max_len, tokens.end()};
}

Vocabulary::Vocabulary() {
  push(std::string(kPadToken));
  push(std::string(kUnkToken));
}

void Vocabulary::push(std::string token) {
  auto id = static_cast<TokenId>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const Tokens> streams, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& stream : streams)
    for (const auto& tok : stream) ++counts[tok];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n < min_count || tok == kPadToken || tok == kUnkToken) continue;
    kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.min_count_ = min_count;
  for (auto& [tok, n] : kept) vocab.push(tok);
  return vocab;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw DataError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\t' << i << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  save(out);
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  vocab.token_to_id_.clear();
  vocab.id_to_token_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(lineno, "expected token<TAB>id");
    std::string token = line.substr(0, tab);
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad vocabulary id");
    }
    if (id != vocab.id_to_token_.size()) throw ParseError(lineno, "vocabulary ids must be dense and sorted");
    if (vocab.token_to_id_.contains(token)) throw ParseError(lineno, "duplicate token '" + token + "'");
    vocab.push(std::move(token));
  }
  if (vocab.id_to_token_.size() < 2 || vocab.id_to_token_[0] != kPadToken ||
      vocab.id_to_token_[1] != kUnkToken)
    throw DataError("vocabulary must start with " + std::string(kPadToken) + " and " +
                    std::string(kUnkToken));
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  return load(in);
}

Vocabulary build_vocab(std::span<const Tokens> streams, std::size_t min_count) {
  return Vocabulary::build(streams, min_count);
}

EncodedText encode(const Tokens& tokens, const Vocabulary& vocab, std::size_t max_len, Truncation mode) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  EncodedText out;
  out.ids.assign(max_len, kPadId);
  auto kept = truncate(tokens, max_len, mode);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    auto id = vocab.id(kept[i]);
    out.ids[i] = id == kPadId ? kUnkId : id;
  }
  out.true_len = kept.size();
  return out;
}

Tokens decode(const EncodedText& text, const Vocabulary& vocab) {
  Tokens out;
  out.reserve(text.true_len);
  for (std::size_t i = 0; i < text.true_len; ++i) out.push_back(vocab.token(text.ids[i]));
  return out;
}

}  // namespace dmnrank
