#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "dmnrank/corpus.hpp"
#include "dmnrank/knowledge.hpp"
#include "dmnrank/model.hpp"
#include "dmnrank/retrieval.hpp"
#include "dmnrank/training.hpp"

namespace dmnrank {

enum class Command { index, build_data, train, eval, rank, expand };

Command parse_command(std::string_view name);
std::string_view to_string(Command command);

enum class Ranker { model, bm25, bm25_prf };

Ranker parse_ranker(std::string_view name);
std::string_view to_string(Ranker ranker);

/// Everything one CLI invocation needs: model and training settings,
/// tokenizer and knowledge options, and file paths.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  bool lowercase = true;
  bool strip_punctuation = true;
  std::string punctuation;  // empty selects the ASCII punctuation set
  std::filesystem::path stopwords;
  std::size_t min_count = 5;

  KnowledgeOptions knowledge;
  std::optional<IndexField> index_field;  // unset: answer for DMN-PRF, concatenated otherwise
  CandidateOptions candidates;
  Ranker ranker = Ranker::model;

  std::filesystem::path train_data, valid_data, test_data;
  std::filesystem::path dialogs;  // context<TAB>response lines for build-data
  std::filesystem::path qa, index, checkpoint, cache, embeddings;
  std::filesystem::path ranking;  // precomputed ranking to evaluate
  std::filesystem::path output, log;

  /// Throws ConfigError for unknown keys or malformed values.
  void apply(std::string_view key, std::string_view value);
  /// `key=value` lines; blank lines and lines starting with '#' are ignored.
  void load_file(const std::filesystem::path& path);
  /// Checks every invariant the command relies on, including that input
  /// files exist, before any output is written.
  void validate(Command command) const;

  IndexField effective_index_field() const;
  Tokenizer make_tokenizer() const;
  std::map<std::string, std::string> to_settings() const;
};

}  // namespace dmnrank
