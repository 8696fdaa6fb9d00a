#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmnrank/text.hpp"

namespace dmnrank {

class InvertedIndex;

inline constexpr std::string_view kTurnDelimiter = "__eot__";

struct Candidate {
  Tokens response;
  int label = 0;
};

/// One conversation context with its labeled response candidates.
struct DialogExample {
  std::string dialog_id;
  std::vector<Tokens> context;
  std::vector<Candidate> candidates;

  std::size_t positives() const;
  std::size_t negatives() const { return candidates.size() - positives(); }
};

struct QAPair {
  std::string id;
  Tokens question;
  Tokens answer;
};

/// One parsed `label<TAB>context<TAB>response` line.
struct DatasetLine {
  int label = 0;
  std::string context_raw;
  std::vector<Tokens> context;
  Tokens response;
};

DatasetLine parse_dataset_line(std::string_view line, const Tokenizer& tokenizer,
                               std::size_t line_number = 0);

/// Splits on the turn delimiter and tokenizes each piece; empty turns are dropped.
std::vector<Tokens> split_context(std::string_view context, const Tokenizer& tokenizer);

/// Last min(len, c) utterances.
std::vector<Tokens> window_context(const std::vector<Tokens>& utterances, std::size_t c);

/// Throws DataError when an example violates its invariants.
void validate(const DialogExample& example, std::size_t max_context);

struct LoadOptions {
  std::size_t max_context = 10;
};

/// Consecutive lines with an identical raw context string form one example.
/// Examples are numbered from 0 in file order; the ordinal becomes dialog_id.
std::vector<DialogExample> load_dataset(std::istream& in, const Tokenizer& tokenizer,
                                        const LoadOptions& options = {});
std::vector<DialogExample> load_dataset(const std::filesystem::path& path, const Tokenizer& tokenizer,
                                        const LoadOptions& options = {});

/// `id<TAB>question<TAB>answer`; pairs whose question or answer tokenizes to
/// nothing are rejected.
std::vector<QAPair> load_qa_pairs(std::istream& in, const Tokenizer& tokenizer);
std::vector<QAPair> load_qa_pairs(const std::filesystem::path& path, const Tokenizer& tokenizer);

enum class NegativeSampler { uniform, bm25 };

NegativeSampler parse_sampler(std::string_view name);

struct CandidateOptions {
  std::size_t n_neg = 9;
  std::size_t depth = 1000;
  NegativeSampler sampler = NegativeSampler::bm25;
};

/// The positive (label 1) followed by n_neg sampled negatives (label 0).
/// `pool` holds the documents of `pool_index` in index order. Negatives that
/// equal the positive token-for-token are never sampled.
std::vector<Candidate> build_candidates(const Tokens& positive, const InvertedIndex& pool_index,
                                        std::span<const Tokens> pool, const CandidateOptions& options,
                                        std::uint64_t seed);

}  // namespace dmnrank
