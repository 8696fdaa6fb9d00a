#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dmnrank/corpus.hpp"
#include "dmnrank/text.hpp"

namespace dmnrank {

enum class IndexField { question, answer, concatenated };

IndexField parse_index_field(std::string_view name);
std::string_view to_string(IndexField field);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// ln((N - df + 0.5) / (df + 0.5) + 1), never negative.
double bm25_idf(std::size_t doc_count, std::size_t doc_freq);

/// Saturated term-frequency component of one query-term contribution.
double bm25_tf_weight(double tf, double doc_len, double avg_doc_len, const Bm25Params& params);

struct SearchHit {
  std::string doc_id;
  double score = 0.0;
  std::uint32_t doc = 0;  // position in the index
};

class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };
  struct TermCount {
    std::uint32_t term;
    std::uint32_t tf;
  };

  class Builder {
   public:
    explicit Builder(IndexField field = IndexField::concatenated);
    /// Throws DataError on a duplicate doc id.
    void add(std::string doc_id, const Tokens& tokens);
    InvertedIndex finish() &&;

   private:
    IndexField field_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> lookup_;
    std::vector<std::vector<TermCount>> forward_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::string> terms_;
  };

  InvertedIndex() = default;

  IndexField field() const noexcept { return field_; }
  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  double avg_doc_len() const noexcept { return avg_doc_len_; }
  std::size_t term_count() const noexcept { return terms_.size(); }

  const std::string& doc_id(std::uint32_t doc) const { return doc_ids_.at(doc); }
  /// Throws DataError for an unknown id.
  std::uint32_t doc_index(std::string_view doc_id) const;
  bool has_doc(std::string_view doc_id) const;
  std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }

  /// Empty span for unknown terms.
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t doc_frequency(std::string_view term) const { return postings(term).size(); }
  const std::string& term(std::uint32_t id) const { return terms_.at(id); }
  /// Bag of words of one document, terms in first-occurrence order.
  std::span<const TermCount> doc_terms(std::uint32_t doc) const { return forward_.at(doc); }

  double bm25_score(const Tokens& query, std::string_view doc_id, const Bm25Params& params = {}) const;
  double bm25_score(const Tokens& query, std::uint32_t doc, const Bm25Params& params = {}) const;

  /// Top-k by BM25, descending, ties by ascending doc id. Only documents that
  /// share at least one term with the query are returned.
  std::vector<SearchHit> search(const Tokens& query, std::size_t k, const Bm25Params& params = {}) const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(std::istream& in);
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  void finalize();
  double term_contribution(std::uint32_t term, std::uint32_t tf, std::uint32_t doc,
                           const Bm25Params& params) const;

  IndexField field_ = IndexField::concatenated;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, std::uint32_t> doc_lookup_;
  std::vector<std::uint32_t> doc_lengths_;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::vector<TermCount>> forward_;
  double avg_doc_len_ = 0.0;
};

Tokens document_tokens(const QAPair& pair, IndexField field);

/// Indexes each pair under its id. Throws DataError on duplicate ids.
InvertedIndex build_index(std::span<const QAPair> pairs, IndexField field);

struct RankedCandidate {
  std::size_t index = 0;
  double score = 0.0;
};

using ResponseExpander = std::function<Tokens(const Tokens&)>;

/// Baseline ranker: the concatenated context is the query and the candidates
/// form a micro-collection. With an expander, each candidate is expanded first
/// (BM25-PRF). Descending score, ties by candidate index.
std::vector<RankedCandidate> bm25_rank_responses(const DialogExample& example,
                                                 const ResponseExpander& expander = {},
                                                 const Bm25Params& params = {});

}  // namespace dmnrank
