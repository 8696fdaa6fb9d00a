#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dmnrank/corpus.hpp"
#include "dmnrank/nn/tensor.hpp"
#include "dmnrank/retrieval.hpp"

namespace dmnrank {

/// Maximum-likelihood unigram model of a set of feedback documents.
struct FeedbackModel {
  /// Sorted by probability descending, ties lexicographic.
  std::vector<std::pair<std::string, double>> term_probs;
  std::vector<std::string> source_doc_ids;

  double probability(std::string_view term) const;
  /// The w most probable terms.
  Tokens top_terms(std::size_t w) const;
};

/// Throws DataError when the documents hold no tokens at all.
FeedbackModel feedback_language_model(std::span<const Tokens> docs);
FeedbackModel feedback_language_model(const InvertedIndex& index, std::span<const SearchHit> hits);

/// The terms appended by expand_response: top `expansion_terms` of the
/// feedback model over the top `feedback_docs` hits for the response.
Tokens expansion_terms(const Tokens& response, const InvertedIndex& index, std::size_t feedback_docs,
                       std::size_t expansion_terms, const Bm25Params& params = {});

/// response followed by its expansion terms; unchanged when retrieval is empty.
Tokens expand_response(const Tokens& response, const InvertedIndex& index, std::size_t feedback_docs,
                       std::size_t expansion_terms, const Bm25Params& params = {});

enum class PpmiCounting { frequency, binary };

PpmiCounting parse_ppmi_counting(std::string_view name);
std::string_view to_string(PpmiCounting counting);

/// Question/answer term statistics over a retrieved QA-pair set. With binary
/// counting every question and answer is reduced to its set of terms first.
class PpmiStats {
 public:
  PpmiStats() = default;
  PpmiStats(std::span<const QAPair> pairs, PpmiCounting counting);

  /// sum_p count(w_r in A_p) * count(w_u in Q_p)
  double joint_count(std::string_view response_term, std::string_view utterance_term) const;
  double answer_count(std::string_view term) const;
  double question_count(std::string_view term) const;
  /// sum_p |A_p| * |Q_p|
  double joint_total() const noexcept { return joint_total_; }
  double answer_total() const noexcept { return answer_total_; }
  double question_total() const noexcept { return question_total_; }
  bool empty() const noexcept { return pairs_.empty(); }

  /// max(0, ln(p_joint / (p(w_r|A) p(w_u|Q)))), 0 when any factor is zero.
  double ppmi(std::string_view response_term, std::string_view utterance_term) const;

 private:
  using Counts = std::unordered_map<std::string, double>;
  struct PairCounts {
    Counts answer;
    Counts question;
  };
  std::vector<PairCounts> pairs_;
  Counts answer_marginals_;
  Counts question_marginals_;
  double joint_total_ = 0.0;
  double answer_total_ = 0.0;
  double question_total_ = 0.0;
};

/// Correspondence matrix with rows for response positions and columns for
/// utterance positions. Positions beyond the token lists are zero.
nn::Tensor ppmi_matrix(const Tokens& response, const Tokens& utterance, const PpmiStats& stats, std::size_t rows,
                       std::size_t cols);
nn::Tensor ppmi_matrix(const Tokens& response, const Tokens& utterance, std::span<const QAPair> retrieved_pairs,
                       std::size_t rows, std::size_t cols, PpmiCounting counting = PpmiCounting::frequency);
/// Shape |response| x |utterance|.
nn::Tensor ppmi_matrix(const Tokens& response, const Tokens& utterance, std::span<const QAPair> retrieved_pairs,
                       PpmiCounting counting = PpmiCounting::frequency);

/// QA pairs addressable by id.
class QaCollection {
 public:
  QaCollection() = default;
  explicit QaCollection(std::vector<QAPair> pairs);

  const QAPair& at(std::string_view id) const;
  std::span<const QAPair> pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }

 private:
  std::vector<QAPair> pairs_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Top-P pairs for the response used as a BM25 query.
std::vector<QAPair> retrieve_qa_pairs(const Tokens& response, const InvertedIndex& index,
                                      const QaCollection& collection, std::size_t top_p,
                                      const Bm25Params& params = {});

/// 64-bit FNV-1a over the salt and the space-joined tokens, as 16 hex digits.
std::string content_hash(const Tokens& tokens, std::string_view salt = {});

/// On-disk memo of knowledge lookups: `hash<TAB>kind<TAB>space-separated values`.
class KnowledgeCache {
 public:
  KnowledgeCache() = default;

  std::optional<Tokens> find(std::string_view kind, const std::string& key) const;
  void put(std::string_view kind, const std::string& key, Tokens values);
  std::size_t size() const noexcept { return entries_.size(); }

  void load(const std::filesystem::path& path);
  /// Rows sorted by (hash, kind) so identical contents give identical files.
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::pair<std::string, std::string>, Tokens> entries_;
};

struct KnowledgeOptions {
  std::size_t prf_docs = 10;         // P for expansion
  std::size_t expansion_terms = 10;  // W
  std::size_t kd_pairs = 10;         // P for QA-pair retrieval
  PpmiCounting counting = PpmiCounting::frequency;
  Bm25Params bm25;
};

/// Knowledge lookups against one external index, memoized through an optional cache.
class KnowledgeBase {
 public:
  KnowledgeBase(const InvertedIndex& index, const QaCollection* collection, KnowledgeOptions options,
                KnowledgeCache* cache = nullptr);

  Tokens expansion(const Tokens& response) const;
  Tokens expand(const Tokens& response) const;
  std::vector<QAPair> related_pairs(const Tokens& response) const;

  const KnowledgeOptions& options() const noexcept { return options_; }
  const InvertedIndex& index() const noexcept { return *index_; }

 private:
  const InvertedIndex* index_;
  const QaCollection* collection_;
  KnowledgeOptions options_;
  KnowledgeCache* cache_;
};

}  // namespace dmnrank
