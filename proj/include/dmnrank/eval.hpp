#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmnrank {

/// Relevance labels of one candidate group in ranked order, best first.
struct RankedLabels {
  std::string group_id;
  std::vector<int> labels;

  std::size_t positives() const;
};

// Each returns nullopt when the group has no positive label.
std::optional<double> average_precision(const RankedLabels& ranked);
std::optional<double> reciprocal_rank(const RankedLabels& ranked);
std::optional<double> recall_at_k(const RankedLabels& ranked, std::size_t k);

struct MetricsReport {
  double map = 0.0;
  double mrr = 0.0;
  double recall_1 = 0.0;
  double recall_2 = 0.0;
  double recall_5 = 0.0;
  std::size_t groups = 0;  // groups that entered the averages
  std::size_t groups_skipped = 0;

  std::string text() const;
  static std::string tsv_header();
  std::string tsv_row() const;
};

/// Unweighted means over groups with at least one positive. With no valid
/// group every metric is NaN.
MetricsReport evaluate(std::span<const RankedLabels> rankings);

/// Same, after checking that every id in `required_groups` has a ranking.
/// Throws DataError listing the missing ids.
MetricsReport evaluate(std::span<const RankedLabels> rankings, std::span<const std::string> required_groups);

struct ScoredCandidate {
  std::string group_id;
  double score = 0.0;
  int label = 0;
};

/// Reads `group_id<TAB>score<TAB>label` lines.
std::vector<ScoredCandidate> read_scored_candidates(std::istream& in);
std::vector<ScoredCandidate> read_scored_candidates(const std::filesystem::path& path);

/// Groups rows by id in first-appearance order and sorts each group by
/// descending score; equal scores keep file order.
std::vector<RankedLabels> rank_scored_candidates(std::span<const ScoredCandidate> rows);

}  // namespace dmnrank
