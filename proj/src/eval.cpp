#include "dmnrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dmnrank/error.hpp"
#include "dmnrank/settings.hpp"

namespace dmnrank {

std::size_t RankedLabels::positives() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l > 0; }));
}

std::optional<double> average_precision(const RankedLabels& ranked) {
  const auto npos = ranked.positives();
  if (npos == 0) return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < ranked.labels.size(); ++p) {
    if (ranked.labels[p] <= 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(p + 1);
  }
  return sum / static_cast<double>(npos);
}

std::optional<double> reciprocal_rank(const RankedLabels& ranked) {
  for (std::size_t p = 0; p < ranked.labels.size(); ++p)
    if (ranked.labels[p] > 0) return 1.0 / static_cast<double>(p + 1);
  return std::nullopt;
}

std::optional<double> recall_at_k(const RankedLabels& ranked, std::size_t k) {
  if (k == 0) throw ConfigError("recall_at_k: k must be >= 1");
  const auto npos = ranked.positives();
  if (npos == 0) return std::nullopt;
  const auto top = std::min(k, ranked.labels.size());
  const auto hits = std::count_if(ranked.labels.begin(), ranked.labels.begin() + static_cast<std::ptrdiff_t>(top),
                                  [](int l) { return l > 0; });
  return static_cast<double>(hits) / static_cast<double>(npos);
}

MetricsReport evaluate(std::span<const RankedLabels> rankings) {
  MetricsReport r;
  for (const auto& g : rankings) {
    auto ap = average_precision(g);
    if (!ap) {
      ++r.groups_skipped;
      continue;
    }
    ++r.groups;
    r.map += *ap;
    r.mrr += *reciprocal_rank(g);
    r.recall_1 += *recall_at_k(g, 1);
    r.recall_2 += *recall_at_k(g, 2);
    r.recall_5 += *recall_at_k(g, 5);
  }
  const double n = r.groups > 0 ? static_cast<double>(r.groups) : std::numeric_limits<double>::quiet_NaN();
  for (double* m : {&r.map, &r.mrr, &r.recall_1, &r.recall_2, &r.recall_5}) *m /= n;
  return r;
}

MetricsReport evaluate(std::span<const RankedLabels> rankings, std::span<const std::string> required_groups) {
  std::unordered_set<std::string> present;
  for (const auto& g : rankings) present.insert(g.group_id);
  std::vector<std::string> missing;
  for (const auto& id : required_groups)
    if (!present.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " group(s) have no ranking:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  return evaluate(rankings);
}

std::string MetricsReport::text() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "MAP   " << map << "\nMRR   " << mrr << "\nR@1   " << recall_1 << "\nR@2   " << recall_2 << "\nR@5   "
      << recall_5 << "\ngroups " << groups << " (skipped " << groups_skipped << ")\n";
  return out.str();
}

std::string MetricsReport::tsv_header() { return "map\tmrr\tr@1\tr@2\tr@5\tgroups\tgroups_skipped"; }

std::string MetricsReport::tsv_row() const {
  using settings::format_double;
  return format_double(map) + "\t" + format_double(mrr) + "\t" + format_double(recall_1) + "\t" +
         format_double(recall_2) + "\t" + format_double(recall_5) + "\t" + std::to_string(groups) + "\t" +
         std::to_string(groups_skipped);
}

std::vector<ScoredCandidate> read_scored_candidates(std::istream& in) {
  std::vector<ScoredCandidate> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw ParseError(lineno, "expected group_id<TAB>score<TAB>label");
    ScoredCandidate row;
    row.group_id = line.substr(0, t1);
    try {
      row.score = settings::to_double("score", std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
    auto label = std::string_view(line).substr(t2 + 1);
    if (label != "0" && label != "1") throw ParseError(lineno, "label must be 0 or 1");
    row.label = label == "1" ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ScoredCandidate> read_scored_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ranking file " + path.string());
  return read_scored_candidates(in);
}

std::vector<RankedLabels> rank_scored_candidates(std::span<const ScoredCandidate> rows) {
  std::vector<std::vector<const ScoredCandidate*>> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& row : rows) {
    auto [it, fresh] = slot.emplace(row.group_id, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&row);
  }
  std::vector<RankedLabels> out;
  out.reserve(groups.size());
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(), [](auto* a, auto* b) { return a->score > b->score; });
    RankedLabels r{g.front()->group_id, {}};
    for (auto* row : g) r.labels.push_back(row->label);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dmnrank
