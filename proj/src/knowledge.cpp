#include "dmnrank/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dmnrank/error.hpp"

namespace dmnrank {

namespace {

FeedbackModel model_from_counts(const std::unordered_map<std::string, std::size_t>& counts, std::size_t total,
                                std::vector<std::string> ids) {
  if (total == 0) throw DataError("feedback documents contain no tokens");
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  FeedbackModel model;
  model.source_doc_ids = std::move(ids);
  model.term_probs.reserve(sorted.size());
  for (auto& [term, n] : sorted)
    model.term_probs.emplace_back(term, static_cast<double>(n) / static_cast<double>(total));
  return model;
}

}  // namespace

double FeedbackModel::probability(std::string_view term) const {
  for (const auto& [t, p] : term_probs)
    if (t == term) return p;
  return 0.0;
}

Tokens FeedbackModel::top_terms(std::size_t w) const {
  Tokens out;
  for (std::size_t i = 0; i < std::min(w, term_probs.size()); ++i) out.push_back(term_probs[i].first);
  return out;
}

FeedbackModel feedback_language_model(std::span<const Tokens> docs) {
  if (docs.empty()) throw DataError("feedback set is empty");
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& d : docs) {
    for (const auto& t : d) ++counts[t];
    total += d.size();
  }
  return model_from_counts(counts, total, {});
}

FeedbackModel feedback_language_model(const InvertedIndex& index, std::span<const SearchHit> hits) {
  if (hits.empty()) throw DataError("feedback set is empty");
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  std::vector<std::string> ids;
  for (const auto& hit : hits) {
    for (auto [term, tf] : index.doc_terms(hit.doc)) counts[index.term(term)] += tf;
    total += index.doc_length(hit.doc);
    ids.push_back(hit.doc_id);
  }
  return model_from_counts(counts, total, std::move(ids));
}

Tokens expansion_terms(const Tokens& response, const InvertedIndex& index, std::size_t feedback_docs,
                       std::size_t expansion_terms, const Bm25Params& params) {
  if (feedback_docs < 1) throw ConfigError("feedback document count must be >= 1");
  if (expansion_terms == 0 || index.doc_count() == 0) return {};
  auto hits = index.search(response, feedback_docs, params);
  if (hits.empty()) return {};
  return feedback_language_model(index, hits).top_terms(expansion_terms);
}

Tokens expand_response(const Tokens& response, const InvertedIndex& index, std::size_t feedback_docs,
                       std::size_t expansion_count, const Bm25Params& params) {
  Tokens out = response;
  auto extra = expansion_terms(response, index, feedback_docs, expansion_count, params);
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

PpmiCounting parse_ppmi_counting(std::string_view name) {
  if (name == "frequency") return PpmiCounting::frequency;
  if (name == "binary") return PpmiCounting::binary;
  throw ConfigError("unknown ppmi counting '" + std::string(name) + "' (expected frequency|binary)");
}

std::string_view to_string(PpmiCounting counting) {
  return counting == PpmiCounting::frequency ? "frequency" : "binary";
}

PpmiStats::PpmiStats(std::span<const QAPair> pairs, PpmiCounting counting) {
  auto bag = [counting](const Tokens& toks, Counts& out) {
    for (const auto& t : toks) {
      if (counting == PpmiCounting::binary)
        out[t] = 1.0;
      else
        out[t] += 1.0;
    }
    double n = 0.0;
    for (const auto& [t, c] : out) n += c;
    return n;
  };
  pairs_.reserve(pairs.size());
  for (const auto& p : pairs) {
    PairCounts pc;
    const double na = bag(p.answer, pc.answer);
    const double nq = bag(p.question, pc.question);
    for (const auto& [t, c] : pc.answer) answer_marginals_[t] += c;
    for (const auto& [t, c] : pc.question) question_marginals_[t] += c;
    answer_total_ += na;
    question_total_ += nq;
    joint_total_ += na * nq;
    pairs_.push_back(std::move(pc));
  }
}

double PpmiStats::joint_count(std::string_view response_term, std::string_view utterance_term) const {
  const std::string wr(response_term), wu(utterance_term);
  double total = 0.0;
  for (const auto& pc : pairs_) {
    auto a = pc.answer.find(wr);
    if (a == pc.answer.end()) continue;
    auto q = pc.question.find(wu);
    if (q == pc.question.end()) continue;
    total += a->second * q->second;
  }
  return total;
}

double PpmiStats::answer_count(std::string_view term) const {
  auto it = answer_marginals_.find(std::string(term));
  return it == answer_marginals_.end() ? 0.0 : it->second;
}

double PpmiStats::question_count(std::string_view term) const {
  auto it = question_marginals_.find(std::string(term));
  return it == question_marginals_.end() ? 0.0 : it->second;
}

double PpmiStats::ppmi(std::string_view response_term, std::string_view utterance_term) const {
  if (pairs_.empty() || joint_total_ == 0.0) return 0.0;
  const double ac = answer_count(response_term);
  const double qc = question_count(utterance_term);
  if (ac == 0.0 || qc == 0.0) return 0.0;
  const double jc = joint_count(response_term, utterance_term);
  if (jc == 0.0) return 0.0;
  const double joint = jc / joint_total_;
  const double pa = ac / answer_total_;
  const double pq = qc / question_total_;
  return std::max(0.0, std::log(joint / (pa * pq)));
}

nn::Tensor ppmi_matrix(const Tokens& response, const Tokens& utterance, const PpmiStats& stats, std::size_t rows,
                       std::size_t cols) {
  nn::Tensor m({rows, cols});
  if (stats.empty()) return m;
  const auto nr = std::min(rows, response.size()), nc = std::min(cols, utterance.size());
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) m(i, j) = stats.ppmi(response[i], utterance[j]);
  return m;
}

nn::Tensor ppmi_matrix(const Tokens& response, const Tokens& utterance, std::span<const QAPair> retrieved_pairs,
                       std::size_t rows, std::size_t cols, PpmiCounting counting) {
  return ppmi_matrix(response, utterance, PpmiStats(retrieved_pairs, counting), rows, cols);
}

nn::Tensor ppmi_matrix(const Tokens& response, const Tokens& utterance, std::span<const QAPair> retrieved_pairs,
                       PpmiCounting counting) {
  return ppmi_matrix(response, utterance, retrieved_pairs, response.size(), utterance.size(), counting);
}

QaCollection::QaCollection(std::vector<QAPair> pairs) : pairs_(std::move(pairs)) {
  for (std::size_t i = 0; i < pairs_.size(); ++i)
    if (!lookup_.emplace(pairs_[i].id, i).second) throw DataError("duplicate QA pair id '" + pairs_[i].id + "'");
}

const QAPair& QaCollection::at(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) throw DataError("unknown QA pair id '" + std::string(id) + "'");
  return pairs_[it->second];
}

std::vector<QAPair> retrieve_qa_pairs(const Tokens& response, const InvertedIndex& index,
                                      const QaCollection& collection, std::size_t top_p, const Bm25Params& params) {
  std::vector<QAPair> out;
  if (index.doc_count() == 0 || top_p == 0) return out;
  for (const auto& hit : index.search(response, top_p, params)) out.push_back(collection.at(hit.doc_id));
  return out;
}

std::string content_hash(const Tokens& tokens, std::string_view salt) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  mix(salt);
  for (const auto& t : tokens) {
    mix(" ");
    mix(t);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::optional<Tokens> KnowledgeCache::find(std::string_view kind, const std::string& key) const {
  auto it = entries_.find({key, std::string(kind)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void KnowledgeCache::put(std::string_view kind, const std::string& key, Tokens values) {
  entries_[{key, std::string(kind)}] = std::move(values);
}

void KnowledgeCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open knowledge cache " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError(lineno, "expected hash<TAB>kind<TAB>values");
    Tokens values;
    std::istringstream vs(line.substr(t2 + 1));
    for (std::string v; vs >> v;) values.push_back(v);
    put(line.substr(t1 + 1, t2 - t1 - 1), line.substr(0, t1), std::move(values));
  }
}

void KnowledgeCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write knowledge cache " + path.string());
  for (const auto& [key, values] : entries_) {
    out << key.first << '\t' << key.second << '\t';
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << values[i];
    out << '\n';
  }
}

KnowledgeBase::KnowledgeBase(const InvertedIndex& index, const QaCollection* collection, KnowledgeOptions options,
                             KnowledgeCache* cache)
    : index_(&index), collection_(collection), options_(options), cache_(cache) {}

Tokens KnowledgeBase::expansion(const Tokens& response) const {
  std::string key;
  if (cache_) {
    key = content_hash(response, "prf:" + std::to_string(options_.prf_docs) + ":" +
                                     std::to_string(options_.expansion_terms));
    if (auto hit = cache_->find("expansion", key)) return *hit;
  }
  auto terms = expansion_terms(response, *index_, options_.prf_docs, options_.expansion_terms, options_.bm25);
  if (cache_) cache_->put("expansion", key, terms);
  return terms;
}

Tokens KnowledgeBase::expand(const Tokens& response) const {
  Tokens out = response;
  auto extra = expansion(response);
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

std::vector<QAPair> KnowledgeBase::related_pairs(const Tokens& response) const {
  if (!collection_) throw ConfigError("QA-pair retrieval needs the QA collection");
  std::string key;
  if (cache_) {
    key = content_hash(response, "kd:" + std::to_string(options_.kd_pairs));
    if (auto ids = cache_->find("pairs", key)) {
      std::vector<QAPair> out;
      for (const auto& id : *ids) out.push_back(collection_->at(id));
      return out;
    }
  }
  auto pairs = retrieve_qa_pairs(response, *index_, *collection_, options_.kd_pairs, options_.bm25);
  if (cache_) {
    Tokens ids;
    for (const auto& p : pairs) ids.push_back(p.id);
    cache_->put("pairs", key, std::move(ids));
  }
  return pairs;
}

}  // namespace dmnrank
