#include "dmnrank/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dmnrank/error.hpp"

namespace dmnrank {

namespace {
constexpr std::string_view kIndexMagic = "dmnrank-index";
constexpr int kIndexVersion = 1;
}  // namespace

IndexField parse_index_field(std::string_view name) {
  if (name == "question") return IndexField::question;
  if (name == "answer") return IndexField::answer;
  if (name == "concatenated") return IndexField::concatenated;
  throw ConfigError("unknown index field '" + std::string(name) +
                    "' (expected question|answer|concatenated)");
}

std::string_view to_string(IndexField field) {
  switch (field) {
    case IndexField::question: return "question";
    case IndexField::answer: return "answer";
    case IndexField::concatenated: return "concatenated";
  }
  return "concatenated";
}

double bm25_idf(std::size_t doc_count, std::size_t doc_freq) {
  auto n = static_cast<double>(doc_count);
  auto df = static_cast<double>(doc_freq);
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double bm25_tf_weight(double tf, double doc_len, double avg_doc_len, const Bm25Params& params) {
  double norm = avg_doc_len > 0.0 ? doc_len / avg_doc_len : 0.0;
  return (tf * (params.k1 + 1.0)) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

InvertedIndex::Builder::Builder(IndexField field) : field_(field) {}

void InvertedIndex::Builder::add(std::string doc_id, const Tokens& tokens) {
  if (lookup_.contains(doc_id)) throw DataError("duplicate document id '" + doc_id + "'");
  auto doc = static_cast<std::uint32_t>(doc_ids_.size());
  lookup_.emplace(doc_id, doc);
  doc_ids_.push_back(std::move(doc_id));

  std::vector<TermCount> bag;
  std::unordered_map<std::uint32_t, std::size_t> slot;
  for (const auto& tok : tokens) {
    auto [it, inserted] = term_ids_.try_emplace(tok, static_cast<std::uint32_t>(terms_.size()));
    if (inserted) terms_.push_back(tok);
    auto [s, fresh] = slot.try_emplace(it->second, bag.size());
    if (fresh)
      bag.push_back({it->second, 1});
    else
      ++bag[s->second].tf;
  }
  forward_.push_back(std::move(bag));
}

InvertedIndex InvertedIndex::Builder::finish() && {
  InvertedIndex index;
  index.field_ = field_;
  index.doc_ids_ = std::move(doc_ids_);
  index.terms_ = std::move(terms_);
  index.forward_ = std::move(forward_);
  index.finalize();
  return index;
}

void InvertedIndex::finalize() {
  doc_lookup_.clear();
  term_ids_.clear();
  for (std::uint32_t d = 0; d < doc_ids_.size(); ++d) doc_lookup_.emplace(doc_ids_[d], d);
  for (std::uint32_t t = 0; t < terms_.size(); ++t) term_ids_.emplace(terms_[t], t);

  postings_.assign(terms_.size(), {});
  doc_lengths_.assign(doc_ids_.size(), 0);
  double total = 0.0;
  for (std::uint32_t d = 0; d < forward_.size(); ++d) {
    std::uint32_t len = 0;
    for (auto [term, tf] : forward_[d]) {
      postings_[term].push_back({d, tf});
      len += tf;
    }
    doc_lengths_[d] = len;
    total += len;
  }
  avg_doc_len_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
}

std::uint32_t InvertedIndex::doc_index(std::string_view doc_id) const {
  auto it = doc_lookup_.find(std::string(doc_id));
  if (it == doc_lookup_.end()) throw DataError("unknown document id '" + std::string(doc_id) + "'");
  return it->second;
}

bool InvertedIndex::has_doc(std::string_view doc_id) const {
  return doc_lookup_.contains(std::string(doc_id));
}

std::span<const InvertedIndex::Posting> InvertedIndex::postings(std::string_view term) const {
  auto it = term_ids_.find(std::string(term));
  if (it == term_ids_.end()) return {};
  return postings_[it->second];
}

double InvertedIndex::term_contribution(std::uint32_t term, std::uint32_t tf, std::uint32_t doc,
                                        const Bm25Params& params) const {
  return bm25_idf(doc_count(), postings_[term].size()) *
         bm25_tf_weight(tf, doc_lengths_[doc], avg_doc_len_, params);
}

double InvertedIndex::bm25_score(const Tokens& query, std::string_view doc_id, const Bm25Params& params) const {
  return bm25_score(query, doc_index(doc_id), params);
}

double InvertedIndex::bm25_score(const Tokens& query, std::uint32_t doc, const Bm25Params& params) const {
  if (doc >= doc_count()) throw DataError("document index out of range");
  double score = 0.0;
  for (const auto& tok : query) {
    auto it = term_ids_.find(tok);
    if (it == term_ids_.end()) continue;
    const auto& plist = postings_[it->second];
    auto p = std::lower_bound(plist.begin(), plist.end(), doc,
                              [](const Posting& a, std::uint32_t d) { return a.doc < d; });
    if (p == plist.end() || p->doc != doc) continue;
    score += term_contribution(it->second, p->tf, doc, params);
  }
  return score;
}

std::vector<SearchHit> InvertedIndex::search(const Tokens& query, std::size_t k, const Bm25Params& params) const {
  if (k < 1) throw ConfigError("search depth k must be >= 1");
  std::vector<double> acc(doc_count(), 0.0);
  std::vector<char> touched(doc_count(), 0);
  std::vector<std::uint32_t> docs;
  for (const auto& tok : query) {
    auto it = term_ids_.find(tok);
    if (it == term_ids_.end()) continue;
    for (const auto& p : postings_[it->second]) {
      acc[p.doc] += term_contribution(it->second, p.tf, p.doc, params);
      if (!touched[p.doc]) {
        touched[p.doc] = 1;
        docs.push_back(p.doc);
      }
    }
  }
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (acc[a] != acc[b]) return acc[a] > acc[b];
    return doc_ids_[a] < doc_ids_[b];
  };
  auto n = std::min(k, docs.size());
  std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n), docs.end(), better);
  std::vector<SearchHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) hits.push_back({doc_ids_[docs[i]], acc[docs[i]], docs[i]});
  return hits;
}

void InvertedIndex::save(std::ostream& out) const {
  out << kIndexMagic << ' ' << kIndexVersion << '\n';
  out << "field " << to_string(field_) << '\n';
  out << "docs " << doc_ids_.size() << '\n';
  for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
    out << doc_ids_[d];
    for (auto [term, tf] : forward_[d]) out << '\t' << term << ':' << tf;
    out << '\n';
  }
  out << "terms " << terms_.size() << '\n';
  for (const auto& t : terms_) out << t << '\n';
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write index " + path.string());
  save(out);
  if (!out) throw DataError("failed writing index " + path.string());
}

InvertedIndex InvertedIndex::load(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, "unexpected end of index file");
    ++lineno;
    return line;
  };
  auto header = [&](std::string_view key) -> std::string {
    auto& l = next();
    if (l.rfind(key, 0) != 0 || l.size() <= key.size() || l[key.size()] != ' ')
      throw ParseError(lineno, "expected '" + std::string(key) + "'");
    return l.substr(key.size() + 1);
  };
  auto count = [&](const std::string& s) {
    try {
      return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad count '" + s + "'");
    }
  };

  if (header(kIndexMagic) != std::to_string(kIndexVersion))
    throw ParseError(lineno, "unsupported index version");
  InvertedIndex index;
  index.field_ = parse_index_field(header("field"));
  auto ndocs = count(header("docs"));
  index.doc_ids_.reserve(ndocs);
  index.forward_.reserve(ndocs);
  for (std::size_t d = 0; d < ndocs; ++d) {
    std::istringstream row(next());
    std::string field;
    std::getline(row, field, '\t');
    index.doc_ids_.push_back(field);
    std::vector<TermCount> bag;
    while (std::getline(row, field, '\t')) {
      auto colon = field.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected term:tf");
      bag.push_back({static_cast<std::uint32_t>(count(field.substr(0, colon))),
                     static_cast<std::uint32_t>(count(field.substr(colon + 1)))});
    }
    index.forward_.push_back(std::move(bag));
  }
  auto nterms = count(header("terms"));
  index.terms_.reserve(nterms);
  for (std::size_t t = 0; t < nterms; ++t) index.terms_.push_back(next());
  for (const auto& bag : index.forward_)
    for (auto [term, tf] : bag)
      if (term >= nterms) throw DataError("index term id out of range");
  index.finalize();
  if (index.doc_lookup_.size() != index.doc_ids_.size()) throw DataError("duplicate document id in index");
  return index;
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  return load(in);
}

Tokens document_tokens(const QAPair& pair, IndexField field) {
  switch (field) {
    case IndexField::question: return pair.question;
    case IndexField::answer: return pair.answer;
    case IndexField::concatenated: {
      Tokens all = pair.question;
      all.insert(all.end(), pair.answer.begin(), pair.answer.end());
      return all;
    }
  }
  return {};
}

InvertedIndex build_index(std::span<const QAPair> pairs, IndexField field) {
  InvertedIndex::Builder builder(field);
  for (const auto& p : pairs) builder.add(p.id, document_tokens(p, field));
  return std::move(builder).finish();
}

std::vector<RankedCandidate> bm25_rank_responses(const DialogExample& example, const ResponseExpander& expander,
                                                 const Bm25Params& params) {
  Tokens query;
  for (const auto& utt : example.context) query.insert(query.end(), utt.begin(), utt.end());

  InvertedIndex::Builder builder;
  for (std::size_t i = 0; i < example.candidates.size(); ++i) {
    const auto& resp = example.candidates[i].response;
    builder.add(std::to_string(i), expander ? expander(resp) : resp);
  }
  auto micro = std::move(builder).finish();

  std::vector<RankedCandidate> ranked;
  ranked.reserve(example.candidates.size());
  for (std::uint32_t i = 0; i < example.candidates.size(); ++i)
    ranked.push_back({i, micro.bm25_score(query, i, params)});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.score > b.score; });
  return ranked;
}

}  // namespace dmnrank
