#include "dmnrank/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <random>

#include "dmnrank/error.hpp"
#include "dmnrank/retrieval.hpp"

namespace dmnrank {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::size_t DialogExample::positives() const {
  return static_cast<std::size_t>(
      std::count_if(candidates.begin(), candidates.end(), [](const Candidate& c) { return c.label == 1; }));
}

std::vector<Tokens> split_context(std::string_view context, const Tokenizer& tokenizer) {
  std::vector<Tokens> turns;
  std::size_t start = 0;
  while (true) {
    auto pos = context.find(kTurnDelimiter, start);
    auto toks = tokenizer(context.substr(start, pos - start));
    if (!toks.empty()) turns.push_back(std::move(toks));
    if (pos == std::string_view::npos) break;
    start = pos + kTurnDelimiter.size();
  }
  return turns;
}

DatasetLine parse_dataset_line(std::string_view line, const Tokenizer& tokenizer, std::size_t line_number) {
  auto fields = split_tabs(strip_cr(line));
  if (fields.size() != 3)
    throw ParseError(line_number, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
  DatasetLine out;
  if (fields[0] == "1")
    out.label = 1;
  else if (fields[0] == "0")
    out.label = 0;
  else
    throw ParseError(line_number, "label must be 0 or 1, got '" + std::string(fields[0]) + "'");
  out.context_raw = std::string(fields[1]);
  out.context = split_context(fields[1], tokenizer);
  out.response = tokenizer(fields[2]);
  return out;
}

std::vector<Tokens> window_context(const std::vector<Tokens>& utterances, std::size_t c) {
  if (c < 1) throw ConfigError("context window must be >= 1");
  auto keep = std::min(utterances.size(), c);
  return {utterances.end() - static_cast<std::ptrdiff_t>(keep), utterances.end()};
}

void validate(const DialogExample& example, std::size_t max_context) {
  auto where = [&] { return "dialog '" + example.dialog_id + "': "; };
  if (example.context.empty()) throw DataError(where() + "empty context");
  if (example.context.size() > max_context) throw DataError(where() + "context longer than window");
  if (example.candidates.empty()) throw DataError(where() + "no candidates");
  for (const auto& c : example.candidates)
    if (c.label != 0 && c.label != 1) throw DataError(where() + "non-binary label");
}

std::vector<DialogExample> load_dataset(std::istream& in, const Tokenizer& tokenizer, const LoadOptions& options) {
  std::vector<DialogExample> out;
  std::string line;
  std::string current_key;
  std::size_t lineno = 0;
  std::size_t group_start = 0;
  auto finish = [&] {
    if (out.empty()) return;
    try {
      validate(out.back(), options.max_context);
    } catch (const DataError& e) {
      throw ParseError(group_start, e.what());
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (strip_cr(line).empty()) continue;
    auto parsed = parse_dataset_line(line, tokenizer, lineno);
    if (out.empty() || parsed.context_raw != current_key) {
      finish();
      current_key = parsed.context_raw;
      group_start = lineno;
      DialogExample ex;
      ex.dialog_id = std::to_string(out.size());
      ex.context = window_context(parsed.context, options.max_context);
      out.push_back(std::move(ex));
    }
    out.back().candidates.push_back({std::move(parsed.response), parsed.label});
  }
  finish();
  return out;
}

std::vector<DialogExample> load_dataset(const std::filesystem::path& path, const Tokenizer& tokenizer,
                                        const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return load_dataset(in, tokenizer, options);
}

std::vector<QAPair> load_qa_pairs(std::istream& in, const Tokenizer& tokenizer) {
  std::vector<QAPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto l = strip_cr(line);
    if (l.empty()) continue;
    auto fields = split_tabs(l);
    if (fields.size() != 3)
      throw ParseError(lineno, "expected id<TAB>question<TAB>answer, got " + std::to_string(fields.size()) +
                                   " fields");
    QAPair p{std::string(fields[0]), tokenizer(fields[1]), tokenizer(fields[2])};
    if (p.id.empty()) throw ParseError(lineno, "empty QA pair id");
    if (p.question.empty() || p.answer.empty()) throw ParseError(lineno, "empty question or answer");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<QAPair> load_qa_pairs(const std::filesystem::path& path, const Tokenizer& tokenizer) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open QA collection " + path.string());
  return load_qa_pairs(in, tokenizer);
}

NegativeSampler parse_sampler(std::string_view name) {
  if (name == "uniform") return NegativeSampler::uniform;
  if (name == "bm25") return NegativeSampler::bm25;
  throw ConfigError("unknown sampler '" + std::string(name) + "' (expected uniform|bm25)");
}

std::vector<Candidate> build_candidates(const Tokens& positive, const InvertedIndex& pool_index,
                                        std::span<const Tokens> pool, const CandidateOptions& options,
                                        std::uint64_t seed) {
  if (positive.empty()) throw DataError("positive response is empty");
  if (pool.size() != pool_index.doc_count()) throw DataError("response pool does not match its index");

  std::vector<Candidate> out{{positive, 1}};
  if (options.n_neg == 0) return out;

  std::vector<std::uint32_t> eligible;
  if (options.sampler == NegativeSampler::bm25) {
    auto depth = std::min(options.depth, pool_index.doc_count());
    // One extra slot so that excluding the positive still leaves `depth` results.
    if (depth > 0) {
      for (const auto& hit : pool_index.search(positive, depth + 1)) {
        if (pool[hit.doc] == positive) continue;
        if (eligible.size() < depth) eligible.push_back(hit.doc);
      }
    }
  } else {
    for (std::uint32_t d = 0; d < pool.size(); ++d)
      if (pool[d] != positive) eligible.push_back(d);
  }
  if (eligible.size() < options.n_neg)
    throw DataError("negative sampling shortfall: need " + std::to_string(options.n_neg) + ", only " +
                    std::to_string(eligible.size()) + " retrievable");

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < options.n_neg; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
    out.push_back({pool[eligible[i]], 0});
  }
  return out;
}

}  // namespace dmnrank
