#include "dmnrank/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "dmnrank/error.hpp"
#include "dmnrank/random.hpp"
#include "dmnrank/settings.hpp"

namespace dmnrank {

namespace {

std::string join(const Tokens& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<DialogExample> load_examples(const std::filesystem::path& path, const Tokenizer& tokenizer) {
  // Windowing to the model's context length happens in prepare_example, so
  // the loader keeps whole contexts.
  return load_dataset(path, tokenizer, LoadOptions{std::numeric_limits<std::size_t>::max()});
}

std::vector<std::string> group_ids(std::span<const DialogExample> examples) {
  std::vector<std::string> ids;
  for (const auto& e : examples) ids.push_back(e.dialog_id);
  return ids;
}

std::unique_ptr<KnowledgeContext> knowledge_for(const RunConfig& cfg, const Tokenizer& tokenizer, Variant variant) {
  if (variant == Variant::dmn) return nullptr;
  RunConfig probe = cfg;
  probe.model.variant = variant;
  if (cfg.index.empty() && cfg.qa.empty())
    throw ConfigError(std::string(to_string(variant)) + " needs an external collection: set 'index' or 'qa'");
  if (variant == Variant::dmn_kd && cfg.qa.empty()) throw ConfigError("DMN-KD needs the QA collection: set 'qa'");
  return std::make_unique<KnowledgeContext>(cfg, tokenizer, probe.effective_index_field());
}

}  // namespace

KnowledgeContext::KnowledgeContext(const RunConfig& cfg, const Tokenizer& tokenizer, IndexField field)
    : cache_path_(cfg.cache) {
  std::vector<QAPair> pairs;
  if (!cfg.qa.empty()) pairs = load_qa_pairs(cfg.qa, tokenizer);
  if (!cfg.index.empty()) {
    index_ = InvertedIndex::load(cfg.index);
    if (cfg.index_field && index_.field() != *cfg.index_field)
      throw ConfigError("index " + cfg.index.string() + " covers field '" + std::string(to_string(index_.field())) +
                        "', config asks for '" + std::string(to_string(*cfg.index_field)) + "'");
  } else {
    index_ = build_index(pairs, field);
  }
  if (!pairs.empty()) collection_ = std::make_unique<QaCollection>(std::move(pairs));
  if (!cache_path_.empty()) {
    cache_ = std::make_unique<KnowledgeCache>();
    if (std::filesystem::exists(cache_path_)) cache_->load(cache_path_);
  }
  base_ = std::make_unique<KnowledgeBase>(index_, collection_.get(), cfg.knowledge, cache_.get());
}

void KnowledgeContext::save_cache() const {
  if (cache_) cache_->save(cache_path_);
}

std::vector<PreparedExample> prepare_all(std::span<const DialogExample> examples, const Vocabulary& vocab,
                                         const ModelConfig& cfg, const KnowledgeBase* knowledge) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(prepare_example(e, vocab, cfg, knowledge));
  return out;
}

void cmd_index(const RunConfig& cfg, std::ostream& out) {
  auto tokenizer = cfg.make_tokenizer();
  auto pairs = load_qa_pairs(cfg.qa, tokenizer);
  auto index = build_index(pairs, cfg.effective_index_field());
  index.save(cfg.index);
  out << "indexed " << index.doc_count() << " docs, field " << to_string(index.field()) << ", avg length "
      << settings::format_double(index.avg_doc_len()) << "\n";
}

void cmd_build_data(const RunConfig& cfg, std::ostream& out) {
  auto tokenizer = cfg.make_tokenizer();
  std::ifstream in(cfg.dialogs);
  if (!in) throw DataError("cannot open dialogs " + cfg.dialogs.string());

  struct Dialog {
    std::string context;
    std::string response_raw;
    Tokens response;
  };
  std::vector<Dialog> dialogs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(lineno, "expected context<TAB>response");
    Dialog d{line.substr(0, tab), line.substr(tab + 1), {}};
    d.response = tokenizer(d.response_raw);
    if (d.response.empty()) throw ParseError(lineno, "response is empty after tokenization");
    if (split_context(d.context, tokenizer).empty()) throw ParseError(lineno, "context is empty after tokenization");
    dialogs.push_back(std::move(d));
  }

  // Distinct responses form the negative pool.
  std::vector<Tokens> pool;
  std::map<Tokens, std::size_t> seen;
  for (const auto& d : dialogs)
    if (seen.emplace(d.response, pool.size()).second) pool.push_back(d.response);
  InvertedIndex::Builder builder(IndexField::answer);
  for (std::size_t i = 0; i < pool.size(); ++i) builder.add(std::to_string(i), pool[i]);
  auto pool_index = std::move(builder).finish();

  std::ostringstream buffer;
  for (std::size_t i = 0; i < dialogs.size(); ++i) {
    const auto& d = dialogs[i];
    std::vector<Candidate> cands;
    try {
      cands = build_candidates(d.response, pool_index, pool, cfg.candidates, derive_seed(cfg.train.seed, "negatives", i));
    } catch (const DataError& e) {
      throw DataError("dialog " + std::to_string(i + 1) + ": " + e.what());
    }
    for (const auto& c : cands) buffer << c.label << '\t' << d.context << '\t' << join(c.response) << '\n';
  }
  auto file = open_output(cfg.output);
  file << buffer.str();
  out << "wrote " << dialogs.size() << " dialogs with " << cfg.candidates.n_neg << " negatives each to "
      << cfg.output.string() << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  auto tokenizer = cfg.make_tokenizer();
  auto train_examples = load_examples(cfg.train_data, tokenizer);
  std::vector<DialogExample> valid_examples;
  if (!cfg.valid_data.empty()) valid_examples = load_examples(cfg.valid_data, tokenizer);
  auto knowledge = knowledge_for(cfg, tokenizer, cfg.model.variant);
  const KnowledgeBase* kb = knowledge ? &knowledge->base() : nullptr;

  // Vocabulary from the training side only, including the expansion terms
  // the model will see for DMN-PRF.
  std::vector<Tokens> streams;
  for (const auto& e : train_examples) {
    for (const auto& u : e.context) streams.push_back(u);
    for (const auto& c : e.candidates) {
      streams.push_back(c.response);
      if (cfg.model.variant == Variant::dmn_prf) streams.push_back(kb->expansion(c.response));
    }
  }
  auto vocab = build_vocab(streams, cfg.min_count);
  ModelConfig mcfg = cfg.model;
  mcfg.vocab_size = vocab.size();
  mcfg.validate();

  auto params = ModelParams::initialize(mcfg, cfg.train.seed);
  if (!cfg.embeddings.empty()) {
    if (!mcfg.uses_embeddings()) throw ConfigError("embeddings given but no channel uses word embeddings");
    auto n = load_embeddings(cfg.embeddings, vocab, params.embedding);
    out << "loaded " << n << " pretrained embeddings\n";
  }

  auto train_set = prepare_all(train_examples, vocab, mcfg, kb);
  auto valid_set = prepare_all(valid_examples, vocab, mcfg, kb);
  if (knowledge) knowledge->save_cache();

  std::ofstream log_file;
  if (!cfg.log.empty()) {
    log_file = open_output(cfg.log);
    log_file << EpochLog::tsv_header() << '\n';
  }
  out << EpochLog::tsv_header() << '\n';
  auto result = train(train_set, valid_set, mcfg, std::move(params), cfg.train, [&](const EpochLog& row) {
    out << row.tsv_row() << std::endl;
    if (log_file.is_open()) log_file << row.tsv_row() << std::endl;
  });
  if (result.skipped_examples > 0)
    out << "warning: skipped " << result.skipped_examples << " training examples without both labels\n";
  save_checkpoint(cfg.checkpoint, Checkpoint{mcfg, vocab, result.params});
  out << "saved checkpoint from epoch " << result.best_epoch << " to " << cfg.checkpoint.string() << "\n";
}

namespace {

std::vector<RankedLabels> rankings_from_file(const RunConfig& cfg, const Tokenizer& tokenizer,
                                             std::vector<std::string>* required) {
  std::ifstream in(cfg.ranking);
  if (!in) throw DataError("cannot open ranking file " + cfg.ranking.string());
  std::string first;
  while (std::getline(in, first) && first.empty()) {
  }
  const auto columns = static_cast<std::size_t>(std::count(first.begin(), first.end(), '\t')) + 1;
  in.clear();
  in.seekg(0);
  if (columns == 3) {
    auto rows = read_scored_candidates(in);
    if (!cfg.test_data.empty()) *required = group_ids(load_examples(cfg.test_data, tokenizer));
    return rank_scored_candidates(rows);
  }
  if (columns != 4)
    throw ParseError(1, "ranking file must have 3 (group_id, score, label) or 4 (rank output) columns");
  if (cfg.test_data.empty()) throw ConfigError("a rank-output file needs 'test_data' for the labels");
  auto examples = load_examples(cfg.test_data, tokenizer);
  *required = group_ids(examples);
  std::unordered_map<std::string, const DialogExample*> by_id;
  for (const auto& e : examples) by_id[e.dialog_id] = &e;

  std::vector<ScoredCandidate> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, cand, score_text, rank_text;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, cand, '\t') ||
        !std::getline(fields, score_text, '\t') || !std::getline(fields, rank_text))
      throw ParseError(lineno, "expected dialog_id<TAB>candidate_index<TAB>score<TAB>rank");
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ParseError(lineno, "dialog '" + id + "' is not in the test data");
    std::size_t index = 0;
    double score = 0.0;
    try {
      index = settings::to_size("candidate_index", cand);
      score = settings::to_double("score", score_text);
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
    if (index >= it->second->candidates.size())
      throw ParseError(lineno, "candidate index " + cand + " out of range for dialog '" + id + "'");
    rows.push_back({id, score, it->second->candidates[index].label});
  }
  return rank_scored_candidates(rows);
}

std::vector<std::vector<RankEntry>> model_rankings(const Checkpoint& ckpt, const RunConfig& cfg,
                                                   const Tokenizer& tokenizer,
                                                   const std::vector<DialogExample>& examples) {
  auto knowledge = knowledge_for(cfg, tokenizer, ckpt.config.variant);
  const KnowledgeBase* kb = knowledge ? &knowledge->base() : nullptr;
  std::vector<std::vector<RankEntry>> out;
  for (const auto& e : examples) {
    if (e.candidates.empty()) throw DataError("dialog '" + e.dialog_id + "' has no candidates");
    out.push_back(rank(prepare_example(e, ckpt.vocab, ckpt.config, kb), ckpt.params, ckpt.config));
  }
  if (knowledge) knowledge->save_cache();
  return out;
}

}  // namespace

MetricsReport cmd_eval(const RunConfig& cfg, std::ostream& out) {
  auto tokenizer = cfg.make_tokenizer();
  std::vector<RankedLabels> rankings;
  std::vector<std::string> required;
  if (!cfg.ranking.empty()) {
    rankings = rankings_from_file(cfg, tokenizer, &required);
  } else {
    auto examples = load_examples(cfg.test_data, tokenizer);
    required = group_ids(examples);
    if (cfg.ranker == Ranker::model) {
      auto ckpt = load_checkpoint(cfg.checkpoint);
      auto ranked = model_rankings(ckpt, cfg, tokenizer, examples);
      for (std::size_t i = 0; i < examples.size(); ++i) {
        RankedLabels r{examples[i].dialog_id, {}};
        for (const auto& e : ranked[i]) r.labels.push_back(e.label);
        rankings.push_back(std::move(r));
      }
    } else {
      auto knowledge = cfg.ranker == Ranker::bm25_prf ? knowledge_for(cfg, tokenizer, Variant::dmn_prf) : nullptr;
      ResponseExpander expander;
      if (knowledge) expander = [&](const Tokens& r) { return knowledge->base().expand(r); };
      for (const auto& e : examples) {
        RankedLabels r{e.dialog_id, {}};
        for (const auto& c : bm25_rank_responses(e, expander, cfg.knowledge.bm25))
          r.labels.push_back(e.candidates[c.index].label);
        rankings.push_back(std::move(r));
      }
      if (knowledge) knowledge->save_cache();
    }
  }
  auto report = evaluate(rankings, required);
  out << report.text();
  if (!cfg.output.empty()) {
    auto file = open_output(cfg.output);
    file << MetricsReport::tsv_header() << '\n' << report.tsv_row() << '\n';
  }
  return report;
}

void cmd_rank(const RunConfig& cfg, std::ostream& out) {
  auto tokenizer = cfg.make_tokenizer();
  auto examples = load_examples(cfg.test_data, tokenizer);
  auto ckpt = load_checkpoint(cfg.checkpoint);
  auto ranked = model_rankings(ckpt, cfg, tokenizer, examples);
  auto file = open_output(cfg.output);
  for (std::size_t i = 0; i < examples.size(); ++i)
    for (std::size_t r = 0; r < ranked[i].size(); ++r)
      file << examples[i].dialog_id << '\t' << ranked[i][r].candidate << '\t'
           << settings::format_double(ranked[i][r].score) << '\t' << r + 1 << '\n';
  out << "ranked " << examples.size() << " dialogs to " << cfg.output.string() << "\n";
}

void cmd_expand(const RunConfig& cfg, std::ostream& out) {
  auto tokenizer = cfg.make_tokenizer();
  auto examples = load_examples(cfg.test_data, tokenizer);
  auto knowledge = knowledge_for(cfg, tokenizer, Variant::dmn_prf);
  std::ostringstream buffer;
  std::size_t responses = 0;
  for (const auto& e : examples)
    for (std::size_t k = 0; k < e.candidates.size(); ++k) {
      const auto& r = e.candidates[k].response;
      auto terms = knowledge->base().expansion(r);
      Tokens expanded = r;
      expanded.insert(expanded.end(), terms.begin(), terms.end());
      buffer << e.dialog_id << '\t' << k << '\t' << join(expanded) << '\t' << join(terms) << '\n';
      ++responses;
    }
  knowledge->save_cache();
  auto file = open_output(cfg.output);
  file << buffer.str();
  out << "expanded " << responses << " responses to " << cfg.output.string() << "\n";
}

void run_command(Command command, const RunConfig& cfg, std::ostream& out) {
  cfg.validate(command);
  switch (command) {
    case Command::index: cmd_index(cfg, out); break;
    case Command::build_data: cmd_build_data(cfg, out); break;
    case Command::train: cmd_train(cfg, out); break;
    case Command::eval: cmd_eval(cfg, out); break;
    case Command::rank: cmd_rank(cfg, out); break;
    case Command::expand: cmd_expand(cfg, out); break;
  }
}

}  // namespace dmnrank
