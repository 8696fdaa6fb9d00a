#include "dmnrank/run_config.hpp"

#include <cctype>
#include <fstream>

#include "dmnrank/error.hpp"
#include "dmnrank/settings.hpp"

namespace dmnrank {

namespace {

constexpr std::string_view kAsciiPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void require_input(const std::filesystem::path& p, std::string_view key) {
  if (p.empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
  if (!std::filesystem::is_regular_file(p))
    throw ConfigError(std::string(key) + ": input file not found: " + p.string());
}

void require_output(const std::filesystem::path& p, std::string_view key) {
  if (p.empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
  auto parent = p.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw ConfigError(std::string(key) + ": output directory does not exist: " + parent.string());
}

void optional_input(const std::filesystem::path& p, std::string_view key) {
  if (!p.empty()) require_input(p, key);
}

}  // namespace

Command parse_command(std::string_view name) {
  if (name == "index") return Command::index;
  if (name == "build-data") return Command::build_data;
  if (name == "train") return Command::train;
  if (name == "eval") return Command::eval;
  if (name == "rank") return Command::rank;
  if (name == "expand") return Command::expand;
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::index: return "index";
    case Command::build_data: return "build-data";
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::rank: return "rank";
    case Command::expand: return "expand";
  }
  return "";
}

Ranker parse_ranker(std::string_view name) {
  if (name == "model") return Ranker::model;
  if (name == "bm25") return Ranker::bm25;
  if (name == "bm25-prf" || name == "bm25_prf") return Ranker::bm25_prf;
  throw ConfigError("unknown ranker '" + std::string(name) + "' (expected model|bm25|bm25-prf)");
}

std::string_view to_string(Ranker ranker) {
  switch (ranker) {
    case Ranker::model: return "model";
    case Ranker::bm25: return "bm25";
    case Ranker::bm25_prf: return "bm25-prf";
  }
  return "";
}

void RunConfig::apply(std::string_view key, std::string_view value) {
  using namespace settings;
  key = trim(key);
  value = trim(value);
  if (model.apply_setting(key, value) || train.apply_setting(key, value)) return;
  const std::map<std::string_view, std::filesystem::path*> paths{
      {"train_data", &train_data}, {"valid_data", &valid_data}, {"test_data", &test_data},
      {"dialogs", &dialogs},       {"qa", &qa},                 {"index", &index},
      {"checkpoint", &checkpoint}, {"cache", &cache},           {"embeddings", &embeddings},
      {"ranking", &ranking},       {"output", &output},         {"log", &log},
      {"stopwords", &stopwords}};
  if (auto it = paths.find(key); it != paths.end()) {
    *it->second = std::filesystem::path(std::string(value));
  } else if (key == "lowercase") {
    lowercase = to_bool(key, value);
  } else if (key == "strip_punctuation") {
    strip_punctuation = to_bool(key, value);
  } else if (key == "punctuation") {
    punctuation = std::string(value);
  } else if (key == "min_count") {
    min_count = to_size(key, value);
  } else if (key == "prf_docs") {
    knowledge.prf_docs = to_size(key, value);
  } else if (key == "expansion_terms") {
    knowledge.expansion_terms = to_size(key, value);
  } else if (key == "kd_pairs") {
    knowledge.kd_pairs = to_size(key, value);
  } else if (key == "ppmi_counting") {
    knowledge.counting = parse_ppmi_counting(value);
  } else if (key == "bm25_k1") {
    knowledge.bm25.k1 = to_double(key, value);
  } else if (key == "bm25_b") {
    knowledge.bm25.b = to_double(key, value);
  } else if (key == "index_field") {
    index_field = parse_index_field(value);
  } else if (key == "n_neg") {
    candidates.n_neg = to_size(key, value);
  } else if (key == "sample_depth") {
    candidates.depth = to_size(key, value);
  } else if (key == "sampler") {
    candidates.sampler = parse_sampler(value);
  } else if (key == "ranker") {
    ranker = parse_ranker(value);
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    try {
      apply(l.substr(0, eq), l.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

IndexField RunConfig::effective_index_field() const {
  if (index_field) return *index_field;
  return model.variant == Variant::dmn_prf ? IndexField::answer : IndexField::concatenated;
}

Tokenizer RunConfig::make_tokenizer() const {
  Tokenizer::Options opts;
  opts.lowercase = lowercase;
  opts.strip_punctuation = strip_punctuation;
  opts.punctuation = punctuation.empty() ? std::string(kAsciiPunctuation) : punctuation;
  if (!stopwords.empty()) opts.stopwords = load_stopwords(stopwords);
  return Tokenizer(std::move(opts));
}

std::map<std::string, std::string> RunConfig::to_settings() const {
  using settings::format_double;
  auto s = model.to_settings();
  s.merge(train.to_settings());
  s["lowercase"] = lowercase ? "true" : "false";
  s["strip_punctuation"] = strip_punctuation ? "true" : "false";
  s["min_count"] = std::to_string(min_count);
  s["prf_docs"] = std::to_string(knowledge.prf_docs);
  s["expansion_terms"] = std::to_string(knowledge.expansion_terms);
  s["kd_pairs"] = std::to_string(knowledge.kd_pairs);
  s["ppmi_counting"] = std::string(to_string(knowledge.counting));
  s["bm25_k1"] = format_double(knowledge.bm25.k1);
  s["bm25_b"] = format_double(knowledge.bm25.b);
  s["index_field"] = std::string(to_string(effective_index_field()));
  s["n_neg"] = std::to_string(candidates.n_neg);
  s["sample_depth"] = std::to_string(candidates.depth);
  s["sampler"] = candidates.sampler == NegativeSampler::bm25 ? "bm25" : "uniform";
  s["ranker"] = std::string(to_string(ranker));
  return s;
}

void RunConfig::validate(Command command) const {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (knowledge.prf_docs < 1) throw ConfigError("prf_docs must be >= 1");
  if (knowledge.kd_pairs < 1) throw ConfigError("kd_pairs must be >= 1");
  if (!(knowledge.bm25.k1 >= 0.0)) throw ConfigError("bm25_k1 must be >= 0");
  if (!(knowledge.bm25.b >= 0.0 && knowledge.bm25.b <= 1.0)) throw ConfigError("bm25_b must be in [0, 1]");
  train.validate();
  optional_input(stopwords, "stopwords");
  // The cache is read when present and created otherwise.
  if (!cache.empty()) require_output(cache, "cache");

  auto needs_knowledge = [&](Variant v) {
    if (v == Variant::dmn) return;
    if (index.empty() && qa.empty())
      throw ConfigError(std::string(to_string(v)) + " needs an external collection: set 'index' or 'qa'");
    optional_input(index, "index");
    if (v == Variant::dmn_kd) require_input(qa, "qa");
    else optional_input(qa, "qa");
  };

  switch (command) {
    case Command::index:
      require_input(qa, "qa");
      require_output(index, "index");
      break;
    case Command::build_data:
      require_input(dialogs, "dialogs");
      require_output(output, "output");
      if (candidates.sampler == NegativeSampler::bm25 && candidates.depth < 1)
        throw ConfigError("sample_depth must be >= 1");
      break;
    case Command::train: {
      auto probe = model;
      probe.vocab_size = std::max<std::size_t>(probe.vocab_size, 2);
      probe.validate();
      require_input(train_data, "train_data");
      optional_input(valid_data, "valid_data");
      optional_input(embeddings, "embeddings");
      needs_knowledge(model.variant);
      require_output(checkpoint, "checkpoint");
      if (!log.empty()) require_output(log, "log");
      break;
    }
    case Command::eval:
      if (!ranking.empty()) {
        require_input(ranking, "ranking");
        optional_input(test_data, "test_data");
        break;
      }
      require_input(test_data, "test_data");
      if (ranker == Ranker::model) {
        require_input(checkpoint, "checkpoint");
      } else if (ranker == Ranker::bm25_prf) {
        needs_knowledge(Variant::dmn_prf);
      }
      if (!output.empty()) require_output(output, "output");
      break;
    case Command::rank:
      require_input(test_data, "test_data");
      require_input(checkpoint, "checkpoint");
      require_output(output, "output");
      break;
    case Command::expand:
      require_input(test_data, "test_data");
      needs_knowledge(Variant::dmn_prf);
      require_output(output, "output");
      break;
  }
}

}  // namespace dmnrank
