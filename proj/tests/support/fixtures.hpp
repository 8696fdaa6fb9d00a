#pragma once
// Shared builders for unit and acceptance tests.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "dmnrank/corpus.hpp"
#include "dmnrank/model.hpp"

namespace fixtures {

inline void fill_uniform(dmnrank::nn::Tensor& t, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
}

/// c=2, l_u=l_r=4, d=3, O=2, two 3x3 kernels.
inline dmnrank::ModelConfig tiny_config(std::vector<dmnrank::Channel> channels = {dmnrank::Channel::m1,
                                                                                  dmnrank::Channel::m2},
                                        dmnrank::nn::Interaction interaction = dmnrank::nn::Interaction::dot) {
  dmnrank::ModelConfig cfg;
  cfg.channels = std::move(channels);
  cfg.variant = std::find(cfg.channels.begin(), cfg.channels.end(), dmnrank::Channel::m3) != cfg.channels.end()
                    ? dmnrank::Variant::dmn_kd
                    : dmnrank::Variant::dmn;
  cfg.interaction = interaction;
  cfg.context_len = 2;
  cfg.max_utterance_len = 4;
  cfg.max_response_len = 4;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 2;
  cfg.conv.kernels = 2;
  cfg.conv.in_channels = cfg.channels.size();
  cfg.mlp_hidden = 3;
  cfg.dropout = 0.0;
  cfg.vocab_size = 12;
  return cfg;
}

/// Every tensor uniform in [-scale, scale], bilinear matrices included.
inline dmnrank::ModelParams random_params(const dmnrank::ModelConfig& cfg, std::uint64_t seed, double scale = 0.8) {
  auto p = dmnrank::ModelParams::zeros(cfg);
  std::mt19937_64 rng(seed);
  for (auto& e : p.registry()) fill_uniform(*e.tensor, rng, -scale, scale);
  return p;
}

inline dmnrank::EncodedText random_text(std::size_t max_len, std::size_t vocab, std::size_t len,
                                        std::mt19937_64& rng) {
  dmnrank::EncodedText t{std::vector<dmnrank::TokenId>(max_len, dmnrank::kPadId), len};
  std::uniform_int_distribution<int> id(1, static_cast<int>(vocab) - 1);
  for (std::size_t i = 0; i < len; ++i) t.ids[i] = id(rng);
  return t;
}

/// Random context and candidates; slot 0 is left all-PAD when `pad_first_slot`.
inline dmnrank::PreparedExample random_example(const dmnrank::ModelConfig& cfg, std::mt19937_64& rng,
                                               std::size_t candidates = 2, bool pad_first_slot = false) {
  dmnrank::PreparedExample ex;
  ex.dialog_id = "ex";
  std::uniform_int_distribution<std::size_t> ulen(1, cfg.max_utterance_len), rlen(1, cfg.max_response_len);
  for (std::size_t s = 0; s < cfg.context_len; ++s) {
    const std::size_t len = (pad_first_slot && s == 0) ? 0 : ulen(rng);
    ex.context.push_back(random_text(cfg.max_utterance_len, cfg.vocab_size, len, rng));
  }
  std::uniform_real_distribution<double> m3v(0.0, 2.0);
  for (std::size_t k = 0; k < candidates; ++k) {
    dmnrank::EncodedCandidate c;
    c.label = k == 0 ? 1 : 0;
    c.response = random_text(cfg.max_response_len, cfg.vocab_size, rlen(rng), rng);
    if (cfg.has(dmnrank::Channel::m3)) {
      for (std::size_t s = 0; s < cfg.context_len; ++s) {
        dmnrank::nn::Tensor m({cfg.max_response_len, cfg.max_utterance_len});
        for (std::size_t i = 0; i < c.response.true_len; ++i)
          for (std::size_t j = 0; j < ex.context[s].true_len; ++j) m(i, j) = m3v(rng) > 1.0 ? m3v(rng) : 0.0;
        c.m3.push_back(std::move(m));
      }
    }
    ex.candidates.push_back(std::move(c));
  }
  return ex;
}

inline std::vector<std::vector<int>> ids_of(const std::vector<dmnrank::EncodedText>& context) {
  std::vector<std::vector<int>> out;
  for (const auto& t : context) out.emplace_back(t.ids.begin(), t.ids.end());
  return out;
}

inline std::vector<std::vector<std::vector<double>>> m3_of(const dmnrank::EncodedCandidate& c) {
  std::vector<std::vector<std::vector<double>>> out;
  for (const auto& m : c.m3) {
    std::vector<std::vector<double>> rows(m.dim(0), std::vector<double>(m.dim(1)));
    for (std::size_t i = 0; i < m.dim(0); ++i)
      for (std::size_t j = 0; j < m.dim(1); ++j) rows[i][j] = m(i, j);
    out.push_back(rows);
  }
  return out;
}

inline std::string word(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

inline dmnrank::Tokens draw(const char* prefix, std::size_t pool, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  dmnrank::Tokens t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(word(prefix, pick(rng)));
  return t;
}

inline void insert_at_random(dmnrank::Tokens& t, const std::string& w, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pos(0, t.size());
  t.insert(t.begin() + static_cast<std::ptrdiff_t>(pos(rng)), w);
}

/// Contexts and responses drawn from disjoint filler vocabularies. Each
/// context carries one cue word; the positive repeats it, each negative
/// carries a different cue that is absent from the context.
inline std::vector<dmnrank::DialogExample> lexical_cue_dataset(std::size_t n, std::uint64_t seed,
                                                               std::size_t turns = 3, std::size_t cues = 40,
                                                               std::size_t negatives = 9) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> cue_pick(0, cues - 1);
  std::vector<dmnrank::DialogExample> out;
  for (std::size_t e = 0; e < n; ++e) {
    dmnrank::DialogExample ex;
    ex.dialog_id = std::to_string(e);
    const auto cue = cue_pick(rng);
    for (std::size_t t = 0; t < turns; ++t) ex.context.push_back(draw("ctx", 30, 5, rng));
    insert_at_random(ex.context[std::uniform_int_distribution<std::size_t>(0, turns - 1)(rng)], word("cue", cue), rng);
    auto positive = draw("rsp", 30, 4, rng);
    insert_at_random(positive, word("cue", cue), rng);
    ex.candidates.push_back({positive, 1});
    for (std::size_t k = 0; k < negatives; ++k) {
      auto other = cue_pick(rng);
      while (other == cue) other = cue_pick(rng);
      auto neg = draw("rsp", 30, 4, rng);
      insert_at_random(neg, word("cue", other), rng);
      ex.candidates.push_back({neg, 0});
    }
    std::shuffle(ex.candidates.begin(), ex.candidates.end(), rng);
    out.push_back(std::move(ex));
  }
  return out;
}

/// A dialog set whose positives only connect to the context through an
/// external collection: topic i appears in the context, the positive carries
/// hook i instead, and the collection holds answers where hook i co-occurs
/// with topic i. Examples use topics [first, first + count).
struct KnowledgeWorld {
  std::size_t topics = 40;
  std::vector<dmnrank::QAPair> collection;

  explicit KnowledgeWorld(std::size_t topics_, std::uint64_t seed) : topics(topics_) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < topics; ++i)
      for (std::size_t d = 0; d < 2; ++d) {
        dmnrank::QAPair p;
        p.id = "qa" + std::to_string(i) + "_" + std::to_string(d);
        p.question = draw("kq", 20, 3, rng);
        p.question.push_back(word("topic", i));
        p.answer = {word("hook", i), word("topic", i), word("topic", i)};
        auto extra = draw("kb", 20, 2, rng);
        p.answer.insert(p.answer.end(), extra.begin(), extra.end());
        collection.push_back(std::move(p));
      }
  }

  std::vector<dmnrank::DialogExample> dialogs(std::size_t first, std::size_t count, std::size_t n,
                                              std::uint64_t seed, std::size_t turns = 2,
                                              std::size_t negatives = 9) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(first, first + count - 1);
    std::vector<dmnrank::DialogExample> out;
    for (std::size_t e = 0; e < n; ++e) {
      dmnrank::DialogExample ex;
      ex.dialog_id = std::to_string(e);
      const auto topic = pick(rng);
      for (std::size_t t = 0; t < turns; ++t) ex.context.push_back(draw("ctx", 30, 4, rng));
      insert_at_random(ex.context.back(), word("topic", topic), rng);
      auto positive = draw("rsp", 30, 3, rng);
      insert_at_random(positive, word("hook", topic), rng);
      ex.candidates.push_back({positive, 1});
      for (std::size_t k = 0; k < negatives; ++k) {
        auto other = pick(rng);
        while (other == topic) other = pick(rng);
        auto neg = draw("rsp", 30, 3, rng);
        insert_at_random(neg, word("hook", other), rng);
        ex.candidates.push_back({neg, 0});
      }
      std::shuffle(ex.candidates.begin(), ex.candidates.end(), rng);
      out.push_back(std::move(ex));
    }
    return out;
  }
};

}  // namespace fixtures
