#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "../oracles/ranking_oracles.hpp"
#include "../oracles/scalar_nn.hpp"
#include "../support/fixtures.hpp"
#include "../support/grad_checks.hpp"
#include "doctest.h"
#include "dmnrank/error.hpp"
#include "dmnrank/model.hpp"
#include "dmnrank/retrieval.hpp"

using namespace dmnrank;
using nn::Interaction;
using nn::Tensor;

namespace {

const std::vector<Channel> kM1{Channel::m1};
const std::vector<Channel> kM12{Channel::m1, Channel::m2};
const std::vector<Channel> kM123{Channel::m1, Channel::m2, Channel::m3};

EncodedText text(std::vector<TokenId> ids, std::size_t max_len) {
  EncodedText t{std::vector<TokenId>(max_len, kPadId), ids.size()};
  std::copy(ids.begin(), ids.end(), t.ids.begin());
  return t;
}

double oracle_score(const PreparedExample& ex, std::size_t k, const ModelParams& p, const ModelConfig& cfg) {
  const auto& c = ex.candidates[k];
  return oracle::model_score(fixtures::ids_of(ex.context), {c.response.ids.begin(), c.response.ids.end()},
                             fixtures::m3_of(c), p, cfg);
}

}  // namespace

TEST_CASE("variant and channel parsing") {
  CHECK(parse_variant("DMN-PRF") == Variant::dmn_prf);
  CHECK(parse_variant("dmn_kd") == Variant::dmn_kd);
  CHECK(parse_variant("dmn") == Variant::dmn);
  CHECK_THROWS_AS(parse_variant("smn"), ConfigError);
  CHECK(parse_channels("M2,m1") == kM12);
  CHECK(parse_channels("m1+m2+m3") == kM123);
  CHECK(channels_string(kM123) == "M1,M2,M3");
  CHECK_THROWS_AS(parse_channels("m4"), ConfigError);
  CHECK_THROWS_AS(parse_channels("m1,m1"), ConfigError);
}

TEST_CASE("model config invariants") {
  auto cfg = fixtures::tiny_config();
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.channels = kM123;
  bad.conv.in_channels = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.variant = Variant::dmn_kd;
  CHECK_NOTHROW(bad.validate());
  bad.channels = kM12;
  bad.conv.in_channels = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto prf = cfg;
  prf.variant = Variant::dmn_prf;
  CHECK_NOTHROW(prf.validate());
  auto empty = cfg;
  empty.channels.clear();
  CHECK_THROWS_AS(empty.validate(), ConfigError);
  auto big = cfg;
  big.conv.kernel_rows = 5;
  CHECK_THROWS_AS(big.validate(), ConfigError);
  auto drop = cfg;
  drop.dropout = 1.0;
  CHECK_THROWS_AS(drop.validate(), ConfigError);
}

TEST_CASE("model settings round trip") {
  auto cfg = fixtures::tiny_config(kM123, Interaction::bilinear);
  cfg.projection_dim = 5;
  cfg.truncation = Truncation::tail;
  cfg.include_current_turn = false;
  ModelConfig back;
  for (const auto& [k, v] : cfg.to_settings()) CHECK(back.apply_setting(k, v));
  CHECK(back.to_settings() == cfg.to_settings());
  CHECK(back.conv.in_channels == 3);
  CHECK_FALSE(back.apply_setting("nonsense", "1"));
  CHECK_THROWS_AS(back.apply_setting("embed_dim", "abc"), ConfigError);
  CHECK(back.apply_setting("channels", "m1"));
  CHECK(back.conv.in_channels == 1);
}

TEST_CASE("parameter registry lists each tensor once") {
  for (auto interaction : {Interaction::dot, Interaction::bilinear}) {
    auto cfg = fixtures::tiny_config(kM123, interaction);
    cfg.projection_dim = 4;
    auto p = ModelParams::zeros(cfg);
    std::set<std::string> names;
    std::set<const Tensor*> tensors;
    std::size_t total = 0;
    for (const auto& e : p.registry()) {
      CHECK(names.insert(e.name).second);
      CHECK(tensors.insert(e.tensor).second);
      CHECK_FALSE(e.tensor->empty());
      total += e.tensor->size();
    }
    CHECK(names.count("embedding") == 1);
    CHECK(names.count("conv0.weight") == 1);
    CHECK((names.count("bilinear_word") == 1) == (interaction == Interaction::bilinear));
    CHECK(p.conv[0].weight.shape() == nn::Shape{2, 3, 3, 3});
    CHECK(p.embedding.shape() == nn::Shape{12, 3});
    CHECK(p.mlp.w1.shape() == nn::Shape{3, cfg.mlp_input_dim()});
    CHECK(total > 0);
  }
  auto only_m3 = fixtures::tiny_config({Channel::m3});
  auto p = ModelParams::zeros(only_m3);
  CHECK(p.embedding.empty());
  for (const auto& e : p.registry()) CHECK(e.name.rfind("encoder", 0) != 0);
}

TEST_CASE("initialization is seeded and bounded") {
  auto cfg = fixtures::tiny_config(kM12, Interaction::bilinear);
  auto a = ModelParams::initialize(cfg, 4), b = ModelParams::initialize(cfg, 4), c = ModelParams::initialize(cfg, 5);
  CHECK(a.embedding == b.embedding);
  CHECK_FALSE(a.embedding == c.embedding);
  for (double v : a.embedding.values()) CHECK(std::abs(v) <= 0.1);
  for (double v : a.mlp.b1.values()) CHECK(v == 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.bilinear_word(i, j) == (i == j ? 1.0 : 0.0));
  CHECK(a.conv[0].weight.squared_norm() > 0.0);
}

TEST_CASE("self-similarity stack is symmetric with positive diagonal") {
  auto cfg = fixtures::tiny_config(kM12);
  auto p = fixtures::random_params(cfg, 21);
  auto u = text({3, 5, 7}, 4);
  auto st = build_stack(u, u, p, cfg);
  REQUIRE(st.channels.shape() == nn::Shape{2, 4, 4});
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(st.channels(ch, i, j) == doctest::Approx(st.channels(ch, j, i)).epsilon(1e-14));
        if (i == j && i < 3) CHECK(st.channels(ch, i, i) > 0.0);
        if (i >= 3 || j >= 3) CHECK(st.channels(ch, i, j) == 0.0);
      }
}

TEST_CASE("stack rows follow the response and columns the utterance") {
  auto cfg = fixtures::tiny_config(kM1);
  auto p = fixtures::random_params(cfg, 22);
  auto u = text({2, 3}, 4), r = text({4, 5, 6}, 4);
  auto st = build_stack(u, r, p, cfg);
  CHECK(st.channels.dim(0) == 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 3; ++k) dot += p.embedding(r.ids[i], k) * p.embedding(u.ids[j], k);
      CHECK(st.channels(0, i, j) == doctest::Approx(dot).epsilon(1e-14));
    }
  CHECK(st.channels(0, 3, 0) == 0.0);
  CHECK(st.channels(0, 0, 2) == 0.0);
}

TEST_CASE("all-PAD utterance gives an all-zero stack") {
  auto cfg = fixtures::tiny_config(kM123);
  auto p = fixtures::random_params(cfg, 23);
  auto empty = text({}, 4), r = text({4, 5}, 4);
  Tensor m3({4, 4});
  auto st = build_stack(empty, r, p, cfg, &m3);
  CHECK(st.channels.shape() == nn::Shape{3, 4, 4});
  for (double v : st.channels.values()) CHECK(v == 0.0);
}

TEST_CASE("M3 channel checks its input") {
  auto cfg = fixtures::tiny_config(kM123);
  auto p = fixtures::random_params(cfg, 24);
  auto u = text({2}, 4), r = text({3}, 4);
  CHECK_THROWS_AS(build_stack(u, r, p, cfg), ShapeError);
  Tensor wrong({3, 4});
  CHECK_THROWS_AS(build_stack(u, r, p, cfg, &wrong), ShapeError);
  Tensor m3({4, 4});
  m3(0, 0) = 2.5;
  CHECK(build_stack(u, r, p, cfg, &m3).channels(2, 0, 0) == 2.5);
}

TEST_CASE("score is deterministic and inside the unit interval") {
  auto cfg = fixtures::tiny_config();
  auto p = fixtures::random_params(cfg, 25);
  std::mt19937_64 rng(25);
  auto ex = fixtures::random_example(cfg, rng, 3);
  for (const auto& c : ex.candidates) {
    const double a = score(ex.context, c, p, cfg), b = score(ex.context, c, p, cfg);
    CHECK(a == b);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
  }
}

TEST_CASE("zero conv and MLP parameters collapse the score to one half") {
  auto cfg = fixtures::tiny_config(kM123);
  auto p = fixtures::random_params(cfg, 26);
  for (auto& c : p.conv) c.weight.zero(), c.bias.zero();
  p.mlp.w1.zero(), p.mlp.b1.zero(), p.mlp.w2.zero(), p.mlp.b2.zero();
  std::mt19937_64 rng(26);
  for (int i = 0; i < 5; ++i) {
    auto ex = fixtures::random_example(cfg, rng, 2, i % 2 == 0);
    for (const auto& c : ex.candidates) CHECK(score(ex.context, c, p, cfg) == 0.5);
  }
}

TEST_CASE("score matches the end-to-end oracle") {
  struct Case {
    std::vector<Channel> channels;
    Interaction interaction;
    nn::ConvPadding padding;
    std::size_t projection;
  };
  const std::vector<Case> cases{
      {kM12, Interaction::dot, nn::ConvPadding::valid, 0},
      {kM12, Interaction::cosine, nn::ConvPadding::valid, 0},
      {kM12, Interaction::bilinear, nn::ConvPadding::valid, 0},
      {kM123, Interaction::dot, nn::ConvPadding::same, 0},
      {{Channel::m2, Channel::m3}, Interaction::bilinear, nn::ConvPadding::valid, 3},
      {{Channel::m3}, Interaction::dot, nn::ConvPadding::valid, 0},
  };
  std::uint64_t seed = 27;
  for (const auto& tc : cases) {
    auto cfg = fixtures::tiny_config(tc.channels, tc.interaction);
    cfg.conv.padding = tc.padding;
    cfg.projection_dim = tc.projection;
    REQUIRE_NOTHROW(cfg.validate());
    auto p = fixtures::random_params(cfg, seed);
    std::mt19937_64 rng(seed++);
    for (int trial = 0; trial < 4; ++trial) {
      auto ex = fixtures::random_example(cfg, rng, 2, trial % 2 == 1);
      for (std::size_t k = 0; k < ex.candidates.size(); ++k)
        CHECK(std::abs(score(ex.context, ex.candidates[k], p, cfg) - oracle_score(ex, k, p, cfg)) < 1e-12);
    }
  }
}

TEST_CASE("stacked conv blocks match the oracle") {
  auto cfg = fixtures::tiny_config();
  cfg.max_utterance_len = cfg.max_response_len = 8;
  cfg.conv.kernel_rows = cfg.conv.kernel_cols = 2;
  cfg.conv.pool_rows = cfg.conv.pool_cols = 2;
  cfg.conv_blocks = 2;
  REQUIRE_NOTHROW(cfg.validate());
  CHECK(cfg.block_shapes().back() == std::pair<std::size_t, std::size_t>{2, 2});
  auto p = fixtures::random_params(cfg, 28);
  std::mt19937_64 rng(28);
  auto ex = fixtures::random_example(cfg, rng, 2);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(std::abs(score(ex.context, ex.candidates[k], p, cfg) - oracle_score(ex, k, p, cfg)) < 1e-12);
}

TEST_CASE("dropout only acts in training mode") {
  auto cfg = fixtures::tiny_config();
  cfg.dropout = 0.5;
  auto p = fixtures::random_params(cfg, 29);
  std::mt19937_64 rng(29);
  auto ex = fixtures::random_example(cfg, rng, 1);
  auto nodrop = cfg;
  nodrop.dropout = 0.0;
  CHECK(score(ex.context, ex.candidates[0], p, cfg) == score(ex.context, ex.candidates[0], p, nodrop));
  CHECK_THROWS(score(ex.context, ex.candidates[0], p, cfg, {true, nullptr}));
  std::mt19937_64 a(1), b(1);
  CHECK(score(ex.context, ex.candidates[0], p, cfg, {true, &a}) ==
        score(ex.context, ex.candidates[0], p, cfg, {true, &b}));
}

TEST_CASE("score gradient agrees with finite differences") {
  const std::vector<std::pair<std::vector<Channel>, Interaction>> configs{
      {kM12, Interaction::dot}, {kM123, Interaction::cosine}, {kM12, Interaction::bilinear}};
  for (const auto& [channels, mode] : configs) {
    auto cfg = fixtures::tiny_config(channels, mode);
    for (std::uint64_t seed = 0; seed < 2; ++seed) CHECK(gradcheck::model(cfg, seed) < 1e-3);
  }
  auto proj = fixtures::tiny_config();
  proj.projection_dim = 3;
  CHECK(gradcheck::model(proj, 7) < 1e-3);
}

TEST_CASE("rank orders by score with index tie-breaking") {
  CHECK(rank_order(std::vector<double>{0.2, 0.9, 0.2, 0.5}) == std::vector<std::size_t>{1, 3, 0, 2});
  CHECK(rank_order(std::vector<double>{0.4}) == std::vector<std::size_t>{0});

  auto cfg = fixtures::tiny_config();
  auto p = fixtures::random_params(cfg, 30);
  std::mt19937_64 rng(30);
  auto ex = fixtures::random_example(cfg, rng, 1);
  auto single = rank(ex, p, cfg);
  REQUIRE(single.size() == 1);
  CHECK(single[0].candidate == 0);

  ex.candidates.push_back(ex.candidates[0]);
  ex.candidates[1].label = 0;
  auto tie = rank(ex, p, cfg);
  CHECK(tie[0].score == tie[1].score);
  CHECK(tie[0].candidate == 0);
  CHECK(tie[1].candidate == 1);
}

TEST_CASE("rank agrees with every pairwise comparison") {
  auto cfg = fixtures::tiny_config();
  auto p = fixtures::random_params(cfg, 31);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto ex = fixtures::random_example(cfg, rng, 6);
    auto order = rank(ex, p, cfg);
    std::vector<std::size_t> pos(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i].candidate] = i;
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b) {
        if (a == b) continue;
        const double sa = score(ex.context, ex.candidates[a], p, cfg);
        const double sb = score(ex.context, ex.candidates[b], p, cfg);
        if (sa > sb || (sa == sb && a < b)) CHECK(pos[a] < pos[b]);
      }
  }
}

TEST_CASE("rank order is invariant to increasing transforms") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-3, 3);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(7);
    for (auto& v : s) v = trial % 2 ? u(rng) : coarse(rng);
    auto base = rank_order(s);
    for (auto f : {+[](double x) { return std::exp(x); }, +[](double x) { return x * x * x + 2 * x; },
                   +[](double x) { return std::atan(x) - 7.0; }}) {
      std::vector<double> t(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) t[i] = f(s[i]);
      CHECK(rank_order(t) == base);
    }
  }
}

TEST_CASE("zero M3 reduces DMN-KD to DMN") {
  auto kd = fixtures::tiny_config(kM123);
  auto dmn = fixtures::tiny_config(kM12);
  auto pk = fixtures::random_params(kd, 33);
  auto pd = ModelParams::zeros(dmn);
  auto src = pk.registry();
  auto dst = pd.registry();
  for (auto& d : dst) {
    auto it = std::find_if(src.begin(), src.end(), [&](const auto& s) { return s.name == d.name; });
    REQUIRE(it != src.end());
    if (d.name == "conv0.weight") {
      const auto& w = *it->tensor;
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t i = 0; i < 9; ++i) (*d.tensor)[(k * 2 + c) * 9 + i] = w[(k * 3 + c) * 9 + i];
    } else {
      *d.tensor = *it->tensor;
    }
  }
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    auto ex = fixtures::random_example(kd, rng, 2, trial % 3 == 0);
    for (auto& c : ex.candidates)
      for (auto& m : c.m3) m.zero();
    for (const auto& c : ex.candidates)
      CHECK(std::abs(score(ex.context, c, pk, kd) - score(ex.context, c, pd, dmn)) < 1e-12);
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto cfg = fixtures::tiny_config(kM123, Interaction::bilinear);
  cfg.projection_dim = 2;
  std::vector<Tokens> streams{{"alpha", "beta", "beta"}};
  Checkpoint ck{cfg, Vocabulary::build(streams, 1), fixtures::random_params(cfg, 34)};
  ck.params.embedding(2, 1) = 1.0 / 3.0;
  ck.params.mlp.b2[0] = -0.0;
  ck.params.mlp.b2[1] = 1e-310;
  std::stringstream ss;
  save_checkpoint(ss, ck);
  auto back = load_checkpoint(ss);
  CHECK(back.config.to_settings() == cfg.to_settings());
  CHECK(back.vocab == ck.vocab);
  auto a = ck.params.registry();
  auto b = back.params.registry();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(*a[i].tensor == *b[i].tensor);
  }
  CHECK(std::signbit(back.params.mlp.b2[0]));

  std::stringstream again;
  save_checkpoint(again, back);
  std::stringstream first;
  save_checkpoint(first, ck);
  CHECK(again.str() == first.str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  auto cfg = fixtures::tiny_config();
  Checkpoint ck{cfg, Vocabulary(), fixtures::random_params(cfg, 35)};
  std::stringstream ss;
  save_checkpoint(ss, ck);
  const auto good = ss.str();
  {
    std::istringstream in("not a checkpoint\n");
    CHECK_THROWS_AS(load_checkpoint(in), ParseError);
  }
  {
    std::istringstream in(good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(in), DataError);
  }
  {
    auto bad = good;
    auto pos = bad.find("mlp.w1 2 3 ");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 11, "mlp.w1 2 4 ");
    std::istringstream in(bad);
    CHECK_THROWS_AS(load_checkpoint(in), DataError);
  }
  CHECK_THROWS_AS(load_checkpoint(std::filesystem::path("/nonexistent/ckpt")), DataError);
}

TEST_CASE("prepare_example windows and pads the context") {
  auto cfg = fixtures::tiny_config();
  cfg.context_len = 3;
  std::vector<Tokens> streams{{"a", "b", "c", "d", "e", "x", "y"}};
  auto vocab = Vocabulary::build(streams, 1);
  DialogExample ex{"d1", {{"a"}, {"b", "c"}}, {{{"x", "zzz"}, 1}, {{"y"}, 0}}};
  auto prep = prepare_example(ex, vocab, cfg);
  REQUIRE(prep.context.size() == 3);
  CHECK(prep.context[0].true_len == 0);
  CHECK(prep.context[1].ids[0] == vocab.id("a"));
  CHECK(prep.context[2].true_len == 2);
  CHECK(prep.candidates[0].response.ids[1] == kUnkId);
  CHECK(prep.candidates[0].label == 1);
  CHECK(prep.candidates[1].label == 0);
  CHECK(prep.candidates[0].m3.empty());

  DialogExample longer{"d2", {{"a"}, {"b"}, {"c"}, {"d"}, {"e"}}, {{{"x"}, 1}}};
  auto w = prepare_example(longer, vocab, cfg);
  CHECK(w.context[0].ids[0] == vocab.id("c"));
  CHECK(w.context[2].ids[0] == vocab.id("e"));
  cfg.include_current_turn = false;
  auto prior = prepare_example(longer, vocab, cfg);
  CHECK(prior.context[0].ids[0] == vocab.id("b"));
  CHECK(prior.context[2].ids[0] == vocab.id("d"));

  cfg.include_current_turn = true;
  cfg.truncation = Truncation::tail;
  DialogExample wordy{"d3", {{"a", "b", "c", "d", "e"}}, {{{"x"}, 1}}};
  auto t = prepare_example(wordy, vocab, cfg);
  CHECK(t.context[2].ids[0] == vocab.id("b"));
}

TEST_CASE("prepare_example applies knowledge per variant") {
  std::vector<QAPair> pairs{{"q1", {"how", "excel"}, {"excel", "settings", "settings", "menu"}},
                            {"q2", {"outlook", "mail"}, {"outlook", "mail", "server"}}};
  auto index = build_index(pairs, IndexField::answer);
  QaCollection collection(pairs);
  KnowledgeOptions opts;
  opts.prf_docs = 1;
  opts.expansion_terms = 10;
  KnowledgeBase kb(index, &collection, opts);
  std::vector<Tokens> streams{{"excel", "settings", "menu", "how", "outlook", "mail", "server", "open"}};
  auto vocab = Vocabulary::build(streams, 1);
  DialogExample ex{"d", {{"how", "open", "oov"}}, {{{"excel"}, 1}, {{"nothing"}, 0}}};

  auto prf = fixtures::tiny_config();
  prf.variant = Variant::dmn_prf;
  prf.context_len = 1;
  CHECK_THROWS_AS(prepare_example(ex, vocab, prf), ConfigError);
  auto p = prepare_example(ex, vocab, prf, &kb);
  auto decoded = decode(p.candidates[0].response, vocab);
  REQUIRE(decoded.size() == 4);
  CHECK(decoded[0] == "excel");
  CHECK(decoded[1] == "settings");
  CHECK(p.candidates[1].response.true_len == 1);

  std::vector<QAPair> kd_pairs{{"k1", {"how", "open"}, {"excel"}},
                                {"k2", {"outlook"}, {"excel", "server", "server", "server"}},
                                {"k3", {"how"}, {"mail"}}};
  auto kd_index = build_index(kd_pairs, IndexField::answer);
  QaCollection kd_collection(kd_pairs);
  KnowledgeBase kd_kb(kd_index, &kd_collection, KnowledgeOptions{});
  auto kd = fixtures::tiny_config(kM123);
  kd.context_len = 1;
  auto k = prepare_example(ex, vocab, kd, &kd_kb);
  REQUIRE(k.candidates[0].m3.size() == 1);
  const auto& m3 = k.candidates[0].m3[0];
  CHECK(m3.shape() == nn::Shape{4, 4});
  const std::vector<std::pair<oracle::Doc, oracle::Doc>> retrieved{
      {{"how", "open"}, {"excel"}}, {{"outlook"}, {"excel", "server", "server", "server"}}};
  CHECK(m3(0, 0) == doctest::Approx(oracle::ppmi_entry("excel", "how", retrieved)).epsilon(1e-12));
  CHECK(m3(0, 0) == doctest::Approx(std::log(1.25)).epsilon(1e-12));
  CHECK(m3(0, 1) == doctest::Approx(oracle::ppmi_entry("excel", "open", retrieved)).epsilon(1e-12));
  CHECK(m3(0, 2) == 0.0);
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(m3(i, j) == 0.0);
  for (double v : k.candidates[1].m3[0].values()) CHECK(v == 0.0);
}

TEST_CASE("embedding files replace matching rows") {
  std::vector<Tokens> streams{{"cat", "dog"}};
  auto vocab = Vocabulary::build(streams, 1);
  Tensor emb({vocab.size(), 3}, 0.5);
  auto path = std::filesystem::temp_directory_path() / "dmnrank_embed_test.txt";
  {
    std::ofstream out(path);
    out << "3 3\ncat 1 2 3\nbird 4 5 6\ndog -1 -2 -3\n";
  }
  CHECK(load_embeddings(path, vocab, emb) == 2);
  CHECK(emb(vocab.id("cat"), 2) == 3.0);
  CHECK(emb(vocab.id("dog"), 0) == -1.0);
  CHECK(emb(kPadId, 0) == 0.5);
  {
    std::ofstream out(path);
    out << "cat 1 2\n";
  }
  CHECK_THROWS_AS(load_embeddings(path, vocab, emb), ParseError);
  std::filesystem::remove(path);
}
