#include <cmath>
#include <filesystem>
#include <random>

#include "../oracles/ranking_oracles.hpp"
#include "doctest.h"
#include "dmnrank/error.hpp"
#include "dmnrank/knowledge.hpp"

using namespace dmnrank;

TEST_CASE("feedback language model is maximum likelihood") {
  std::vector<Tokens> one{{"a", "a", "b"}};
  auto m = feedback_language_model(one);
  CHECK(m.probability("a") == doctest::Approx(2.0 / 3.0));
  CHECK(m.probability("b") == doctest::Approx(1.0 / 3.0));
  CHECK(m.probability("c") == 0.0);
  std::vector<Tokens> two{{"a"}, {"b"}};
  auto n = feedback_language_model(two);
  CHECK(n.probability("a") == 0.5);
  CHECK(n.probability("b") == 0.5);
  std::vector<Tokens> empty{{}};
  CHECK_THROWS_AS(feedback_language_model(empty), DataError);
}

TEST_CASE("feedback probabilities sum to one and are ordered") {
  std::vector<Tokens> docs{{"x", "y", "y", "z"}, {"z", "z", "w"}};
  auto m = feedback_language_model(docs);
  double sum = 0.0;
  for (std::size_t i = 0; i < m.term_probs.size(); ++i) {
    sum += m.term_probs[i].second;
    CHECK(m.term_probs[i].second > 0.0);
    if (i > 0) CHECK(m.term_probs[i - 1].second >= m.term_probs[i].second);
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK(m.top_terms(2) == Tokens{"z", "y"});
}

TEST_CASE("expand_response appends the most probable feedback terms") {
  std::vector<QAPair> pairs{{"1", {"q"}, {"excel", "settings", "settings"}}};
  auto idx = build_index(pairs, IndexField::answer);
  CHECK(expand_response({"excel"}, idx, 10, 1) == Tokens{"excel", "settings"});
  CHECK(expand_response({"excel"}, idx, 10, 0) == Tokens{"excel"});
  CHECK(expand_response({"nothing"}, idx, 10, 5) == Tokens{"nothing"});
}

TEST_CASE("expansion ties break lexicographically and never shorten") {
  std::vector<QAPair> pairs{{"1", {"q"}, {"b", "a", "c", "k"}}, {"2", {"q"}, {"k", "d"}}};
  auto idx = build_index(pairs, IndexField::answer);
  Tokens r{"k", "x"};
  CHECK(expansion_terms(r, idx, 10, 3) == Tokens{"k", "a", "b"});
  for (std::size_t w = 0; w < 8; ++w) {
    auto e = expand_response(r, idx, 10, w);
    CHECK(e.size() == r.size() + std::min<std::size_t>(w, 5));
    CHECK(std::equal(r.begin(), r.end(), e.begin()));
  }
}

TEST_CASE("expansion uses only the top feedback documents") {
  std::vector<QAPair> pairs{{"1", {"q"}, {"k", "k", "alpha"}}, {"2", {"q"}, {"k", "beta", "beta", "beta", "x", "y"}}};
  auto idx = build_index(pairs, IndexField::answer);
  CHECK(expansion_terms({"k"}, idx, 1, 5) == Tokens{"k", "alpha"});
}

TEST_CASE("ppmi_matrix hand evaluation") {
  std::vector<QAPair> pairs{{"1", {"x"}, {"y"}}, {"2", {"z"}, {"w"}}};
  auto m = ppmi_matrix({"y", "w"}, {"x", "z"}, pairs);
  CHECK(m(0, 0) == doctest::Approx(std::log(2.0)));
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 1) == doctest::Approx(std::log(2.0)));
  auto empty = ppmi_matrix({"y"}, {"x"}, std::span<const QAPair>{}, 3, 4);
  CHECK(empty.shape() == nn::Shape{3, 4});
  CHECK(empty.squared_norm() == 0.0);
}

TEST_CASE("ppmi_matrix pads to the requested shape") {
  std::vector<QAPair> pairs{{"1", {"x"}, {"y"}}, {"2", {"z"}, {"w"}}};
  auto m = ppmi_matrix({"y", "w", "y"}, {"x"}, pairs, 2, 3);
  CHECK(m.shape() == nn::Shape{2, 3});
  CHECK(m(0, 0) > 0.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(0, 2) == 0.0);
}

TEST_CASE("ppmi_matrix equals term-by-term evaluation on random corpora") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> word(0, 11), len(1, 5), npairs(0, 12);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<QAPair> pairs;
    std::vector<std::pair<oracle::Doc, oracle::Doc>> raw;
    for (int p = npairs(rng); p > 0; --p) {
      Tokens q, a;
      for (int k = len(rng); k > 0; --k) q.push_back("w" + std::to_string(word(rng)));
      for (int k = len(rng); k > 0; --k) a.push_back("w" + std::to_string(word(rng)));
      pairs.push_back({std::to_string(pairs.size()), q, a});
      raw.emplace_back(q, a);
    }
    Tokens r{"w1", "w2", "w3", "w1"}, u{"w4", "w1", "w7"};
    auto m = ppmi_matrix(r, u, pairs, 5, 4);
    auto expected = oracle::ppmi_matrix(r, u, raw, 5, 4);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(m(i, j) - expected[i][j]) <= 1e-12);
        CHECK(m(i, j) >= 0.0);
        CHECK(std::isfinite(m(i, j)));
      }
  }
}

TEST_CASE("binary counting equals frequency counting on deduplicated pairs") {
  std::vector<QAPair> pairs{{"1", {"x", "x", "z"}, {"y", "y", "y", "w"}}, {"2", {"z", "x"}, {"w", "w"}}};
  std::vector<QAPair> dedup{{"1", {"x", "z"}, {"y", "w"}}, {"2", {"z", "x"}, {"w"}}};
  Tokens r{"y", "w"}, u{"x", "z"};
  auto a = ppmi_matrix(r, u, pairs, PpmiCounting::binary);
  auto b = ppmi_matrix(r, u, dedup, PpmiCounting::frequency);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(b(i, j)).epsilon(1e-14));
  CHECK(parse_ppmi_counting("binary") == PpmiCounting::binary);
  CHECK_THROWS_AS(parse_ppmi_counting("set"), ConfigError);
}

TEST_CASE("retrieve_qa_pairs") {
  std::vector<QAPair> pairs{{"p1", {"mouse"}, {"driver", "update"}}};
  QaCollection coll(pairs);
  auto idx = build_index(pairs, IndexField::concatenated);
  auto got = retrieve_qa_pairs({"mouse"}, idx, coll, 1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == "p1");
  std::vector<QAPair> none;
  auto empty_idx = build_index(none, IndexField::concatenated);
  CHECK(retrieve_qa_pairs({"mouse"}, empty_idx, QaCollection{}, 10).empty());
}

TEST_CASE("knowledge cache round trip and cached lookups") {
  std::vector<QAPair> pairs{{"p1", {"wifi", "drops"}, {"driver", "driver", "reinstall"}},
                            {"p2", {"screen"}, {"resolution", "settings"}}};
  QaCollection coll(pairs);
  auto idx = build_index(pairs, IndexField::concatenated);
  KnowledgeCache cache;
  KnowledgeOptions opts;
  KnowledgeBase kb(idx, &coll, opts, &cache);
  const Tokens r{"driver"};
  auto e1 = kb.expansion(r);
  auto p1 = kb.related_pairs(r);
  CHECK(cache.size() == 2);
  auto path = std::filesystem::temp_directory_path() / "dmnrank_cache_test.tsv";
  cache.save(path);
  KnowledgeCache loaded;
  loaded.load(path);
  std::filesystem::remove(path);
  CHECK(loaded.size() == 2);
  KnowledgeBase kb2(idx, &coll, opts, &loaded);
  CHECK(kb2.expansion(r) == e1);
  auto p2 = kb2.related_pairs(r);
  REQUIRE(p2.size() == p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p2[i].id == p1[i].id);
  CHECK(kb.expand(r).size() == r.size() + e1.size());
  CHECK(content_hash(r) == content_hash(r));
  CHECK(content_hash(r, "a") != content_hash(r, "b"));
}
