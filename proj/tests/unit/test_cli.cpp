#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "../support/tsv.hpp"
#include "doctest.h"
#include "dmnrank/error.hpp"
#include "dmnrank/pipeline.hpp"

using namespace dmnrank;

namespace {

const std::vector<QAPair> kQa{
    {"a1", {"how", "do", "i", "open", "excel"}, {"click", "the", "excel", "file", "menu"}},
    {"a2", {"outlook", "mail", "broken"}, {"restart", "outlook", "mail", "server"}},
    {"a3", {"printer", "offline"}, {"check", "printer", "cable", "and", "driver"}},
};

RunConfig tiny_run(const tsv::TempDir& dir) {
  RunConfig cfg;
  for (const auto& kv : std::vector<std::pair<std::string, std::string>>{
           {"min_count", "1"}, {"context_len", "3"}, {"max_utterance_len", "8"}, {"max_response_len", "8"},
           {"embed_dim", "6"}, {"hidden_dim", "3"}, {"conv_kernel", "3,3"}, {"conv_kernels", "2"},
           {"pool_size", "3,3"}, {"mlp_hidden", "4"}, {"dropout", "0"}, {"epochs", "2"}, {"batch_size", "16"},
           {"learning_rate", "0.01"}})
    cfg.apply(kv.first, kv.second);
  cfg.checkpoint = dir / "model.ckpt";
  return cfg;
}

}  // namespace

TEST_CASE("run config files and overrides") {
  tsv::TempDir dir("cfg");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# experiment\nvariant = DMN-PRF\nchannels=M1\n\nexpansion_terms=7\nseed=3\n";
  }
  RunConfig cfg;
  cfg.load_file(dir / "run.cfg");
  CHECK(cfg.model.variant == Variant::dmn_prf);
  CHECK(cfg.model.channels == std::vector<Channel>{Channel::m1});
  CHECK(cfg.knowledge.expansion_terms == 7);
  CHECK(cfg.train.seed == 3);
  CHECK(cfg.effective_index_field() == IndexField::answer);
  cfg.apply("index_field", "question");
  CHECK(cfg.effective_index_field() == IndexField::question);
  cfg.apply("seed", "4");
  CHECK(cfg.train.seed == 4);
  CHECK_THROWS_AS(cfg.apply("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply("epochs", "-1"), ConfigError);
  {
    std::ofstream f(dir / "bad.cfg");
    f << "seed=1\nmystery=2\n";
  }
  try {
    RunConfig other;
    other.load_file(dir / "bad.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.cfg:2") != std::string::npos);
  }
  RunConfig round;
  for (const auto& [k, v] : cfg.to_settings()) round.apply(k, v);
  CHECK(round.to_settings() == cfg.to_settings());
}

TEST_CASE("validation fails before any output is written") {
  tsv::TempDir dir("validate");
  RunConfig cfg;
  cfg.qa = dir / "missing.tsv";
  cfg.index = dir / "out.idx";
  std::ostringstream log;
  try {
    run_command(Command::index, cfg, log);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("missing.tsv") != std::string::npos);
  }
  CHECK_FALSE(std::filesystem::exists(cfg.index));
  tsv::write_qa(dir / "qa.tsv", kQa);
  cfg.qa = dir / "qa.tsv";
  cfg.index = dir / "no_such_dir" / "out.idx";
  CHECK_THROWS_AS(run_command(Command::index, cfg, log), ConfigError);
  RunConfig kd;
  kd.apply("variant", "dmn_kd");
  kd.apply("channels", "m1,m2,m3");
  kd.train_data = dir / "qa.tsv";
  kd.checkpoint = dir / "m.ckpt";
  CHECK_THROWS_AS(run_command(Command::train, kd, log), ConfigError);
  RunConfig bad_model;
  bad_model.apply("channels", "m1,m3");
  bad_model.train_data = dir / "qa.tsv";
  bad_model.checkpoint = dir / "m.ckpt";
  CHECK_THROWS_AS(run_command(Command::train, bad_model, log), ConfigError);
  CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt"));
}

TEST_CASE("index command counts documents and is reproducible") {
  tsv::TempDir dir("index");
  tsv::write_qa(dir / "qa.tsv", kQa);
  RunConfig cfg;
  cfg.qa = dir / "qa.tsv";
  cfg.index = dir / "a.idx";
  std::ostringstream log;
  run_command(Command::index, cfg, log);
  CHECK(log.str().find("indexed 3 docs") != std::string::npos);
  auto idx = InvertedIndex::load(cfg.index);
  CHECK(idx.doc_count() == 3);
  CHECK(idx.field() == IndexField::concatenated);
  cfg.index = dir / "b.idx";
  run_command(Command::index, cfg, log);
  CHECK(tsv::slurp(dir / "a.idx") == tsv::slurp(dir / "b.idx"));
}

TEST_CASE("build-data samples the requested negatives deterministically") {
  tsv::TempDir dir("build");
  {
    std::ofstream f(dir / "dialogs.tsv");
    for (int i = 0; i < 15; ++i)
      f << "question " << i << " __eot__ more words " << i % 4 << "\tanswer " << i << " shared word\n";
  }
  RunConfig cfg;
  cfg.dialogs = dir / "dialogs.tsv";
  cfg.output = dir / "a.tsv";
  cfg.apply("seed", "5");
  std::ostringstream log;
  run_command(Command::build_data, cfg, log);
  auto examples = load_dataset(cfg.output, cfg.make_tokenizer());
  REQUIRE(examples.size() == 15);
  for (const auto& e : examples) {
    CHECK(e.candidates.size() == 10);
    CHECK(e.positives() == 1);
    CHECK(e.candidates[0].label == 1);
  }
  cfg.output = dir / "b.tsv";
  run_command(Command::build_data, cfg, log);
  CHECK(tsv::slurp(dir / "a.tsv") == tsv::slurp(dir / "b.tsv"));
  cfg.apply("sampler", "uniform");
  cfg.output = dir / "u.tsv";
  run_command(Command::build_data, cfg, log);
  CHECK(load_dataset(cfg.output, cfg.make_tokenizer()).size() == 15);
  cfg.apply("n_neg", "0");
  cfg.output = dir / "c.tsv";
  run_command(Command::build_data, cfg, log);
  auto pos_only = load_dataset(cfg.output, cfg.make_tokenizer());
  for (const auto& e : pos_only) CHECK(e.candidates.size() == 1);
  cfg.apply("n_neg", "20");
  cfg.output = dir / "d.tsv";
  CHECK_THROWS_AS(run_command(Command::build_data, cfg, log), DataError);
}

TEST_CASE("eval of an oracle ranking file is perfect") {
  tsv::TempDir dir("eval");
  {
    std::ofstream f(dir / "ranking.tsv");
    for (int g = 0; g < 5; ++g)
      for (int k = 0; k < 4; ++k) f << "g" << g << '\t' << (k == 2 ? 1.0 : 0.1 * k) << '\t' << (k == 2) << '\n';
  }
  RunConfig cfg;
  cfg.ranking = dir / "ranking.tsv";
  cfg.output = dir / "report.tsv";
  std::ostringstream log;
  run_command(Command::eval, cfg, log);
  auto report = cmd_eval(cfg, log);
  CHECK(report.map == 1.0);
  CHECK(report.recall_1 == 1.0);
  CHECK(tsv::slurp(cfg.output).rfind(MetricsReport::tsv_header(), 0) == 0);
}

TEST_CASE("train, rank and eval compose") {
  tsv::TempDir dir("pipeline");
  tsv::write_dataset(dir / "train.tsv", fixtures::lexical_cue_dataset(30, 1, 3, 10));
  tsv::write_dataset(dir / "test.tsv", fixtures::lexical_cue_dataset(8, 2, 3, 10));
  auto cfg = tiny_run(dir);
  cfg.train_data = dir / "train.tsv";
  cfg.valid_data = dir / "test.tsv";
  cfg.log = dir / "train.log";
  std::ostringstream log;
  run_command(Command::train, cfg, log);
  CHECK(std::filesystem::exists(cfg.checkpoint));
  auto lines = tsv::slurp(cfg.log);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 3);

  cfg.test_data = dir / "test.tsv";
  cfg.output = dir / "rank.tsv";
  run_command(Command::rank, cfg, log);
  auto ranked = tsv::slurp(cfg.output);
  CHECK(std::count(ranked.begin(), ranked.end(), '\n') == 80);

  RunConfig from_file = cfg;
  from_file.ranking = dir / "rank.tsv";
  from_file.output.clear();
  auto via_file = cmd_eval(from_file, log);
  RunConfig direct = cfg;
  direct.output.clear();
  auto end_to_end = cmd_eval(direct, log);
  CHECK(via_file.map == end_to_end.map);
  CHECK(via_file.recall_1 == end_to_end.recall_1);
  CHECK(via_file.groups == 8);

  RunConfig again = cfg;
  again.checkpoint = dir / "again.ckpt";
  again.log = dir / "again.log";
  run_command(Command::train, again, log);
  CHECK(tsv::slurp(cfg.checkpoint) == tsv::slurp(again.checkpoint));
}

TEST_CASE("knowledge variants and baselines run from files") {
  tsv::TempDir dir("knowledge");
  fixtures::KnowledgeWorld world(6, 3);
  tsv::write_qa(dir / "qa.tsv", world.collection);
  tsv::write_dataset(dir / "train.tsv", world.dialogs(0, 6, 12, 4, 2, 3));
  tsv::write_dataset(dir / "test.tsv", world.dialogs(0, 6, 6, 5, 2, 3));
  std::ostringstream log;

  for (const char* variant : {"dmn_prf", "dmn_kd"}) {
    auto cfg = tiny_run(dir);
    cfg.apply("variant", variant);
    if (std::string(variant) == "dmn_kd") cfg.apply("channels", "m1,m2,m3");
    cfg.apply("epochs", "1");
    cfg.qa = dir / "qa.tsv";
    cfg.cache = dir / (std::string(variant) + ".cache");
    cfg.train_data = dir / "train.tsv";
    run_command(Command::train, cfg, log);
    CHECK(std::filesystem::exists(cfg.cache));
    cfg.test_data = dir / "test.tsv";
    auto report = cmd_eval(cfg, log);
    CHECK(report.groups == 6);
  }

  RunConfig base;
  base.apply("min_count", "1");
  base.test_data = dir / "test.tsv";
  base.apply("ranker", "bm25");
  CHECK(cmd_eval(base, log).groups == 6);
  base.apply("ranker", "bm25_prf");
  base.qa = dir / "qa.tsv";
  CHECK(cmd_eval(base, log).groups == 6);

  RunConfig ex;
  ex.qa = dir / "qa.tsv";
  ex.test_data = dir / "test.tsv";
  ex.output = dir / "expand.tsv";
  ex.apply("expansion_terms", "10");
  ex.apply("prf_docs", "10");
  run_command(Command::expand, ex, log);
  std::istringstream rows(tsv::slurp(ex.output));
  std::string line;
  std::size_t n = 0;
  while (std::getline(rows, line)) {
    ++n;
    auto last_tab = line.rfind('\t');
    std::istringstream terms(line.substr(last_tab + 1));
    std::string w;
    std::size_t count = 0;
    while (terms >> w) ++count;
    CHECK(count <= 10);
  }
  CHECK(n == 6 * 4);
}

#ifdef DMNRANK_CLI_PATH
TEST_CASE("command-line exit codes") {
  tsv::TempDir dir("exit");
  const std::string cli = DMNRANK_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " >" + (dir / "out.txt").string() + " 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  tsv::write_qa(dir / "qa.tsv", kQa);
  CHECK(run("index qa=" + (dir / "qa.tsv").string() + " index=" + (dir / "x.idx").string()) == 0);
  CHECK(tsv::slurp(dir / "out.txt").find("indexed 3 docs") != std::string::npos);
  CHECK(run("index qa=" + (dir / "nope.tsv").string() + " index=" + (dir / "x.idx").string()) == 1);
  CHECK(tsv::slurp(dir / "out.txt").find("nope.tsv") != std::string::npos);
  CHECK(run("index --set bogus=1") == 1);
  CHECK(run("frobnicate") == 1);
  {
    std::ofstream f(dir / "broken.tsv");
    f << "only\ttwo\n";
  }
  CHECK(run("index -s qa=" + (dir / "broken.tsv").string() + " -s index=" + (dir / "y.idx").string()) == 2);
  CHECK(tsv::slurp(dir / "out.txt").find("line 1") != std::string::npos);
  {
    std::ofstream f(dir / "run.cfg");
    f << "qa=" << (dir / "qa.tsv").string() << "\nindex=" << (dir / "z.idx").string() << "\n";
  }
  CHECK(run("index -c " + (dir / "run.cfg").string()) == 0);
}
#endif
