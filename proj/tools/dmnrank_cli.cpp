#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmnrank/error.hpp"
#include "dmnrank/pipeline.hpp"

namespace {

struct Invocation {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Invocation& inv) {
  sub->add_option("-c,--config", inv.config_file, "key=value configuration file");
  sub->add_option("-s,--set", inv.overrides, "override one setting, key=value (repeatable; wins over --config)");
  sub->add_option("settings", inv.overrides, "further key=value overrides");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Response ranking for information-seeking conversations with external knowledge"};
  app.require_subcommand(1);
  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"index", "build a BM25 index over an external QA collection"},
      {"build-data", "sample negative candidates for context/response dialogs"},
      {"train", "train a DMN, DMN-PRF or DMN-KD model"},
      {"eval", "report MAP, MRR and Recall@k for a model, a BM25 baseline or a ranking file"},
      {"rank", "score and rank the candidates of a dataset"},
      {"expand", "write the PRF expansion of every candidate response"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), inv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto command = dmnrank::parse_command(app.get_subcommands().front()->get_name());
    dmnrank::RunConfig cfg;
    if (!inv.config_file.empty()) cfg.load_file(inv.config_file);
    for (const auto& kv : inv.overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw dmnrank::ConfigError("expected key=value, got '" + kv + "'");
      cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    dmnrank::run_command(command, cfg, std::cout);
    return 0;
  } catch (const dmnrank::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dmnrank::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const dmnrank::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
