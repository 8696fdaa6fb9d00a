#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "dmnrank/eval.hpp"
#include "dmnrank/run_config.hpp"

namespace dmnrank {

/// External collection, index and cache for one run. The cache file, when
/// configured, is written back by save_cache().
class KnowledgeContext {
 public:
  KnowledgeContext(const RunConfig& cfg, const Tokenizer& tokenizer, IndexField field);

  const KnowledgeBase& base() const { return *base_; }
  void save_cache() const;

 private:
  std::filesystem::path cache_path_;
  InvertedIndex index_;
  std::unique_ptr<QaCollection> collection_;
  std::unique_ptr<KnowledgeCache> cache_;
  std::unique_ptr<KnowledgeBase> base_;
};

std::vector<PreparedExample> prepare_all(std::span<const DialogExample> examples, const Vocabulary& vocab,
                                         const ModelConfig& cfg, const KnowledgeBase* knowledge);

/// Builds the external-collection index and writes it to `cfg.index`.
void cmd_index(const RunConfig& cfg, std::ostream& out);
/// Turns `context<TAB>response` dialogs into a labelled dataset with sampled negatives.
void cmd_build_data(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
MetricsReport cmd_eval(const RunConfig& cfg, std::ostream& out);
/// Writes `dialog_id<TAB>candidate_index<TAB>score<TAB>rank` rows.
void cmd_rank(const RunConfig& cfg, std::ostream& out);
/// Writes `dialog_id<TAB>candidate_index<TAB>expanded_response<TAB>appended_terms` rows.
void cmd_expand(const RunConfig& cfg, std::ostream& out);

/// Validates and dispatches.
void run_command(Command command, const RunConfig& cfg, std::ostream& out);

}  // namespace dmnrank
