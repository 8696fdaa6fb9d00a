#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmnrank/eval.hpp"
#include "dmnrank/model.hpp"

namespace dmnrank {

struct TrainConfig {
  double margin = 1.0;  // epsilon
  double l2 = 0.0;      // lambda
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 50;
  std::size_t epochs = 10;
  std::size_t patience = 5;  // epochs without a better validation MAP; 0 disables early stopping
  std::uint64_t seed = 1;

  void validate() const;
  std::map<std::string, std::string> to_settings() const;
  bool apply_setting(std::string_view key, std::string_view value);
};

struct Triple {
  std::size_t example = 0;
  std::size_t positive = 0;  // candidate index
  std::size_t negative = 0;
};

struct TripleSet {
  std::vector<Triple> triples;
  std::size_t skipped = 0;  // examples lacking a positive or a negative
};

/// Positives x negatives of every example, in example then candidate order.
TripleSet make_triples(std::span<const PreparedExample> examples);
TripleSet make_triples(std::span<const DialogExample> examples);

/// max(0, margin - f_pos + f_neg).
double hinge_loss(double f_pos, double f_neg, double margin);
/// The hinge term plus l2 * ||params||^2.
double hinge_loss(double f_pos, double f_neg, double margin, double l2, const ModelParams& params);

struct ParamRef {
  std::string name;
  nn::Tensor* value;
  const nn::Tensor* grad;
};

struct AdamState {
  std::vector<nn::Tensor> m, v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update. State moments are allocated on the first
/// call. Throws NumericError naming the parameter on a non-finite gradient,
/// before anything is modified.
void adam_step(std::span<const ParamRef> params, AdamState& state, const TrainConfig& cfg);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg);

/// Mean hinge loss over `batch` plus l2 * ||params||^2. When `grads` is given
/// the gradient of that value is accumulated into it.
double batch_loss(std::span<const Triple> batch, std::span<const PreparedExample> examples,
                  const ModelParams& params, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  ModelParams* grads = nullptr, std::mt19937_64* dropout_rng = nullptr);

/// Ranks every example and evaluates the rankings.
MetricsReport evaluate_model(std::span<const PreparedExample> examples, const ModelParams& params,
                             const ModelConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_map = 0.0;
  double valid_recall_1 = 0.0;
  double seconds = 0.0;

  /// `epoch<TAB>train_loss<TAB>valid_map<TAB>valid_r@1<TAB>seconds`
  std::string tsv_row() const;
  static std::string tsv_header();
};

struct TrainResult {
  ModelParams params;  // best validation MAP, or the final params without a validation set
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_map = 0.0;
  std::size_t skipped_examples = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(std::span<const PreparedExample> train_set, std::span<const PreparedExample> valid_set,
                  const ModelConfig& model_cfg, ModelParams initial, const TrainConfig& train_cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace dmnrank
