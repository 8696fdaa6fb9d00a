#include "dmnrank/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "dmnrank/error.hpp"
#include "dmnrank/random.hpp"
#include "dmnrank/settings.hpp"

namespace dmnrank {

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::map<std::string, std::string> TrainConfig::to_settings() const {
  using settings::format_double;
  return {{"margin", format_double(margin)},
          {"l2", format_double(l2)},
          {"learning_rate", format_double(learning_rate)},
          {"beta1", format_double(beta1)},
          {"beta2", format_double(beta2)},
          {"adam_eps", format_double(adam_eps)},
          {"batch_size", std::to_string(batch_size)},
          {"epochs", std::to_string(epochs)},
          {"patience", std::to_string(patience)},
          {"seed", std::to_string(seed)}};
}

bool TrainConfig::apply_setting(std::string_view key, std::string_view value) {
  using namespace settings;
  if (key == "margin")
    margin = to_double(key, value);
  else if (key == "l2")
    l2 = to_double(key, value);
  else if (key == "learning_rate")
    learning_rate = to_double(key, value);
  else if (key == "beta1")
    beta1 = to_double(key, value);
  else if (key == "beta2")
    beta2 = to_double(key, value);
  else if (key == "adam_eps")
    adam_eps = to_double(key, value);
  else if (key == "batch_size")
    batch_size = to_size(key, value);
  else if (key == "epochs")
    epochs = to_size(key, value);
  else if (key == "patience")
    patience = to_size(key, value);
  else if (key == "seed")
    seed = to_u64(key, value);
  else
    return false;
  return true;
}

namespace {

template <class Labels>
TripleSet triples_from(std::size_t n, Labels&& labels_of) {
  TripleSet out;
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<std::size_t> pos, neg;
    const auto labels = labels_of(e);
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) {
      ++out.skipped;
      continue;
    }
    for (auto p : pos)
      for (auto q : neg) out.triples.push_back({e, p, q});
  }
  return out;
}

}  // namespace

TripleSet make_triples(std::span<const PreparedExample> examples) {
  return triples_from(examples.size(), [&](std::size_t e) {
    std::vector<int> labels;
    for (const auto& c : examples[e].candidates) labels.push_back(c.label);
    return labels;
  });
}

TripleSet make_triples(std::span<const DialogExample> examples) {
  return triples_from(examples.size(), [&](std::size_t e) {
    std::vector<int> labels;
    for (const auto& c : examples[e].candidates) labels.push_back(c.label);
    return labels;
  });
}

double hinge_loss(double f_pos, double f_neg, double margin) { return std::max(0.0, margin - f_pos + f_neg); }

double hinge_loss(double f_pos, double f_neg, double margin, double l2, const ModelParams& params) {
  return hinge_loss(f_pos, f_neg, margin) + l2 * params.squared_norm();
}

void adam_step(std::span<const ParamRef> params, AdamState& state, const TrainConfig& cfg) {
  for (const auto& p : params) {
    if (!p.grad->same_shape(*p.value))
      throw ShapeError("adam_step: gradient of '" + p.name + "' has shape " + nn::shape_string(p.grad->shape()) +
                       ", parameter has " + nn::shape_string(p.value->shape()));
    for (double g : p.grad->values())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(nn::zeros_like(*p.value));
      state.v.push_back(nn::zeros_like(*p.value));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value->values();
    auto g = params[k].grad->values();
    auto m = state.m[k].values();
    auto v = state.v[k].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      theta[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
    }
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
  auto values = params.registry();
  auto gs = grads.registry();
  if (values.size() != gs.size()) throw ShapeError("adam_step: gradient registry does not match parameters");
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < values.size(); ++i) refs.push_back({values[i].name, values[i].tensor, gs[i].tensor});
  adam_step(refs, state, cfg);
}

double batch_loss(std::span<const Triple> batch, std::span<const PreparedExample> examples,
                  const ModelParams& params, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  ModelParams* grads, std::mt19937_64* dropout_rng) {
  if (batch.empty()) throw ConfigError("batch_loss: empty batch");
  ForwardOptions opts{dropout_rng != nullptr, dropout_rng};
  const double inv = 1.0 / static_cast<double>(batch.size());
  double sum = 0.0;
  ScoreTrace pos_trace, neg_trace;
  for (const auto& t : batch) {
    const auto& ex = examples[t.example];
    const double f_pos = score(ex.context, ex.candidates[t.positive], params, model_cfg, opts,
                               grads ? &pos_trace : nullptr);
    const double f_neg = score(ex.context, ex.candidates[t.negative], params, model_cfg, opts,
                               grads ? &neg_trace : nullptr);
    const double loss = hinge_loss(f_pos, f_neg, train_cfg.margin);
    sum += loss;
    if (grads && loss > 0.0) {
      score_backward(pos_trace, -inv, params, model_cfg, *grads);
      score_backward(neg_trace, inv, params, model_cfg, *grads);
    }
  }
  double total = sum * inv;
  if (train_cfg.l2 > 0.0) {
    total += train_cfg.l2 * params.squared_norm();
    if (grads) {
      auto g = grads->registry();
      auto p = params.registry();
      for (std::size_t k = 0; k < p.size(); ++k) {
        auto gv = g[k].tensor->values();
        auto pv = p[k].tensor->values();
        for (std::size_t i = 0; i < pv.size(); ++i) gv[i] += 2.0 * train_cfg.l2 * pv[i];
      }
    }
  }
  return total;
}

MetricsReport evaluate_model(std::span<const PreparedExample> examples, const ModelParams& params,
                             const ModelConfig& cfg) {
  std::vector<RankedLabels> rankings;
  rankings.reserve(examples.size());
  for (const auto& ex : examples) {
    RankedLabels r{ex.dialog_id, {}};
    for (const auto& e : rank(ex, params, cfg)) r.labels.push_back(e.label);
    rankings.push_back(std::move(r));
  }
  return evaluate(rankings);
}

std::string EpochLog::tsv_header() { return "epoch\ttrain_loss\tvalid_map\tvalid_r@1\tseconds"; }

std::string EpochLog::tsv_row() const {
  using settings::format_double;
  char secs[32];
  std::snprintf(secs, sizeof(secs), "%.3f", seconds);
  return std::to_string(epoch) + "\t" + format_double(train_loss) + "\t" + format_double(valid_map) + "\t" +
         format_double(valid_recall_1) + "\t" + secs;
}

TrainResult train(std::span<const PreparedExample> train_set, std::span<const PreparedExample> valid_set,
                  const ModelConfig& model_cfg, ModelParams initial, const TrainConfig& train_cfg,
                  const EpochCallback& on_epoch) {
  model_cfg.validate();
  train_cfg.validate();
  TrainResult result;
  auto triples = make_triples(train_set);
  result.skipped_examples = triples.skipped;
  if (train_cfg.epochs > 0 && triples.triples.empty())
    throw DataError("training set yields no (positive, negative) pairs");

  ModelParams params = std::move(initial);
  ModelParams grads = ModelParams::zeros(model_cfg);
  AdamState adam;
  std::mt19937_64 dropout_rng(derive_seed(train_cfg.seed, "dropout"));
  std::size_t since_best = 0;
  result.best_map = -1.0;
  const bool has_valid = !valid_set.empty();

  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 shuffle_rng(derive_seed(train_cfg.seed, "shuffle", epoch));
    auto order = triples.triples;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += train_cfg.batch_size) {
      std::span<const Triple> batch(order.data() + b, std::min(train_cfg.batch_size, order.size() - b));
      grads.zero();
      const double loss = batch_loss(batch, train_set, params, model_cfg, train_cfg, &grads, &dropout_rng);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << loss << " at epoch " << epoch << ", batch " << batches;
        throw NumericError(msg.str());
      }
      adam_step(params, grads, adam, train_cfg);
      loss_sum += loss;
      ++batches;
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(batches);
    MetricsReport valid;
    if (has_valid) {
      valid = evaluate_model(valid_set, params, model_cfg);
    } else {
      valid.map = valid.recall_1 = std::nan("");
    }
    row.valid_map = valid.map;
    row.valid_recall_1 = valid.recall_1;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    if (!has_valid) {
      result.params = params;
      result.best_epoch = epoch;
      continue;
    }
    if (valid.map > result.best_map) {
      result.best_map = valid.map;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (train_cfg.patience > 0 && ++since_best >= train_cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (result.best_epoch == 0) result.params = std::move(params);
  if (result.best_map < 0.0) result.best_map = std::nan("");
  return result;
}

}  // namespace dmnrank
