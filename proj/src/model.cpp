#include "dmnrank/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "dmnrank/error.hpp"
#include "dmnrank/random.hpp"
#include "dmnrank/settings.hpp"

namespace dmnrank {

// ---- configuration --------------------------------------------------------

Variant parse_variant(std::string_view name) {
  std::string n;
  for (char c : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (n == "dmn") return Variant::dmn;
  if (n == "dmn-prf" || n == "dmn_prf" || n == "prf") return Variant::dmn_prf;
  if (n == "dmn-kd" || n == "dmn_kd" || n == "kd") return Variant::dmn_kd;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected DMN|DMN-PRF|DMN-KD)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::dmn: return "DMN";
    case Variant::dmn_prf: return "DMN-PRF";
    case Variant::dmn_kd: return "DMN-KD";
  }
  return "DMN";
}

std::vector<Channel> parse_channels(std::string_view list) {
  bool seen[3] = {false, false, false};
  std::size_t start = 0;
  while (start <= list.size()) {
    auto comma = list.find_first_of(",+", start);
    auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    std::string n;
    for (char c : item)
      if (!std::isspace(static_cast<unsigned char>(c))) n.push_back(static_cast<char>(std::tolower(c)));
    int idx = -1;
    if (n == "m1")
      idx = 0;
    else if (n == "m2")
      idx = 1;
    else if (n == "m3")
      idx = 2;
    else if (!n.empty())
      throw ConfigError("unknown channel '" + std::string(item) + "' (expected M1, M2 or M3)");
    if (idx >= 0) {
      if (seen[idx]) throw ConfigError("channel '" + n + "' listed twice");
      seen[idx] = true;
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  std::vector<Channel> out;
  for (int i = 0; i < 3; ++i)
    if (seen[i]) out.push_back(static_cast<Channel>(i));
  return out;
}

std::string channels_string(const std::vector<Channel>& channels) {
  std::string s;
  for (auto c : channels) {
    if (!s.empty()) s += ",";
    s += c == Channel::m1 ? "M1" : c == Channel::m2 ? "M2" : "M3";
  }
  return s;
}

bool ModelConfig::has(Channel c) const { return std::find(channels.begin(), channels.end(), c) != channels.end(); }

std::vector<std::pair<std::size_t, std::size_t>> ModelConfig::block_shapes() const {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  std::size_t rows = max_response_len, cols = max_utterance_len;
  for (std::size_t b = 0; b < conv_blocks; ++b) {
    if (conv.padding == nn::ConvPadding::valid && (rows < conv.kernel_rows || cols < conv.kernel_cols))
      throw ConfigError("convolution block " + std::to_string(b) + ": kernel larger than its " +
                        std::to_string(rows) + "x" + std::to_string(cols) + " input");
    rows = nn::conv_output_size(rows, conv.kernel_rows, conv.padding);
    cols = nn::conv_output_size(cols, conv.kernel_cols, conv.padding);
    rows = nn::pool_output_size(rows, conv.pool_rows, conv.pool_partial);
    cols = nn::pool_output_size(cols, conv.pool_cols, conv.pool_partial);
    if (rows == 0 || cols == 0)
      throw ConfigError("pooling block " + std::to_string(b) + " leaves an empty feature map");
    shapes.emplace_back(rows, cols);
  }
  return shapes;
}

std::size_t ModelConfig::cnn_feature_dim() const {
  auto last = block_shapes().back();
  return conv.kernels * last.first * last.second;
}

std::size_t ModelConfig::turn_feature_dim() const {
  return projection_dim > 0 ? projection_dim : cnn_feature_dim();
}

void ModelConfig::validate() const {
  if (channels.empty()) throw ConfigError("at least one interaction channel is required");
  for (std::size_t i = 0; i < channels.size(); ++i)
    for (std::size_t j = i + 1; j < channels.size(); ++j)
      if (channels[i] == channels[j]) throw ConfigError("duplicate channel in " + channels_string(channels));
  if (has(Channel::m3) != (variant == Variant::dmn_kd))
    throw ConfigError("channel M3 is used exactly when the variant is DMN-KD (variant " +
                      std::string(to_string(variant)) + ", channels " + channels_string(channels) + ")");
  if (max_utterance_len < 1 || max_response_len < 1 || context_len < 1)
    throw ConfigError("sequence and context lengths must be >= 1");
  if (embed_dim < 1 || hidden_dim < 1 || mlp_hidden < 1) throw ConfigError("layer sizes must be >= 1");
  if (vocab_size < 2) throw ConfigError("vocabulary must hold at least PAD and UNK");
  if (conv_blocks < 1) throw ConfigError("conv_blocks must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  auto c = conv;
  c.in_channels = channels.size();
  c.validate();
  (void)block_shapes();
}

std::map<std::string, std::string> ModelConfig::to_settings() const {
  using settings::format_double;
  auto pair = [](std::size_t a, std::size_t b) { return std::to_string(a) + "," + std::to_string(b); };
  return {
      {"variant", std::string(to_string(variant))},
      {"channels", channels_string(channels)},
      {"interaction", std::string(nn::to_string(interaction))},
      {"max_utterance_len", std::to_string(max_utterance_len)},
      {"max_response_len", std::to_string(max_response_len)},
      {"context_len", std::to_string(context_len)},
      {"vocab_size", std::to_string(vocab_size)},
      {"embed_dim", std::to_string(embed_dim)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"conv_kernel", pair(conv.kernel_rows, conv.kernel_cols)},
      {"conv_kernels", std::to_string(conv.kernels)},
      {"pool_size", pair(conv.pool_rows, conv.pool_cols)},
      {"conv_padding", std::string(nn::to_string(conv.padding))},
      {"pool_partial", conv.pool_partial ? "true" : "false"},
      {"conv_blocks", std::to_string(conv_blocks)},
      {"projection_dim", std::to_string(projection_dim)},
      {"mlp_hidden", std::to_string(mlp_hidden)},
      {"dropout", format_double(dropout)},
      {"include_current_turn", include_current_turn ? "true" : "false"},
      {"truncation", std::string(to_string(truncation))},
  };
}

bool ModelConfig::apply_setting(std::string_view key, std::string_view value) {
  using namespace settings;
  if (key == "variant") {
    variant = parse_variant(value);
  } else if (key == "channels") {
    channels = parse_channels(value);
  } else if (key == "interaction") {
    interaction = nn::parse_interaction(value);
  } else if (key == "max_utterance_len") {
    max_utterance_len = to_size(key, value);
  } else if (key == "max_response_len") {
    max_response_len = to_size(key, value);
  } else if (key == "context_len") {
    context_len = to_size(key, value);
  } else if (key == "vocab_size") {
    vocab_size = to_size(key, value);
  } else if (key == "embed_dim") {
    embed_dim = to_size(key, value);
  } else if (key == "hidden_dim") {
    hidden_dim = to_size(key, value);
  } else if (key == "conv_kernel") {
    std::tie(conv.kernel_rows, conv.kernel_cols) = to_size_pair(key, value);
  } else if (key == "conv_kernels") {
    conv.kernels = to_size(key, value);
  } else if (key == "pool_size") {
    std::tie(conv.pool_rows, conv.pool_cols) = to_size_pair(key, value);
  } else if (key == "conv_padding") {
    conv.padding = nn::parse_padding(value);
  } else if (key == "pool_partial") {
    conv.pool_partial = to_bool(key, value);
  } else if (key == "conv_blocks") {
    conv_blocks = to_size(key, value);
  } else if (key == "projection_dim") {
    projection_dim = to_size(key, value);
  } else if (key == "mlp_hidden") {
    mlp_hidden = to_size(key, value);
  } else if (key == "dropout") {
    dropout = to_double(key, value);
  } else if (key == "include_current_turn") {
    include_current_turn = to_bool(key, value);
  } else if (key == "truncation") {
    truncation = parse_truncation(value);
  } else {
    return false;
  }
  conv.in_channels = channels.size();
  return true;
}

// ---- parameters -----------------------------------------------------------

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  const auto d = cfg.embed_dim, o = cfg.hidden_dim;
  if (cfg.uses_embeddings()) p.embedding = nn::Tensor({cfg.vocab_size, d});
  if (cfg.has(Channel::m2)) {
    p.encoder_fwd = nn::GruParams(d, o);
    p.encoder_bwd = nn::GruParams(d, o);
  }
  std::size_t in = cfg.channels.size();
  for (std::size_t b = 0; b < cfg.conv_blocks; ++b) {
    p.conv.emplace_back(cfg.conv.kernels, in, cfg.conv.kernel_rows, cfg.conv.kernel_cols);
    in = cfg.conv.kernels;
  }
  if (cfg.projection_dim > 0) p.projection = nn::LinearParams(cfg.cnn_feature_dim(), cfg.projection_dim);
  p.context_fwd = nn::GruParams(cfg.turn_feature_dim(), o);
  p.context_bwd = nn::GruParams(cfg.turn_feature_dim(), o);
  p.mlp = nn::MlpParams(cfg.mlp_input_dim(), cfg.mlp_hidden);
  if (cfg.interaction == nn::Interaction::bilinear) {
    if (cfg.has(Channel::m1)) p.bilinear_word = nn::Tensor({d, d});
    if (cfg.has(Channel::m2)) p.bilinear_hidden = nn::Tensor({2 * o, 2 * o});
  }
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = zeros(cfg);
  std::mt19937_64 rng(derive_seed(seed, "init"));
  auto uniform = [&rng](nn::Tensor& t, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.values()) v = dist(rng);
  };
  auto glorot = [&uniform](nn::Tensor& t, double fan_in, double fan_out) {
    uniform(t, std::sqrt(6.0 / (fan_in + fan_out)));
  };
  auto gru = [&glorot](nn::GruParams& g) {
    if (g.w_z.empty()) return;
    const double in = static_cast<double>(g.input_dim()), o = static_cast<double>(g.hidden_dim());
    for (auto* w : {&g.w_z, &g.w_r, &g.w_h}) glorot(*w, in, o);
    for (auto* u : {&g.u_z, &g.u_r, &g.u_h}) glorot(*u, o, o);
  };
  auto identity = [](nn::Tensor& t) {
    for (std::size_t i = 0; i < t.dim(0); ++i) t(i, i) = 1.0;
  };

  if (!p.embedding.empty()) uniform(p.embedding, 0.1);
  gru(p.encoder_fwd);
  gru(p.encoder_bwd);
  for (auto& c : p.conv) {
    const double area = static_cast<double>(c.kernel_rows() * c.kernel_cols());
    glorot(c.weight, static_cast<double>(c.in_channels()) * area, static_cast<double>(c.kernels()) * area);
  }
  if (!p.projection.weight.empty())
    glorot(p.projection.weight, static_cast<double>(p.projection.weight.dim(1)),
           static_cast<double>(p.projection.weight.dim(0)));
  gru(p.context_fwd);
  gru(p.context_bwd);
  glorot(p.mlp.w1, static_cast<double>(p.mlp.input_dim()), static_cast<double>(p.mlp.hidden_dim()));
  glorot(p.mlp.w2, static_cast<double>(p.mlp.hidden_dim()), 2.0);
  if (!p.bilinear_word.empty()) identity(p.bilinear_word);
  if (!p.bilinear_hidden.empty()) identity(p.bilinear_hidden);
  return p;
}

namespace {

template <class Params, class Out>
void collect(Params& p, Out& out) {
  auto add = [&out](std::string name, auto& t) {
    if (!t.empty()) out.push_back({std::move(name), &t});
  };
  add("embedding", p.embedding);
  auto gru = [&](const std::string& prefix, auto& g) {
    const_cast<nn::GruParams&>(g).for_each([&](const char* n, nn::Tensor& t) {
      if (!t.empty()) out.push_back({prefix + "." + n, &t});
    });
  };
  gru("encoder_fwd", p.encoder_fwd);
  gru("encoder_bwd", p.encoder_bwd);
  for (std::size_t b = 0; b < p.conv.size(); ++b) {
    add("conv" + std::to_string(b) + ".weight", p.conv[b].weight);
    add("conv" + std::to_string(b) + ".bias", p.conv[b].bias);
  }
  add("projection.weight", p.projection.weight);
  add("projection.bias", p.projection.bias);
  gru("context_fwd", p.context_fwd);
  gru("context_bwd", p.context_bwd);
  add("mlp.w1", p.mlp.w1);
  add("mlp.b1", p.mlp.b1);
  add("mlp.w2", p.mlp.w2);
  add("mlp.b2", p.mlp.b2);
  add("bilinear_word", p.bilinear_word);
  add("bilinear_hidden", p.bilinear_hidden);
}

}  // namespace

std::vector<ModelParams::Entry> ModelParams::registry() {
  std::vector<Entry> out;
  collect(*this, out);
  return out;
}

std::vector<ModelParams::ConstEntry> ModelParams::registry() const {
  std::vector<ConstEntry> out;
  collect(*this, out);
  return out;
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for (const auto& e : registry()) s += e.tensor->squared_norm();
  return s;
}

void ModelParams::zero() {
  for (auto& e : registry()) e.tensor->zero();
}

std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, nn::Tensor& embedding) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  const auto d = embedding.dim(1);
  std::string line;
  std::size_t lineno = 0, replaced = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream row(line);
    std::string word;
    if (!(row >> word)) continue;
    std::vector<double> vec;
    for (double v; row >> v;) vec.push_back(v);
    if (lineno == 1 && vec.size() == 1) continue;  // "count dim" header
    if (vec.size() != d)
      throw ParseError(lineno, "embedding for '" + word + "' has " + std::to_string(vec.size()) +
                                   " values, model uses " + std::to_string(d));
    if (!vocab.contains(word)) continue;
    auto id = static_cast<std::size_t>(vocab.id(word));
    if (id == static_cast<std::size_t>(kPadId) || id == static_cast<std::size_t>(kUnkId)) continue;
    std::copy(vec.begin(), vec.end(), embedding.row(id).begin());
    ++replaced;
  }
  return replaced;
}

// ---- data preparation -----------------------------------------------------

PreparedExample prepare_example(const DialogExample& example, const Vocabulary& vocab, const ModelConfig& cfg,
                                const KnowledgeBase* knowledge) {
  if (cfg.variant != Variant::dmn && !knowledge)
    throw ConfigError(std::string(to_string(cfg.variant)) + " needs an external knowledge index");
  const auto lu = cfg.max_utterance_len, lr = cfg.max_response_len, c = cfg.context_len;

  std::vector<Tokens> turns = example.context;
  if (!cfg.include_current_turn && !turns.empty()) turns.pop_back();
  if (turns.size() > c) turns = window_context(turns, c);

  PreparedExample out;
  out.dialog_id = example.dialog_id;
  std::vector<Tokens> slot_tokens(c);
  out.context.assign(c, EncodedText{std::vector<TokenId>(lu, kPadId), 0});
  const auto offset = c - turns.size();
  for (std::size_t i = 0; i < turns.size(); ++i) {
    slot_tokens[offset + i] = truncate(turns[i], lu, cfg.truncation);
    out.context[offset + i] = encode(slot_tokens[offset + i], vocab, lu);
  }

  for (const auto& cand : example.candidates) {
    EncodedCandidate ec;
    ec.label = cand.label;
    Tokens kept = truncate(cand.response, lr, cfg.truncation);
    if (cfg.variant == Variant::dmn_prf) {
      for (const auto& t : knowledge->expansion(cand.response)) {
        if (kept.size() >= lr) break;
        kept.push_back(t);
      }
    }
    ec.response = encode(kept, vocab, lr);
    if (cfg.variant == Variant::dmn_kd) {
      PpmiStats stats(knowledge->related_pairs(cand.response), knowledge->options().counting);
      for (std::size_t s = 0; s < c; ++s) {
        auto m3 = ppmi_matrix(kept, slot_tokens[s], stats, lr, lu);
        for (std::size_t i = 0; i < lr; ++i)
          for (std::size_t j = 0; j < lu; ++j)
            if (ec.response.ids[i] == kUnkId || out.context[s].ids[j] == kUnkId) m3(i, j) = 0.0;
        ec.m3.push_back(std::move(m3));
      }
    }
    out.candidates.push_back(std::move(ec));
  }
  return out;
}

// ---- forward --------------------------------------------------------------

namespace {

EncodedSequence encode_sequence(const EncodedText& text, const ModelParams& p, const ModelConfig& cfg,
                                bool keep_trace) {
  EncodedSequence seq;
  const auto len = text.true_len;
  seq.ids.assign(text.ids.begin(), text.ids.begin() + static_cast<std::ptrdiff_t>(len));
  if (!cfg.uses_embeddings() || len == 0) return seq;
  seq.embedded = nn::Tensor({len, cfg.embed_dim});
  for (std::size_t t = 0; t < len; ++t) {
    auto id = static_cast<std::size_t>(seq.ids[t]);
    if (id >= p.embedding.dim(0))
      throw DataError("token id " + std::to_string(id) + " exceeds the embedding table");
    auto src = p.embedding.row(id);
    std::copy(src.begin(), src.end(), seq.embedded.row(t).begin());
  }
  if (cfg.has(Channel::m2))
    seq.hidden = nn::bigru(seq.embedded, p.encoder_fwd, p.encoder_bwd, keep_trace ? &seq.gru : nullptr);
  return seq;
}

void place(const nn::Tensor& m, nn::Tensor& stack, std::size_t channel) {
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(1); ++j) stack(channel, i, j) = m(i, j);
}

nn::Tensor make_stack(const EncodedSequence& utt, const EncodedSequence& resp, const ModelParams& p,
                      const ModelConfig& cfg, const nn::Tensor* m3) {
  const auto lr = cfg.max_response_len, lu = cfg.max_utterance_len;
  nn::Tensor stack({cfg.channels.size(), lr, lu});
  const bool both = !utt.ids.empty() && !resp.ids.empty();
  const auto* bw = p.bilinear_word.empty() ? nullptr : &p.bilinear_word;
  const auto* bh = p.bilinear_hidden.empty() ? nullptr : &p.bilinear_hidden;
  for (std::size_t ch = 0; ch < cfg.channels.size(); ++ch) {
    switch (cfg.channels[ch]) {
      case Channel::m1:
        if (both) place(nn::interaction_matrix(resp.embedded, utt.embedded, cfg.interaction, bw), stack, ch);
        break;
      case Channel::m2:
        if (both) place(nn::interaction_matrix(resp.hidden, utt.hidden, cfg.interaction, bh), stack, ch);
        break;
      case Channel::m3:
        if (!m3) throw ShapeError("M3 channel configured but no M3 matrix given");
        nn::require_shape(*m3, {lr, lu}, "M3");
        place(*m3, stack, ch);
        break;
    }
  }
  return stack;
}

}  // namespace

InteractionStack build_stack(const EncodedText& utterance, const EncodedText& response, const ModelParams& params,
                             const ModelConfig& cfg, const nn::Tensor* m3) {
  if (m3 && !cfg.has(Channel::m3)) throw ShapeError("M3 given but channel M3 is not configured");
  auto u = encode_sequence(utterance, params, cfg, false);
  auto r = encode_sequence(response, params, cfg, false);
  return {make_stack(u, r, params, cfg, m3)};
}

double score(std::span<const EncodedText> context, const EncodedCandidate& candidate, const ModelParams& p,
             const ModelConfig& cfg, const ForwardOptions& options, ScoreTrace* trace) {
  const auto c = cfg.context_len;
  if (context.size() != c)
    throw ShapeError("score: expected " + std::to_string(c) + " context slots, got " +
                     std::to_string(context.size()));
  if (cfg.has(Channel::m3) && candidate.m3.size() != c)
    throw ShapeError("score: DMN-KD candidate needs one M3 matrix per context slot");
  if (options.training && cfg.dropout > 0.0 && !options.rng)
    throw ConfigError("score: training mode needs a random generator for dropout");

  ScoreTrace local;
  ScoreTrace& tr = trace ? *trace : local;
  const bool keep = trace != nullptr;
  tr.turns.assign(c, {});
  tr.response = encode_sequence(candidate.response, p, cfg, keep);

  const auto feat = cfg.turn_feature_dim();
  tr.turn_features = nn::Tensor({c, feat});
  for (std::size_t t = 0; t < c; ++t) {
    auto& turn = tr.turns[t];
    turn.utterance = encode_sequence(context[t], p, cfg, keep);
    nn::Tensor x = make_stack(turn.utterance, tr.response, p, cfg, cfg.has(Channel::m3) ? &candidate.m3[t] : nullptr);
    if (keep) turn.stack = x;
    turn.conv.assign(cfg.conv_blocks, {});
    turn.pool.assign(cfg.conv_blocks, {});
    for (std::size_t b = 0; b < cfg.conv_blocks; ++b) {
      x = nn::conv2d(x, p.conv[b], cfg.conv.padding, keep ? &turn.conv[b] : nullptr);
      x = nn::max_pool(x, cfg.conv.pool_rows, cfg.conv.pool_cols, cfg.conv.pool_partial,
                       keep ? &turn.pool[b] : nullptr);
    }
    turn.flat.assign(x.values().begin(), x.values().end());
    turn.feature = cfg.projection_dim > 0 ? nn::linear(turn.flat, p.projection) : turn.flat;
    std::copy(turn.feature.begin(), turn.feature.end(), tr.turn_features.row(t).begin());
  }

  auto hc = nn::bigru(tr.turn_features, p.context_fwd, p.context_bwd, keep ? &tr.context_gru : nullptr);
  std::mt19937_64 unused;
  auto dropped = nn::dropout(hc.values(), cfg.dropout, options.training, options.rng ? *options.rng : unused,
                             &tr.dropout_mask);
  return nn::mlp_score(dropped, p.mlp, &tr.mlp);
}

double ScoreTrace::kink_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& turn : turns) {
    for (std::size_t b = 0; b < turn.conv.size(); ++b) {
      const auto& pre = turn.conv[b].preactivation;
      for (double v : pre.values()) margin = std::min(margin, std::abs(v));
      const auto& pool = turn.pool[b];
      const auto k = pre.dim(0), h = pre.dim(1), w = pre.dim(2);
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < h; i += pool.pool_rows)
          for (std::size_t j = 0; j < w; j += pool.pool_cols) {
            double best = 0.0, second = 0.0;
            for (std::size_t s = i; s < std::min(h, i + pool.pool_rows); ++s)
              for (std::size_t t = j; t < std::min(w, j + pool.pool_cols); ++t) {
                const double v = std::max(pre(c, s, t), 0.0);
                if (v > best) {
                  second = best;
                  best = v;
                } else if (v > second) {
                  second = v;
                }
              }
            if (best > 0.0) margin = std::min(margin, best - second);
          }
    }
  }
  return margin;
}

// ---- backward -------------------------------------------------------------

namespace {

void scatter_embeddings(const std::vector<TokenId>& ids, const nn::Tensor& d_embedded, nn::Tensor& grad) {
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto dst = grad.row(static_cast<std::size_t>(ids[t]));
    auto src = d_embedded.row(t);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

nn::Tensor channel_block(const nn::Tensor& d_stack, std::size_t ch, std::size_t rows, std::size_t cols) {
  nn::Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = d_stack(ch, i, j);
  return out;
}

}  // namespace

void score_backward(const ScoreTrace& tr, double d_score, const ModelParams& p, const ModelConfig& cfg,
                    ModelParams& g) {
  const auto c = cfg.context_len, o = cfg.hidden_dim;
  std::vector<double> d_feat(cfg.mlp_input_dim(), 0.0);
  nn::mlp_backward(tr.mlp, d_score, p.mlp, g.mlp, d_feat);
  for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat[i] *= tr.dropout_mask[i];
  nn::Tensor d_hc({c, 2 * o}, std::move(d_feat));
  nn::Tensor d_turns({c, cfg.turn_feature_dim()});
  nn::bigru_backward(tr.context_gru, d_hc, p.context_fwd, p.context_bwd, g.context_fwd, g.context_bwd, d_turns);

  const auto& resp = tr.response;
  const auto tr_len = resp.ids.size();
  nn::Tensor d_er, d_hr;
  if (cfg.uses_embeddings() && tr_len > 0) d_er = nn::Tensor({tr_len, cfg.embed_dim});
  if (cfg.has(Channel::m2) && tr_len > 0) d_hr = nn::Tensor({tr_len, 2 * o});
  auto* gbw = p.bilinear_word.empty() ? nullptr : &g.bilinear_word;
  auto* gbh = p.bilinear_hidden.empty() ? nullptr : &g.bilinear_hidden;
  const auto* bw = p.bilinear_word.empty() ? nullptr : &p.bilinear_word;
  const auto* bh = p.bilinear_hidden.empty() ? nullptr : &p.bilinear_hidden;
  const auto last = cfg.block_shapes().back();

  for (std::size_t t = 0; t < c; ++t) {
    const auto& turn = tr.turns[t];
    std::vector<double> d_flat(turn.flat.size(), 0.0);
    auto d_feature = d_turns.row(t);
    if (cfg.projection_dim > 0)
      nn::linear_backward(turn.flat, d_feature, p.projection, g.projection, d_flat);
    else
      std::copy(d_feature.begin(), d_feature.end(), d_flat.begin());

    nn::Tensor d_x({cfg.conv.kernels, last.first, last.second}, std::move(d_flat));
    for (std::size_t b = cfg.conv_blocks; b-- > 0;) {
      auto d_conv = nn::max_pool_backward(turn.pool[b], d_x);
      nn::Tensor d_in;
      nn::conv2d_backward(turn.conv[b], d_conv, p.conv[b], cfg.conv.padding, g.conv[b], &d_in);
      d_x = std::move(d_in);
    }

    const auto& utt = turn.utterance;
    const auto tu = utt.ids.size();
    if (tu == 0 || tr_len == 0 || !cfg.uses_embeddings()) continue;
    nn::Tensor d_eu({tu, cfg.embed_dim});
    for (std::size_t ch = 0; ch < cfg.channels.size(); ++ch) {
      if (cfg.channels[ch] == Channel::m1) {
        auto dm = channel_block(d_x, ch, tr_len, tu);
        nn::interaction_backward(resp.embedded, utt.embedded, cfg.interaction, bw, dm, d_er, d_eu, gbw);
      } else if (cfg.channels[ch] == Channel::m2) {
        auto dm = channel_block(d_x, ch, tr_len, tu);
        nn::Tensor d_hu({tu, 2 * o});
        nn::interaction_backward(resp.hidden, utt.hidden, cfg.interaction, bh, dm, d_hr, d_hu, gbh);
        nn::bigru_backward(utt.gru, d_hu, p.encoder_fwd, p.encoder_bwd, g.encoder_fwd, g.encoder_bwd, d_eu);
      }
    }
    scatter_embeddings(utt.ids, d_eu, g.embedding);
  }

  if (!d_hr.empty())
    nn::bigru_backward(resp.gru, d_hr, p.encoder_fwd, p.encoder_bwd, g.encoder_fwd, g.encoder_bwd, d_er);
  if (!d_er.empty()) scatter_embeddings(resp.ids, d_er, g.embedding);
}

// ---- ranking --------------------------------------------------------------

std::vector<std::size_t> rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<RankEntry> rank(const PreparedExample& example, const ModelParams& params, const ModelConfig& cfg) {
  std::vector<double> scores;
  scores.reserve(example.candidates.size());
  for (const auto& cand : example.candidates) scores.push_back(score(example.context, cand, params, cfg));
  std::vector<RankEntry> out;
  for (auto i : rank_order(scores)) out.push_back({i, scores[i], example.candidates[i].label});
  return out;
}

// ---- checkpoints ----------------------------------------------------------

namespace {
constexpr std::string_view kCheckpointMagic = "dmnrank-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  auto settings = ckpt.config.to_settings();
  out << "config " << settings.size() << '\n';
  for (const auto& [k, v] : settings) out << k << '=' << v << '\n';
  out << "vocab " << ckpt.vocab.size() << '\n';
  ckpt.vocab.save(out);
  auto reg = ckpt.params.registry();
  out << "params " << reg.size() << '\n';
  char buf[40];
  for (const auto& e : reg) {
    out << e.name << ' ' << e.tensor->rank();
    for (auto d : e.tensor->shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < e.tensor->size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", (*e.tensor)[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_checkpoint(out, ckpt);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, "unexpected end of checkpoint");
    ++lineno;
    return line;
  };
  auto section = [&](std::string_view key) -> std::size_t {
    auto& l = next();
    if (l.rfind(std::string(key) + " ", 0) != 0) throw ParseError(lineno, "expected '" + std::string(key) + "'");
    return settings::to_size(key, std::string_view(l).substr(key.size() + 1));
  };

  if (section(kCheckpointMagic) != static_cast<std::size_t>(kCheckpointVersion))
    throw ParseError(lineno, "unsupported checkpoint version");
  Checkpoint ckpt;
  const auto nsettings = section("config");
  for (std::size_t i = 0; i < nsettings; ++i) {
    auto& l = next();
    auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
    if (!ckpt.config.apply_setting(std::string_view(l).substr(0, eq), std::string_view(l).substr(eq + 1)))
      throw ParseError(lineno, "unknown model setting '" + l.substr(0, eq) + "'");
  }
  ckpt.config.validate();
  const auto nvocab = section("vocab");
  std::ostringstream vocab_text;
  for (std::size_t i = 0; i < nvocab; ++i) vocab_text << next() << '\n';
  std::istringstream vocab_in(vocab_text.str());
  ckpt.vocab = Vocabulary::load(vocab_in);

  ckpt.params = ModelParams::zeros(ckpt.config);
  auto reg = ckpt.params.registry();
  const auto nparams = section("params");
  if (nparams != reg.size())
    throw ParseError(lineno, "checkpoint holds " + std::to_string(nparams) + " tensors, config implies " +
                                 std::to_string(reg.size()));
  for (auto& e : reg) {
    std::istringstream head(next());
    std::string name;
    std::size_t rank = 0;
    head >> name >> rank;
    nn::Shape shape(rank);
    for (auto& d : shape) head >> d;
    if (name != e.name) throw ParseError(lineno, "expected tensor '" + e.name + "', found '" + name + "'");
    if (shape != e.tensor->shape())
      throw ParseError(lineno, "tensor '" + name + "' has shape " + nn::shape_string(shape) + ", expected " +
                                   nn::shape_string(e.tensor->shape()));
    std::istringstream values(next());
    std::string tok;
    for (std::size_t i = 0; i < e.tensor->size(); ++i) {
      if (!(values >> tok)) throw ParseError(lineno, "tensor '" + name + "' is truncated");
      char* end = nullptr;
      (*e.tensor)[i] = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) throw ParseError(lineno, "bad value '" + tok + "'");
    }
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace dmnrank
