#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dmnrank/corpus.hpp"
#include "dmnrank/knowledge.hpp"
#include "dmnrank/nn/gru.hpp"
#include "dmnrank/nn/layers.hpp"
#include "dmnrank/nn/tensor.hpp"
#include "dmnrank/text.hpp"

namespace dmnrank {

enum class Variant { dmn, dmn_prf, dmn_kd };
enum class Channel { m1, m2, m3 };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);
/// Comma-separated subset of m1,m2,m3 (case-insensitive), e.g. "M1,M2".
std::vector<Channel> parse_channels(std::string_view list);
std::string channels_string(const std::vector<Channel>& channels);

struct ModelConfig {
  Variant variant = Variant::dmn;
  std::vector<Channel> channels{Channel::m1, Channel::m2};
  nn::Interaction interaction = nn::Interaction::dot;
  std::size_t max_utterance_len = 50;  // l_u
  std::size_t max_response_len = 50;  // l_r
  std::size_t context_len = 10;        // c
  std::size_t vocab_size = 2;
  std::size_t embed_dim = 200;  // d
  std::size_t hidden_dim = 200;  // O, shared by the encoder and context BiGRUs
  nn::ConvLayerConfig conv;
  std::size_t conv_blocks = 1;
  std::size_t projection_dim = 0;  // 0 feeds flattened CNN features straight to the context BiGRU
  std::size_t mlp_hidden = 100;
  double dropout = 0.3;
  bool include_current_turn = true;
  Truncation truncation = Truncation::head;

  bool has(Channel c) const;
  bool uses_embeddings() const { return has(Channel::m1) || has(Channel::m2); }
  /// Throws ConfigError on any invariant violation.
  void validate() const;

  /// Spatial shape after each conv+pool block, ending with the last one.
  std::vector<std::pair<std::size_t, std::size_t>> block_shapes() const;
  std::size_t cnn_feature_dim() const;
  /// Input width of the context BiGRU.
  std::size_t turn_feature_dim() const;
  std::size_t mlp_input_dim() const { return context_len * 2 * hidden_dim; }

  std::map<std::string, std::string> to_settings() const;
  /// Returns false when `key` is not a model setting.
  bool apply_setting(std::string_view key, std::string_view value);
};

/// Every trainable tensor of the network.
struct ModelParams {
  nn::Tensor embedding;  // |V| x d
  nn::GruParams encoder_fwd, encoder_bwd;
  std::vector<nn::ConvParams> conv;
  nn::LinearParams projection;
  nn::GruParams context_fwd, context_bwd;
  nn::MlpParams mlp;
  nn::Tensor bilinear_word;    // d x d, bilinear interaction on M1
  nn::Tensor bilinear_hidden;  // 2O x 2O, bilinear interaction on M2

  /// All-zero parameters with the shapes the config requires.
  static ModelParams zeros(const ModelConfig& cfg);
  /// Embeddings uniform in [-0.1, 0.1], weight matrices Glorot-uniform,
  /// biases zero, bilinear matrices identity.
  static ModelParams initialize(const ModelConfig& cfg, std::uint64_t seed);

  struct Entry {
    std::string name;
    nn::Tensor* tensor;
  };
  struct ConstEntry {
    std::string name;
    const nn::Tensor* tensor;
  };
  /// Non-empty tensors in a fixed order with unique names.
  std::vector<Entry> registry();
  std::vector<ConstEntry> registry() const;

  double squared_norm() const;
  void zero();
};

/// Copies vectors from a word2vec text file (optional `count dim` header line)
/// into the rows of matching vocabulary tokens. Returns the number of rows replaced.
std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, nn::Tensor& embedding);

struct EncodedCandidate {
  EncodedText response;
  int label = 0;
  std::vector<nn::Tensor> m3;  // one l_r x l_u matrix per context slot, DMN-KD only
};

/// A dialog encoded for the network: exactly c context slots (older slots
/// all-PAD when the dialog is short) and the encoded candidates.
struct PreparedExample {
  std::string dialog_id;
  std::vector<EncodedText> context;
  std::vector<EncodedCandidate> candidates;
};

/// Applies context windowing, response expansion (DMN-PRF) and M3
/// construction (DMN-KD). `knowledge` is required for those two variants.
PreparedExample prepare_example(const DialogExample& example, const Vocabulary& vocab, const ModelConfig& cfg,
                                const KnowledgeBase* knowledge = nullptr);

/// Channels of the CNN input for one (utterance, response) pair, each l_r x l_u.
struct InteractionStack {
  nn::Tensor channels;  // |channels| x l_r x l_u
};

InteractionStack build_stack(const EncodedText& utterance, const EncodedText& response, const ModelParams& params,
                             const ModelConfig& cfg, const nn::Tensor* m3 = nullptr);

struct EncodedSequence {
  std::vector<TokenId> ids;  // non-PAD prefix
  nn::Tensor embedded;       // len x d
  nn::Tensor hidden;         // len x 2O, M2 only
  nn::BiGruTrace gru;
};

struct TurnTrace {
  EncodedSequence utterance;
  nn::Tensor stack;
  std::vector<nn::ConvTrace> conv;
  std::vector<nn::PoolTrace> pool;
  std::vector<double> flat;     // flattened CNN output
  std::vector<double> feature;  // after projection
};

/// Everything score_backward needs from one forward pass.
struct ScoreTrace {
  EncodedSequence response;
  std::vector<TurnTrace> turns;
  nn::Tensor turn_features;  // c x feature
  nn::BiGruTrace context_gru;
  std::vector<double> dropout_mask;
  nn::MlpTrace mlp;

  /// Smallest |pre-activation| over all ReLU inputs, and smallest gap between
  /// a positive pooling maximum and the runner-up in its window. Finite
  /// differences are only meaningful when this exceeds the probe step.
  double kink_margin() const;
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // dropout source, training only
};

/// f(U, r) in (0, 1).
double score(std::span<const EncodedText> context, const EncodedCandidate& candidate, const ModelParams& params,
             const ModelConfig& cfg, const ForwardOptions& options = {}, ScoreTrace* trace = nullptr);

/// Accumulates d f / d theta * d_score into grads.
void score_backward(const ScoreTrace& trace, double d_score, const ModelParams& params, const ModelConfig& cfg,
                    ModelParams& grads);

struct RankEntry {
  std::size_t candidate = 0;
  double score = 0.0;
  int label = 0;
};

/// Candidates by descending score, ties by candidate index.
std::vector<RankEntry> rank(const PreparedExample& example, const ModelParams& params, const ModelConfig& cfg);

/// Orders precomputed scores the same way rank() does.
std::vector<std::size_t> rank_order(std::span<const double> scores);

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
};

/// Text format: header, config settings, vocabulary, then each registered
/// tensor as name, shape and hex-float values, so reloading is bit-exact.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmnrank
