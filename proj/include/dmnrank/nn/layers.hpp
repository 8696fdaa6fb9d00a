#pragma once

#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "dmnrank/nn/tensor.hpp"

namespace dmnrank::nn {

// ---- interaction matrices -------------------------------------------------

enum class Interaction { dot, cosine, bilinear };

Interaction parse_interaction(std::string_view name);
std::string_view to_string(Interaction mode);

/// Pairwise similarity of the rows of `a` (l_a x d) and `b` (l_b x d), giving
/// an l_a x l_b matrix. Cosine is 0 where either row has zero norm. Bilinear
/// computes a_i^T A b_j and requires `bilinear` (d x d).
Tensor interaction_matrix(const Tensor& a, const Tensor& b, Interaction mode, const Tensor* bilinear = nullptr);

/// Adds gradients into d_a, d_b and (bilinear only) d_bilinear.
void interaction_backward(const Tensor& a, const Tensor& b, Interaction mode, const Tensor* bilinear,
                          const Tensor& d_out, Tensor& d_a, Tensor& d_b, Tensor* d_bilinear);

// ---- convolution + pooling ------------------------------------------------

enum class ConvPadding { valid, same };

ConvPadding parse_padding(std::string_view name);
std::string_view to_string(ConvPadding padding);

struct ConvLayerConfig {
  std::size_t kernel_rows = 3;  // r_w, along the response axis
  std::size_t kernel_cols = 3;  // r_h, along the utterance axis
  std::size_t kernels = 8;
  std::size_t pool_rows = 3;
  std::size_t pool_cols = 3;
  std::size_t in_channels = 2;
  ConvPadding padding = ConvPadding::valid;
  bool pool_partial = true;

  void validate() const;
};

struct ConvParams {
  Tensor weight;  // kernels x in_channels x kernel_rows x kernel_cols
  Tensor bias;    // kernels

  ConvParams() = default;
  ConvParams(std::size_t kernels, std::size_t in_channels, std::size_t kernel_rows, std::size_t kernel_cols);

  std::size_t kernels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_rows() const { return weight.dim(2); }
  std::size_t kernel_cols() const { return weight.dim(3); }

  template <class F>
  void for_each(F&& f) {
    f("weight", weight), f("bias", bias);
  }
};

struct ConvTrace {
  Tensor input;
  Tensor preactivation;
};

/// Cross-correlation summed over input channels plus bias, then ReLU.
/// Input is C x H x W; output is K x H' x W'.
Tensor conv2d(const Tensor& input, const ConvParams& p, ConvPadding padding = ConvPadding::valid,
              ConvTrace* trace = nullptr);

/// Accumulates into grads; writes the input gradient into d_input when given.
void conv2d_backward(const ConvTrace& trace, const Tensor& d_out, const ConvParams& p, ConvPadding padding,
                     ConvParams& grads, Tensor* d_input);

/// Output spatial size of conv2d for one axis.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvPadding padding);
std::size_t pool_output_size(std::size_t in, std::size_t window, bool partial);

struct PoolTrace {
  Shape input_shape;
  std::size_t pool_rows = 1, pool_cols = 1;
  std::vector<std::size_t> argmax;
};

/// Non-overlapping window maxima, stride equal to the window. With `partial`,
/// edge windows that run past the input take the max over the cells they
/// cover; otherwise they are dropped.
Tensor max_pool(const Tensor& input, std::size_t pool_rows, std::size_t pool_cols, bool partial = true,
                PoolTrace* trace = nullptr);

Tensor max_pool_backward(const PoolTrace& trace, const Tensor& d_out);

// ---- dense layers ---------------------------------------------------------

struct LinearParams {
  Tensor weight;  // out x in
  Tensor bias;    // out

  LinearParams() = default;
  LinearParams(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}

  template <class F>
  void for_each(F&& f) {
    f("weight", weight), f("bias", bias);
  }
};

std::vector<double> linear(std::span<const double> x, const LinearParams& p);
void linear_backward(std::span<const double> x, std::span<const double> d_out, const LinearParams& p,
                     LinearParams& grads, std::span<double> d_x);

/// Two-layer scorer: hidden = tanh(w1 x + b1), logits = w2 hidden + b2 with two
/// classes, score = softmax(logits)[1].
struct MlpParams {
  Tensor w1;  // hidden x input
  Tensor b1;  // hidden
  Tensor w2;  // 2 x hidden
  Tensor b2;  // 2

  MlpParams() = default;
  MlpParams(std::size_t input, std::size_t hidden);

  std::size_t input_dim() const { return w1.dim(1); }
  std::size_t hidden_dim() const { return w1.dim(0); }

  template <class F>
  void for_each(F&& f) {
    f("w1", w1), f("b1", b1), f("w2", w2), f("b2", b2);
  }
};

struct MlpTrace {
  std::vector<double> input;
  std::vector<double> hidden;
  double score = 0.0;
};

double mlp_score(std::span<const double> features, const MlpParams& p, MlpTrace* trace = nullptr);
void mlp_backward(const MlpTrace& trace, double d_score, const MlpParams& p, MlpParams& grads,
                  std::span<double> d_features);

/// Inverted dropout. `mask` receives the per-element multiplier (0 or
/// 1/(1-rate)); it is all ones at evaluation time.
std::vector<double> dropout(std::span<const double> x, double rate, bool training, std::mt19937_64& rng,
                            std::vector<double>* mask = nullptr);
Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng);

}  // namespace dmnrank::nn
