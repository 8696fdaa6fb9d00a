#include "dmnrank/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmnrank/error.hpp"
#include "kernels.hpp"

namespace dmnrank::nn {

Interaction parse_interaction(std::string_view name) {
  if (name == "dot") return Interaction::dot;
  if (name == "cosine") return Interaction::cosine;
  if (name == "bilinear") return Interaction::bilinear;
  throw ConfigError("unknown interaction '" + std::string(name) + "' (expected dot|cosine|bilinear)");
}

std::string_view to_string(Interaction mode) {
  switch (mode) {
    case Interaction::dot: return "dot";
    case Interaction::cosine: return "cosine";
    case Interaction::bilinear: return "bilinear";
  }
  return "dot";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_interaction_inputs(const Tensor& a, const Tensor& b, Interaction mode, const Tensor* bilinear) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("interaction: operands " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                     " must be matrices with equal width");
  if (mode == Interaction::bilinear) {
    if (!bilinear) throw ShapeError("interaction: bilinear mode needs a transformation matrix");
    require_shape(*bilinear, {a.dim(1), a.dim(1)}, "bilinear matrix");
  }
}

// B A^T for bilinear, i.e. row j holds (A b_j).
Tensor transform_rows(const Tensor& b, const Tensor& bilinear) {
  Tensor out({b.dim(0), b.dim(1)});
  for (std::size_t j = 0; j < b.dim(0); ++j) detail::gemv_acc(bilinear, b.row(j), out.row(j));
  return out;
}

}  // namespace

Tensor interaction_matrix(const Tensor& a, const Tensor& b, Interaction mode, const Tensor* bilinear) {
  check_interaction_inputs(a, b, mode, bilinear);
  const auto la = a.dim(0), lb = b.dim(0);
  Tensor out({la, lb});
  switch (mode) {
    case Interaction::dot:
      for (std::size_t i = 0; i < la; ++i)
        for (std::size_t j = 0; j < lb; ++j) out(i, j) = dot(a.row(i), b.row(j));
      break;
    case Interaction::cosine: {
      std::vector<double> nb(lb);
      for (std::size_t j = 0; j < lb; ++j) nb[j] = std::sqrt(dot(b.row(j), b.row(j)));
      for (std::size_t i = 0; i < la; ++i) {
        const double na = std::sqrt(dot(a.row(i), a.row(i)));
        for (std::size_t j = 0; j < lb; ++j)
          out(i, j) = (na == 0.0 || nb[j] == 0.0) ? 0.0 : dot(a.row(i), b.row(j)) / (na * nb[j]);
      }
      break;
    }
    case Interaction::bilinear: {
      auto ab = transform_rows(b, *bilinear);
      for (std::size_t i = 0; i < la; ++i)
        for (std::size_t j = 0; j < lb; ++j) out(i, j) = dot(a.row(i), ab.row(j));
      break;
    }
  }
  return out;
}

void interaction_backward(const Tensor& a, const Tensor& b, Interaction mode, const Tensor* bilinear,
                          const Tensor& d_out, Tensor& d_a, Tensor& d_b, Tensor* d_bilinear) {
  check_interaction_inputs(a, b, mode, bilinear);
  const auto la = a.dim(0), lb = b.dim(0);
  switch (mode) {
    case Interaction::dot:
      for (std::size_t i = 0; i < la; ++i)
        for (std::size_t j = 0; j < lb; ++j) {
          const double g = d_out(i, j);
          if (g == 0.0) continue;
          detail::axpy(b.row(j), d_a.row(i), g);
          detail::axpy(a.row(i), d_b.row(j), g);
        }
      break;
    case Interaction::cosine: {
      std::vector<double> na(la), nb(lb);
      for (std::size_t i = 0; i < la; ++i) na[i] = std::sqrt(dot(a.row(i), a.row(i)));
      for (std::size_t j = 0; j < lb; ++j) nb[j] = std::sqrt(dot(b.row(j), b.row(j)));
      for (std::size_t i = 0; i < la; ++i)
        for (std::size_t j = 0; j < lb; ++j) {
          const double g = d_out(i, j);
          if (g == 0.0 || na[i] == 0.0 || nb[j] == 0.0) continue;
          const double inv = 1.0 / (na[i] * nb[j]);
          const double m = dot(a.row(i), b.row(j)) * inv;
          detail::axpy(b.row(j), d_a.row(i), g * inv);
          detail::axpy(a.row(i), d_a.row(i), -g * m / (na[i] * na[i]));
          detail::axpy(a.row(i), d_b.row(j), g * inv);
          detail::axpy(b.row(j), d_b.row(j), -g * m / (nb[j] * nb[j]));
        }
      break;
    }
    case Interaction::bilinear: {
      const auto& w = *bilinear;
      auto ab = transform_rows(b, w);  // rows A b_j
      Tensor d_ab({lb, b.dim(1)});     // sum_i g_ij a_i
      for (std::size_t i = 0; i < la; ++i)
        for (std::size_t j = 0; j < lb; ++j) {
          const double g = d_out(i, j);
          if (g == 0.0) continue;
          detail::axpy(ab.row(j), d_a.row(i), g);
          detail::axpy(a.row(i), d_ab.row(j), g);
        }
      for (std::size_t j = 0; j < lb; ++j) {
        detail::gemv_t_acc(w, d_ab.row(j), d_b.row(j));
        if (d_bilinear) detail::outer_acc(*d_bilinear, d_ab.row(j), b.row(j));
      }
      break;
    }
  }
}

// ---- convolution ----------------------------------------------------------

ConvPadding parse_padding(std::string_view name) {
  if (name == "valid") return ConvPadding::valid;
  if (name == "same") return ConvPadding::same;
  throw ConfigError("unknown padding '" + std::string(name) + "' (expected valid|same)");
}

std::string_view to_string(ConvPadding padding) { return padding == ConvPadding::valid ? "valid" : "same"; }

void ConvLayerConfig::validate() const {
  if (kernel_rows < 1 || kernel_cols < 1 || kernels < 1 || pool_rows < 1 || pool_cols < 1 || in_channels < 1)
    throw ConfigError("convolution dimensions must all be >= 1");
}

ConvParams::ConvParams(std::size_t kernels, std::size_t in_channels, std::size_t kernel_rows,
                       std::size_t kernel_cols)
    : weight({kernels, in_channels, kernel_rows, kernel_cols}), bias({kernels}) {}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvPadding padding) {
  if (padding == ConvPadding::same) return in;
  return in >= kernel ? in - kernel + 1 : 0;
}

std::size_t pool_output_size(std::size_t in, std::size_t window, bool partial) {
  return partial ? (in + window - 1) / window : in / window;
}

namespace {

struct ConvGeometry {
  std::size_t channels, rows, cols, kernels, kr, kc, out_rows, out_cols;
  std::ptrdiff_t pad_r, pad_c;
};

ConvGeometry conv_geometry(const Tensor& input, const ConvParams& p, ConvPadding padding) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be C x H x W, got " + shape_string(input.shape()));
  if (p.weight.rank() != 4) throw ShapeError("conv2d: weight must be K x C x r_w x r_h");
  require_shape(p.bias, {p.kernels()}, "conv2d bias");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), p.kernels(), p.kernel_rows(), p.kernel_cols(), 0, 0,
                 0, 0};
  if (g.channels != p.in_channels())
    throw ShapeError("conv2d: input has " + std::to_string(g.channels) + " channels, kernels expect " +
                     std::to_string(p.in_channels()));
  if (padding == ConvPadding::valid && (g.rows < g.kr || g.cols < g.kc))
    throw ShapeError("conv2d: kernel " + std::to_string(g.kr) + "x" + std::to_string(g.kc) +
                     " larger than input " + std::to_string(g.rows) + "x" + std::to_string(g.cols));
  g.out_rows = conv_output_size(g.rows, g.kr, padding);
  g.out_cols = conv_output_size(g.cols, g.kc, padding);
  if (padding == ConvPadding::same) {
    g.pad_r = static_cast<std::ptrdiff_t>((g.kr - 1) / 2);
    g.pad_c = static_cast<std::ptrdiff_t>((g.kc - 1) / 2);
  }
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p, ConvPadding padding, ConvTrace* trace) {
  const auto g = conv_geometry(input, p, padding);
  Tensor pre({g.kernels, g.out_rows, g.out_cols});
  const auto rows = static_cast<std::ptrdiff_t>(g.rows), cols = static_cast<std::ptrdiff_t>(g.cols);
  for (std::size_t k = 0; k < g.kernels; ++k)
    for (std::size_t i = 0; i < g.out_rows; ++i)
      for (std::size_t j = 0; j < g.out_cols; ++j) {
        double s = p.bias[k];
        for (std::size_t c = 0; c < g.channels; ++c)
          for (std::size_t u = 0; u < g.kr; ++u) {
            const auto r = static_cast<std::ptrdiff_t>(i + u) - g.pad_r;
            if (r < 0 || r >= rows) continue;
            for (std::size_t v = 0; v < g.kc; ++v) {
              const auto q = static_cast<std::ptrdiff_t>(j + v) - g.pad_c;
              if (q < 0 || q >= cols) continue;
              s += p.weight[((k * g.channels + c) * g.kr + u) * g.kc + v] *
                   input(c, static_cast<std::size_t>(r), static_cast<std::size_t>(q));
            }
          }
        pre(k, i, j) = s;
      }
  Tensor out = pre;
  for (auto& v : out.values()) v = std::max(v, 0.0);
  if (trace) {
    trace->input = input;
    trace->preactivation = std::move(pre);
  }
  return out;
}

void conv2d_backward(const ConvTrace& trace, const Tensor& d_out, const ConvParams& p, ConvPadding padding,
                     ConvParams& grads, Tensor* d_input) {
  const auto& input = trace.input;
  const auto g = conv_geometry(input, p, padding);
  require_shape(d_out, trace.preactivation.shape(), "conv2d upstream gradient");
  if (d_input && !d_input->same_shape(input)) *d_input = zeros_like(input);
  const auto rows = static_cast<std::ptrdiff_t>(g.rows), cols = static_cast<std::ptrdiff_t>(g.cols);
  for (std::size_t k = 0; k < g.kernels; ++k)
    for (std::size_t i = 0; i < g.out_rows; ++i)
      for (std::size_t j = 0; j < g.out_cols; ++j) {
        if (trace.preactivation(k, i, j) <= 0.0) continue;
        const double d = d_out(k, i, j);
        if (d == 0.0) continue;
        grads.bias[k] += d;
        for (std::size_t c = 0; c < g.channels; ++c)
          for (std::size_t u = 0; u < g.kr; ++u) {
            const auto r = static_cast<std::ptrdiff_t>(i + u) - g.pad_r;
            if (r < 0 || r >= rows) continue;
            for (std::size_t v = 0; v < g.kc; ++v) {
              const auto q = static_cast<std::ptrdiff_t>(j + v) - g.pad_c;
              if (q < 0 || q >= cols) continue;
              const auto w = ((k * g.channels + c) * g.kr + u) * g.kc + v;
              const auto rr = static_cast<std::size_t>(r), qq = static_cast<std::size_t>(q);
              grads.weight[w] += d * input(c, rr, qq);
              if (d_input) (*d_input)(c, rr, qq) += d * p.weight[w];
            }
          }
      }
}

// ---- pooling --------------------------------------------------------------

Tensor max_pool(const Tensor& input, std::size_t pool_rows, std::size_t pool_cols, bool partial,
                PoolTrace* trace) {
  if (input.rank() != 3) throw ShapeError("max_pool: input must be K x H x W, got " + shape_string(input.shape()));
  if (pool_rows < 1 || pool_cols < 1) throw ConfigError("max_pool: window must be >= 1");
  const auto k = input.dim(0), h = input.dim(1), w = input.dim(2);
  const auto oh = pool_output_size(h, pool_rows, partial), ow = pool_output_size(w, pool_cols, partial);
  Tensor out({k, oh, ow});
  if (trace) {
    trace->input_shape = input.shape();
    trace->pool_rows = pool_rows;
    trace->pool_cols = pool_cols;
    trace->argmax.assign(out.size(), 0);
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t s = i * pool_rows; s < std::min(h, (i + 1) * pool_rows); ++s)
          for (std::size_t t = j * pool_cols; t < std::min(w, (j + 1) * pool_cols); ++t) {
            const auto idx = (c * h + s) * w + t;
            if (input[idx] > best) {
              best = input[idx];
              arg = idx;
            }
          }
        out(c, i, j) = best;
        if (trace) trace->argmax[(c * oh + i) * ow + j] = arg;
      }
  return out;
}

Tensor max_pool_backward(const PoolTrace& trace, const Tensor& d_out) {
  Tensor d_in(trace.input_shape);
  if (d_out.size() != trace.argmax.size()) throw ShapeError("max_pool_backward: gradient size mismatch");
  for (std::size_t o = 0; o < trace.argmax.size(); ++o) d_in[trace.argmax[o]] += d_out[o];
  return d_in;
}

// ---- dense ----------------------------------------------------------------

std::vector<double> linear(std::span<const double> x, const LinearParams& p) {
  if (p.weight.rank() != 2 || x.size() != p.weight.dim(1))
    throw ShapeError("linear: input of size " + std::to_string(x.size()) + " vs weight " +
                     shape_string(p.weight.shape()));
  std::vector<double> y(p.bias.values().begin(), p.bias.values().end());
  detail::gemv_acc(p.weight, x, y);
  return y;
}

void linear_backward(std::span<const double> x, std::span<const double> d_out, const LinearParams& p,
                     LinearParams& grads, std::span<double> d_x) {
  detail::outer_acc(grads.weight, d_out, x);
  detail::axpy(d_out, grads.bias.values());
  detail::gemv_t_acc(p.weight, d_out, d_x);
}

MlpParams::MlpParams(std::size_t input, std::size_t hidden)
    : w1({hidden, input}), b1({hidden}), w2({2, hidden}), b2({2}) {}

double mlp_score(std::span<const double> features, const MlpParams& p, MlpTrace* trace) {
  if (features.size() != p.input_dim())
    throw ShapeError("mlp_score: feature size " + std::to_string(features.size()) + " vs input dim " +
                     std::to_string(p.input_dim()));
  require_shape(p.w2, {2, p.hidden_dim()}, "mlp w2");
  std::vector<double> hidden(p.b1.values().begin(), p.b1.values().end());
  detail::gemv_acc(p.w1, features, hidden);
  for (auto& v : hidden) v = std::tanh(v);
  std::vector<double> logits(p.b2.values().begin(), p.b2.values().end());
  detail::gemv_acc(p.w2, hidden, logits);
  const double top = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - top), e1 = std::exp(logits[1] - top);
  const double score = e1 / (e0 + e1);
  if (trace) {
    trace->input.assign(features.begin(), features.end());
    trace->hidden = std::move(hidden);
    trace->score = score;
  }
  return score;
}

void mlp_backward(const MlpTrace& trace, double d_score, const MlpParams& p, MlpParams& grads,
                  std::span<double> d_features) {
  const double s = trace.score;
  const double dl1 = d_score * s * (1.0 - s);
  const double d_logits[2] = {-dl1, dl1};
  detail::outer_acc(grads.w2, d_logits, trace.hidden);
  detail::axpy(d_logits, grads.b2.values());
  std::vector<double> d_hidden(trace.hidden.size(), 0.0);
  detail::gemv_t_acc(p.w2, d_logits, d_hidden);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= 1.0 - trace.hidden[i] * trace.hidden[i];
  detail::outer_acc(grads.w1, d_hidden, trace.input);
  detail::axpy(d_hidden, grads.b1.values());
  detail::gemv_t_acc(p.w1, d_hidden, d_features);
}

std::vector<double> dropout(std::span<const double> x, double rate, bool training, std::mt19937_64& rng,
                            std::vector<double>* mask) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  std::vector<double> out(x.begin(), x.end());
  if (mask) mask->assign(x.size(), 1.0);
  if (!training || rate == 0.0) return out;
  std::bernoulli_distribution drop(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = drop(rng) ? 0.0 : keep_scale;
    out[i] *= m;
    if (mask) (*mask)[i] = m;
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng) {
  return Tensor(x.shape(), dropout(x.values(), rate, training, rng));
}

}  // namespace dmnrank::nn
