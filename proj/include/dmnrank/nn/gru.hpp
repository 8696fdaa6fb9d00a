#pragma once

#include <span>
#include <string>
#include <vector>

#include "dmnrank/nn/tensor.hpp"

namespace dmnrank::nn {

/// Update gate z, reset gate r and candidate state h~, each with an input
/// matrix W (O x d_in), a recurrent matrix U (O x O) and a bias b (O).
struct GruParams {
  Tensor w_z, w_r, w_h;
  Tensor u_z, u_r, u_h;
  Tensor b_z, b_r, b_h;

  GruParams() = default;
  GruParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return w_z.dim(1); }
  std::size_t hidden_dim() const { return w_z.dim(0); }
  void validate() const;

  template <class F>
  void for_each(F&& f) {
    f("w_z", w_z), f("w_r", w_r), f("w_h", w_h);
    f("u_z", u_z), f("u_r", u_r), f("u_h", u_h);
    f("b_z", b_z), f("b_r", b_r), f("b_h", b_h);
  }
};

struct GruStepCache {
  std::vector<double> x, h_prev, z, r, h_tilde;
};

/// h = (1 - z) * h_prev + z * h~ with
///   z  = sigmoid(W_z x + U_z h_prev + b_z)
///   r  = sigmoid(W_r x + U_r h_prev + b_r)
///   h~ = tanh(W_h x + U_h (r * h_prev) + b_h)
std::vector<double> gru_step(std::span<const double> x, std::span<const double> h_prev, const GruParams& p,
                             GruStepCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and adds into d_x / d_h_prev.
void gru_step_backward(const GruStepCache& cache, std::span<const double> d_h, const GruParams& p,
                       GruParams& grads, std::span<double> d_x, std::span<double> d_h_prev);

struct GruTrace {
  std::vector<GruStepCache> steps;
  bool reverse = false;
};

/// Runs over the rows of `seq` (len x d_in) from a zero state, in reverse
/// order when `reverse` is set. Row t of the result is the state after
/// consuming row t.
Tensor gru_sequence(const Tensor& seq, const GruParams& p, bool reverse = false, GruTrace* trace = nullptr);

/// d_out is len x O; adds into d_seq (len x d_in).
void gru_sequence_backward(const GruTrace& trace, const Tensor& d_out, const GruParams& p, GruParams& grads,
                           Tensor& d_seq);

struct BiGruTrace {
  GruTrace forward, backward;
};

/// Row t = [forward state t ; backward state t], shape len x 2O.
Tensor bigru(const Tensor& seq, const GruParams& fwd, const GruParams& bwd, BiGruTrace* trace = nullptr);

void bigru_backward(const BiGruTrace& trace, const Tensor& d_out, const GruParams& fwd, const GruParams& bwd,
                    GruParams& g_fwd, GruParams& g_bwd, Tensor& d_seq);

}  // namespace dmnrank::nn
