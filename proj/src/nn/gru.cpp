#include "dmnrank/nn/gru.hpp"

#include <cmath>

#include "dmnrank/error.hpp"
#include "kernels.hpp"

namespace dmnrank::nn {

using detail::gemv_acc;
using detail::gemv_t_acc;
using detail::outer_acc;
using detail::sigmoid;

GruParams::GruParams(std::size_t input_dim, std::size_t hidden_dim)
    : w_z({hidden_dim, input_dim}),
      w_r({hidden_dim, input_dim}),
      w_h({hidden_dim, input_dim}),
      u_z({hidden_dim, hidden_dim}),
      u_r({hidden_dim, hidden_dim}),
      u_h({hidden_dim, hidden_dim}),
      b_z({hidden_dim}),
      b_r({hidden_dim}),
      b_h({hidden_dim}) {}

void GruParams::validate() const {
  if (w_z.rank() != 2) throw ShapeError("GRU W_z must be a matrix");
  auto o = w_z.dim(0), d = w_z.dim(1);
  for (const auto* w : {&w_z, &w_r, &w_h}) require_shape(*w, {o, d}, "GRU input weights");
  for (const auto* u : {&u_z, &u_r, &u_h}) require_shape(*u, {o, o}, "GRU recurrent weights");
  for (const auto* b : {&b_z, &b_r, &b_h}) require_shape(*b, {o}, "GRU bias");
}

std::vector<double> gru_step(std::span<const double> x, std::span<const double> h_prev, const GruParams& p,
                             GruStepCache* cache) {
  const auto o = p.hidden_dim();
  if (x.size() != p.input_dim() || h_prev.size() != o)
    throw ShapeError("gru_step: input " + std::to_string(x.size()) + "/state " + std::to_string(h_prev.size()) +
                     " do not match params " + std::to_string(p.input_dim()) + "->" + std::to_string(o));

  std::vector<double> z(p.b_z.values().begin(), p.b_z.values().end());
  std::vector<double> r(p.b_r.values().begin(), p.b_r.values().end());
  std::vector<double> ht(p.b_h.values().begin(), p.b_h.values().end());
  gemv_acc(p.w_z, x, z);
  gemv_acc(p.u_z, h_prev, z);
  gemv_acc(p.w_r, x, r);
  gemv_acc(p.u_r, h_prev, r);
  for (std::size_t i = 0; i < o; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
  }
  std::vector<double> rh(o);
  for (std::size_t i = 0; i < o; ++i) rh[i] = r[i] * h_prev[i];
  gemv_acc(p.w_h, x, ht);
  gemv_acc(p.u_h, rh, ht);
  std::vector<double> h(o);
  for (std::size_t i = 0; i < o; ++i) {
    ht[i] = std::tanh(ht[i]);
    h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * ht[i];
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h_prev.begin(), h_prev.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->h_tilde = std::move(ht);
  }
  return h;
}

void gru_step_backward(const GruStepCache& c, std::span<const double> d_h, const GruParams& p, GruParams& g,
                       std::span<double> d_x, std::span<double> d_h_prev) {
  const auto o = p.hidden_dim();
  std::vector<double> da_z(o), da_r(o), da_h(o), rh(o), d_rh(o, 0.0);
  for (std::size_t i = 0; i < o; ++i) {
    const double dz = d_h[i] * (c.h_tilde[i] - c.h_prev[i]);
    const double dht = d_h[i] * c.z[i];
    d_h_prev[i] += d_h[i] * (1.0 - c.z[i]);
    da_h[i] = dht * (1.0 - c.h_tilde[i] * c.h_tilde[i]);
    da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
    rh[i] = c.r[i] * c.h_prev[i];
  }
  outer_acc(g.w_h, da_h, c.x);
  outer_acc(g.u_h, da_h, rh);
  detail::axpy(da_h, g.b_h.values());
  gemv_t_acc(p.w_h, da_h, d_x);
  gemv_t_acc(p.u_h, da_h, d_rh);
  for (std::size_t i = 0; i < o; ++i) {
    const double dr = d_rh[i] * c.h_prev[i];
    d_h_prev[i] += d_rh[i] * c.r[i];
    da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }
  outer_acc(g.w_r, da_r, c.x);
  outer_acc(g.u_r, da_r, c.h_prev);
  detail::axpy(da_r, g.b_r.values());
  gemv_t_acc(p.w_r, da_r, d_x);
  gemv_t_acc(p.u_r, da_r, d_h_prev);

  outer_acc(g.w_z, da_z, c.x);
  outer_acc(g.u_z, da_z, c.h_prev);
  detail::axpy(da_z, g.b_z.values());
  gemv_t_acc(p.w_z, da_z, d_x);
  gemv_t_acc(p.u_z, da_z, d_h_prev);
}

Tensor gru_sequence(const Tensor& seq, const GruParams& p, bool reverse, GruTrace* trace) {
  if (seq.rank() != 2 || seq.dim(1) != p.input_dim())
    throw ShapeError("gru_sequence: sequence " + shape_string(seq.shape()) + " vs input dim " +
                     std::to_string(p.input_dim()));
  const auto len = seq.dim(0), o = p.hidden_dim();
  Tensor out({len, o});
  std::vector<double> h(o, 0.0);
  if (trace) {
    trace->steps.assign(len, {});
    trace->reverse = reverse;
  }
  for (std::size_t k = 0; k < len; ++k) {
    const auto t = reverse ? len - 1 - k : k;
    h = gru_step(seq.row(t), h, p, trace ? &trace->steps[k] : nullptr);
    std::copy(h.begin(), h.end(), out.row(t).begin());
  }
  return out;
}

void gru_sequence_backward(const GruTrace& trace, const Tensor& d_out, const GruParams& p, GruParams& grads,
                           Tensor& d_seq) {
  const auto len = trace.steps.size(), o = p.hidden_dim();
  std::vector<double> carry(o, 0.0);
  for (std::size_t k = len; k-- > 0;) {
    const auto t = trace.reverse ? len - 1 - k : k;
    std::vector<double> d_h(carry);
    detail::axpy(d_out.row(t), d_h);
    std::fill(carry.begin(), carry.end(), 0.0);
    gru_step_backward(trace.steps[k], d_h, p, grads, d_seq.row(t), carry);
  }
}

Tensor bigru(const Tensor& seq, const GruParams& fwd, const GruParams& bwd, BiGruTrace* trace) {
  if (fwd.input_dim() != bwd.input_dim()) throw ShapeError("bigru: direction input dims differ");
  auto f = gru_sequence(seq, fwd, false, trace ? &trace->forward : nullptr);
  auto b = gru_sequence(seq, bwd, true, trace ? &trace->backward : nullptr);
  const auto len = seq.dim(0), of = fwd.hidden_dim(), ob = bwd.hidden_dim();
  Tensor out({len, of + ob});
  for (std::size_t t = 0; t < len; ++t) {
    auto row = out.row(t);
    std::copy(f.row(t).begin(), f.row(t).end(), row.begin());
    std::copy(b.row(t).begin(), b.row(t).end(), row.begin() + static_cast<std::ptrdiff_t>(of));
  }
  return out;
}

void bigru_backward(const BiGruTrace& trace, const Tensor& d_out, const GruParams& fwd, const GruParams& bwd,
                    GruParams& g_fwd, GruParams& g_bwd, Tensor& d_seq) {
  const auto len = d_out.dim(0), of = fwd.hidden_dim(), ob = bwd.hidden_dim();
  Tensor df({len, of}), db({len, ob});
  for (std::size_t t = 0; t < len; ++t) {
    auto row = d_out.row(t);
    std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(of), df.row(t).begin());
    std::copy(row.begin() + static_cast<std::ptrdiff_t>(of), row.end(), db.row(t).begin());
  }
  gru_sequence_backward(trace.forward, df, fwd, g_fwd, d_seq);
  gru_sequence_backward(trace.backward, db, bwd, g_bwd, d_seq);
}

}  // namespace dmnrank::nn
