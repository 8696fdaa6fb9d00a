#pragma once

// Small dense helpers shared by the layer implementations.

#include <cmath>
#include <cstddef>
#include <span>

#include "dmnrank/nn/tensor.hpp"

namespace dmnrank::nn::detail {

/// y += W x, W is rows x cols.
inline void gemv_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  const auto rows = w.dim(0), cols = w.dim(1);
  const double* wp = w.data();
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    const double* wr = wp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) s += wr[j] * x[j];
    y[i] += s;
  }
}

/// y += W^T g.
inline void gemv_t_acc(const Tensor& w, std::span<const double> g, std::span<double> y) {
  const auto rows = w.dim(0), cols = w.dim(1);
  const double* wp = w.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    const double* wr = wp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += wr[j] * gi;
  }
}

/// G += g x^T.
inline void outer_acc(Tensor& grad, std::span<const double> g, std::span<const double> x) {
  const auto rows = grad.dim(0), cols = grad.dim(1);
  double* gp = grad.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    double* gr = gp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) gr[j] += gi * x[j];
  }
}

inline void axpy(std::span<const double> x, std::span<double> y, double a = 1.0) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace dmnrank::nn::detail
