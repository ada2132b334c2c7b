#ifndef SENSEDEF_TENSOR_HPP
#define SENSEDEF_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sensedef/error.hpp"

namespace sensedef {

/// Named row-major matrix; vectors are stored with cols == 1.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c) : name(std::move(n)), rows(r), cols(c), data(r * c, 0.0) {}

  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Tensor&) const = default;
};

using TensorList = std::vector<Tensor>;

/// Same names and shapes, all zeros.
inline TensorList zeros_like(const TensorList& ts) {
  TensorList out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.emplace_back(t.name, t.rows, t.cols);
  return out;
}

inline void check_congruent(const TensorList& a, const TensorList& b) {
  if (a.size() != b.size()) throw ArgumentError("tensor lists differ in length");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].rows != b[i].rows || a[i].cols != b[i].cols)
      throw ArgumentError("tensor '" + a[i].name + "' shape mismatch");
}

inline void add_into(TensorList& acc, const TensorList& g) {
  check_congruent(acc, g);
  for (std::size_t i = 0; i < acc.size(); ++i)
    for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i].data[k] += g[i].data[k];
}

inline void fill_zero(TensorList& ts) {
  for (auto& t : ts) std::fill(t.data.begin(), t.data.end(), 0.0);
}

inline double squared_norm(const TensorList& ts) {
  double s = 0.0;
  for (const auto& t : ts)
    for (double x : t.data) s += x * x;
  return s;
}

inline void scale(TensorList& ts, double f) {
  for (auto& t : ts)
    for (double& x : t.data) x *= f;
}

/// y += W x
inline void gemv_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.data.data() + r * w.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

/// x += W^T y
inline void gemv_t_acc(const Tensor& w, std::span<const double> y, std::span<double> x) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.data.data() + r * w.cols;
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < w.cols; ++c) x[c] += row[c] * yr;
  }
}

/// G += a b^T
inline void outer_acc(Tensor& g, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* row = g.data.data() + r * g.cols;
    for (std::size_t c = 0; c < g.cols; ++c) row[c] += ar * b[c];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace sensedef

#endif // SENSEDEF_TENSOR_HPP
