#ifndef STEERLAB_MAT_HPP
#define STEERLAB_MAT_HPP

#include <cassert>
#include <cstddef>
#include <vector>

namespace steerlab {

// Dense row-major double matrix. Deliberately minimal: the model kernels do
// their own loops so that per-row results are identical whether a row is
// computed alone or as part of the full matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  std::size_t size() const { return data.size(); }
};

// y[0..n) = W^T x where W is stored row-major as (n_in x n_out): the usual
// "activation row times weight matrix" product. k-ascending accumulation
// order, one output at a time.
inline void affine_row(const double* x, const double* w, const double* b, int n_in,
                       int n_out, double* y) {
  for (int o = 0; o < n_out; ++o) y[o] = (b != nullptr) ? b[o] : 0.0;
  for (int k = 0; k < n_in; ++k) {
    const double xk = x[k];
    const double* wrow = w + static_cast<std::size_t>(k) * n_out;
    for (int o = 0; o < n_out; ++o) y[o] += xk * wrow[o];
  }
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace steerlab

#endif  // STEERLAB_MAT_HPP
