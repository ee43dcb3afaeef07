#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cubenmt/error.hpp"

namespace cubenmt {

// Dense row-major tensor. The production build stores 32-bit reals; the
// element type is a template parameter so the same math can be instantiated
// at 64-bit for numerical verification. Reductions accumulate in double.
template <class Real>
struct TensorT {
  std::vector<int> shape;
  std::vector<Real> data;

  TensorT() = default;

  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(checked_count(shape)), Real(0));
  }

  TensorT(std::vector<int> s, std::vector<Real> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<size_t>(checked_count(shape)) != data.size())
      throw DimensionError("tensor data length does not match shape");
  }

  static int64_t checked_count(const std::vector<int>& s) {
    if (s.empty()) throw DimensionError("tensor needs at least one extent");
    int64_t n = 1;
    for (int e : s) {
      if (e <= 0) throw DimensionError("tensor extents must be positive");
      n *= e;
    }
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape[0]; }
  int cols() const {
    assert(shape.size() == 2);
    return shape[1];
  }

  Real& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  Real operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  Real& at2(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  Real at2(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

  Real* row_ptr(int i) {
    assert(shape.size() == 2);
    return data.data() + static_cast<size_t>(i) * shape[1];
  }
  const Real* row_ptr(int i) const {
    assert(shape.size() == 2);
    return data.data() + static_cast<size_t>(i) * shape[1];
  }

  void fill(Real v) { data.assign(data.size(), v); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;

namespace detail {
template <class Real>
inline void require(bool cond, const char* msg) {
  if (!cond) throw DimensionError(msg);
}

template <class Real>
inline void check_finite(const TensorT<Real>& t, const char* what) {
  for (Real v : t.data)
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError(std::string(what) + " produced a non-finite value");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Raw kernels used on hot paths. No shape validation; callers hold the
// invariants. All dot products accumulate at 64-bit.
// ---------------------------------------------------------------------------

template <class Real>
inline Real dot(const Real* a, const Real* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return static_cast<Real>(acc);
}

// out = W x, W is (m x n) row-major.
template <class Real>
inline void matvec(const TensorT<Real>& w, const Real* x, Real* out) {
  const int m = w.shape[0], n = w.shape[1];
  for (int i = 0; i < m; ++i) out[i] = dot(w.data.data() + static_cast<size_t>(i) * n, x, n);
}

// out += W x
template <class Real>
inline void matvec_add(const TensorT<Real>& w, const Real* x, Real* out) {
  const int m = w.shape[0], n = w.shape[1];
  for (int i = 0; i < m; ++i)
    out[i] += dot(w.data.data() + static_cast<size_t>(i) * n, x, n);
}

// out += W^T v, W is (m x n), v has length m, out has length n.
template <class Real>
inline void mat_tvec_add(const TensorT<Real>& w, const Real* v, Real* out) {
  const int m = w.shape[0], n = w.shape[1];
  for (int i = 0; i < m; ++i) {
    const Real vi = v[i];
    if (vi == Real(0)) continue;
    const Real* row = w.data.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) out[j] += vi * row[j];
  }
}

// W += v u^T, W is (m x n), v length m, u length n.
template <class Real>
inline void outer_add(TensorT<Real>& w, const Real* v, const Real* u) {
  const int m = w.shape[0], n = w.shape[1];
  for (int i = 0; i < m; ++i) {
    const Real vi = v[i];
    if (vi == Real(0)) continue;
    Real* row = w.data.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) row[j] += vi * u[j];
  }
}

template <class Real>
inline void axpy(Real a, const Real* x, Real* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class Real>
inline Real log_sum_exp(const Real* v, int n) {
  Real mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(static_cast<double>(v[i] - mx));
  return mx + static_cast<Real>(std::log(acc));
}

template <class Real>
inline Real stable_sigmoid(Real x) {
  if (x >= Real(0)) {
    const Real e = static_cast<Real>(std::exp(-static_cast<double>(x)));
    return Real(1) / (Real(1) + e);
  }
  const Real e = static_cast<Real>(std::exp(static_cast<double>(x)));
  return e / (Real(1) + e);
}

// ---------------------------------------------------------------------------
// Public tensor operations.
// ---------------------------------------------------------------------------

template <class Real>
TensorT<Real> matmul(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (a.ndim() != 2 || b.ndim() != 2) throw DimensionError("matmul expects rank-2 operands");
  if (a.cols() != b.rows()) throw DimensionError("matmul inner dimensions disagree");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  TensorT<Real> out({m, n});
  for (int i = 0; i < m; ++i) {
    const Real* arow = a.row_ptr(i);
    Real* orow = out.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t)
        acc += static_cast<double>(arow[t]) * static_cast<double>(b.at2(t, j));
      orow[j] = static_cast<Real>(acc);
    }
  }
  detail::check_finite(out, "matmul");
  return out;
}

// Numerically stable softmax over a rank-1 tensor.
template <class Real>
TensorT<Real> softmax(const TensorT<Real>& v) {
  if (v.ndim() != 1) throw DimensionError("softmax expects a rank-1 tensor");
  const int n = v.shape[0];
  TensorT<Real> out({n});
  Real mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = std::exp(static_cast<double>(v[i] - mx));
    out[i] = static_cast<Real>(e);
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (int i = 0; i < n; ++i) out[i] = static_cast<Real>(static_cast<double>(out[i]) * inv);
  detail::check_finite(out, "softmax");
  return out;
}

template <class Real>
TensorT<Real> tanh(const TensorT<Real>& x) {
  TensorT<Real> out = x;
  for (Real& v : out.data) v = static_cast<Real>(std::tanh(static_cast<double>(v)));
  return out;
}

template <class Real>
TensorT<Real> sigmoid(const TensorT<Real>& x) {
  TensorT<Real> out = x;
  for (Real& v : out.data) v = stable_sigmoid(v);
  return out;
}

template <class Real>
TensorT<Real> add(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (!a.same_shape(b)) throw DimensionError("add operand shapes disagree");
  TensorT<Real> out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  detail::check_finite(out, "add");
  return out;
}

template <class Real>
TensorT<Real> mul(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (!a.same_shape(b)) throw DimensionError("mul operand shapes disagree");
  TensorT<Real> out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  detail::check_finite(out, "mul");
  return out;
}

// Concatenation along the last dimension. Rank-1 tensors append; rank-2
// tensors must agree on the row count.
template <class Real>
TensorT<Real> concat(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (a.ndim() == 1 && b.ndim() == 1) {
    TensorT<Real> out({a.shape[0] + b.shape[0]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.shape[0]);
    return out;
  }
  if (a.ndim() == 2 && b.ndim() == 2) {
    if (a.rows() != b.rows()) throw DimensionError("concat row counts disagree");
    TensorT<Real> out({a.rows(), a.cols() + b.cols()});
    for (int i = 0; i < a.rows(); ++i) {
      std::copy(a.row_ptr(i), a.row_ptr(i) + a.cols(), out.row_ptr(i));
      std::copy(b.row_ptr(i), b.row_ptr(i) + b.cols(), out.row_ptr(i) + a.cols());
    }
    return out;
  }
  throw DimensionError("concat expects two rank-1 or two rank-2 tensors");
}

// Central-difference gradient of a scalar function, one coordinate at a time.
template <class Real>
TensorT<Real> finite_diff_grad(const std::function<Real(const TensorT<Real>&)>& f,
                               const TensorT<Real>& x, Real eps) {
  if (!(eps > Real(0))) throw NumericError("finite_diff_grad needs eps > 0");
  TensorT<Real> grad(x.shape);
  TensorT<Real> probe = x;
  for (size_t i = 0; i < probe.data.size(); ++i) {
    const Real keep = probe.data[i];
    probe.data[i] = keep + eps;
    const Real up = f(probe);
    probe.data[i] = keep - eps;
    const Real down = f(probe);
    probe.data[i] = keep;
    if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down)))
      throw NumericError("finite_diff_grad: function value is not finite");
    grad.data[i] = (up - down) / (Real(2) * eps);
  }
  return grad;
}

}  // namespace cubenmt
