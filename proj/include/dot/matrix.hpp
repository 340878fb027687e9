#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <initializer_list>
#include <string>
#include <thread>
#include <vector>

#include "dot/errors.hpp"

namespace dot {

// Dense row-major double matrix. All numerics in this library run on
// 64-bit floats; sizes are desk-scale so no blocking or SIMD games.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ParamError("Matrix: negative dimension");
    data_.assign(static_cast<size_t>(rows) * static_cast<size_t>(cols), 0.0);
  }
  Matrix(int rows, int cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols))
      throw ShapeError("Matrix: data size " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = static_cast<int>(init.size());
    cols_ = rows_ > 0 ? static_cast<int>(init.begin()->size()) : 0;
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : init) {
      if (static_cast<int>(r.size()) != cols_)
        throw ShapeError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix filled(int rows, int cols, double v) {
    Matrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), v);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }
  double* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
  const double* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Sample feature vectors, one row per sample.
using FeatureMatrix = Matrix;

inline bool is_finite(const Matrix& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) return false;
  return true;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

// ---------------------------------------------------------------------------
// kernel parallelism cap (DOT_THREADS)

inline int thread_cap() {
  static const int cap = [] {
    const char* env = std::getenv("DOT_THREADS");
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (!env) return 1;
    int v = std::atoi(env);
    if (v < 1) return 1;
    return std::min(v, hw);
  }();
  return cap;
}

// Splits [0, n) into contiguous chunks, one worker per chunk. Each output
// element is produced by exactly one worker with a fixed operation order, so
// results are bitwise independent of the thread count.
template <class Fn>
inline void parallel_rows(int n, Fn&& fn) {
  int threads = std::min(thread_cap(), n);
  if (threads <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// core kernels

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() +
                     " x " + b.shape_str());
  Matrix c(a.rows(), b.cols());
  const int k = a.cols(), n = b.cols();
  parallel_rows(a.rows(), [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      double* ci = c.row(i);
      const double* ai = a.row(i);
      for (int p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b.row(p);
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  });
  return c;
}

// a (m x k) times b^T where b is (n x k): rows of both are dotted.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: column counts differ, " + a.shape_str() +
                     " vs " + b.shape_str());
  Matrix c(a.rows(), b.rows());
  const int k = a.cols();
  parallel_rows(a.rows(), [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* ai = a.row(i);
      double* ci = c.row(i);
      for (int j = 0; j < b.rows(); ++j) {
        const double* bj = b.row(j);
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] = s;
      }
    }
  });
  return c;
}

// a^T (k x m from a m x k) times b (m x n); used by backward passes.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: row counts differ, " + a.shape_str() +
                     " vs " + b.shape_str());
  Matrix c(a.cols(), b.cols());
  for (int p = 0; p < a.rows(); ++p) {
    const double* ap = a.row(p);
    const double* bp = b.row(p);
    for (int i = 0; i < a.cols(); ++i) {
      double* ci = c.row(i);
      const double av = ap[i];
      for (int j = 0; j < b.cols(); ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Row-wise softmax of m/scale, stabilized by per-row max subtraction.
inline Matrix softmax_rows(const Matrix& m, double scale) {
  if (scale <= 0.0 || !std::isfinite(scale))
    throw ParamError("softmax_rows: scale must be positive, got " +
                     std::to_string(scale));
  if (!is_finite(m)) throw InputError("softmax_rows: non-finite input entry");
  Matrix p(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    const double* src = m.row(i);
    double* dst = p.row(i);
    double mx = src[0];
    for (int j = 1; j < m.cols(); ++j) mx = std::max(mx, src[j]);
    mx /= scale;
    double sum = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
      dst[j] = std::exp(src[j] / scale - mx);
      sum += dst[j];
    }
    for (int j = 0; j < m.cols(); ++j) dst[j] /= sum;
  }
  return p;
}

// Squared Euclidean distances between rows of x and rows of y, clamped at 0.
inline Matrix pairwise_sq_dist(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols())
    throw ShapeError("pairwise_sq_dist: feature dims differ, " + x.shape_str() +
                     " vs " + y.shape_str());
  Matrix d(x.rows(), y.rows());
  const int k = x.cols();
  parallel_rows(x.rows(), [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* xi = x.row(i);
      double* di = d.row(i);
      for (int j = 0; j < y.rows(); ++j) {
        const double* yj = y.row(j);
        double s = 0.0;
        for (int p = 0; p < k; ++p) {
          const double diff = xi[p] - yj[p];
          s += diff * diff;
        }
        di[j] = s < 0.0 ? 0.0 : s;
      }
    }
  });
  return d;
}

// ---------------------------------------------------------------------------
// small elementwise helpers

inline Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

inline std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> s(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols(); ++j) s[i] += r[j];
  }
  return s;
}

inline std::vector<double> col_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols(); ++j) s[j] += r[j];
  }
  return s;
}

inline std::vector<double> col_means(const Matrix& m) {
  std::vector<double> s = col_sums(m);
  for (double& v : s) v /= m.rows();
  return s;
}

inline double frobenius_dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_dot");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline Matrix take_rows(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(static_cast<int>(idx.size()), m.cols());
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy(m.row(idx[r]), m.row(idx[r]) + m.cols(), out.row(static_cast<int>(r)));
  return out;
}

}  // namespace dot
