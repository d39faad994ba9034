#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ckpt {

// Square N x N grid of doubles (interior points of the unit square,
// row-major). Value semantics throughout; boundary values are implicitly
// zero (homogeneous Dirichlet) and are never stored.
class Field {
 public:
  Field() = default;
  explicit Field(int n, double fill = 0.0) : n_(n), a_(std::size_t(n) * n, fill) {}

  int n() const { return n_; }
  std::size_t size() const { return a_.size(); }
  std::size_t bytes() const { return a_.size() * sizeof(double); }

  double& at(int i, int j) {
    assert(i >= 0 && i < n_ && j >= 0 && j < n_);
    return a_[std::size_t(i) * n_ + j];
  }
  double at(int i, int j) const {
    assert(i >= 0 && i < n_ && j >= 0 && j < n_);
    return a_[std::size_t(i) * n_ + j];
  }

  // Reads with zero padding outside the interior.
  double pad(int i, int j) const {
    if (i < 0 || i >= n_ || j < 0 || j >= n_) return 0.0;
    return a_[std::size_t(i) * n_ + j];
  }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  Field& operator+=(const Field& o) {
    assert(n_ == o.n_);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    assert(n_ == o.n_);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& x : a_) x *= s;
    return *this;
  }

  bool operator==(const Field& o) const = default;

 private:
  int n_ = 0;
  std::vector<double> a_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }

inline double dot(const Field& a, const Field& b) {
  assert(a.n() == b.n());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.data()[k] * b.data()[k];
  return s;
}

inline void axpy(double a, const Field& x, Field& y) {
  assert(x.n() == y.n());
  for (std::size_t k = 0; k < x.size(); ++k) y.data()[k] += a * x.data()[k];
}

inline double norm2(const Field& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Field& a) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a.data()[k]));
  return m;
}

inline double rms(const Field& a) {
  return a.size() ? std::sqrt(dot(a, a) / double(a.size())) : 0.0;
}

inline bool all_finite(const Field& a) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!std::isfinite(a.data()[k])) return false;
  return true;
}

}  // namespace ckpt
