// leafray - radix-2 FFT used by the fast Cauchy convolution
#ifndef LEAFRAY_FFT_HPP
#define LEAFRAY_FFT_HPP

#include <vector>

#include "leafray/core.hpp"

namespace leafray {

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative Cooley-Tukey transform for power-of-two lengths.
class FftPlan {
 public:
  explicit FftPlan(int n) : n_(n) {
    require(n > 0 && (n & (n - 1)) == 0, ErrorCode::InvalidArgument,
            "FftPlan: length must be a power of two");
    rev_.resize(size_t(n));
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
      rev_[size_t(i)] = r;
    }
    tw_.resize(size_t(n / 2));
    for (int k = 0; k < n / 2; ++k) {
      double ang = -2.0 * kPi * k / n;
      tw_[size_t(k)] = cplx(std::cos(ang), std::sin(ang));
    }
  }

  int size() const { return n_; }

  void forward(cplx* a) const { run(a, false); }
  void inverse(cplx* a) const {
    run(a, true);
    double s = 1.0 / n_;
    for (int i = 0; i < n_; ++i) a[i] *= s;
  }

  // Strided variants for transforming columns of a row-major 2D array.
  void forward_strided(cplx* a, int stride, cplx* scratch) const {
    for (int i = 0; i < n_; ++i) scratch[i] = a[size_t(i) * stride];
    forward(scratch);
    for (int i = 0; i < n_; ++i) a[size_t(i) * stride] = scratch[i];
  }
  void inverse_strided(cplx* a, int stride, cplx* scratch) const {
    for (int i = 0; i < n_; ++i) scratch[i] = a[size_t(i) * stride];
    inverse(scratch);
    for (int i = 0; i < n_; ++i) a[size_t(i) * stride] = scratch[i];
  }

 private:
  void run(cplx* a, bool inv) const {
    int n = n_;
    for (int i = 0; i < n; ++i) {
      int r = rev_[size_t(i)];
      if (i < r) std::swap(a[i], a[r]);
    }
    for (int len = 2; len <= n; len <<= 1) {
      int half = len >> 1;
      int step = n / len;
      for (int i = 0; i < n; i += len) {
        for (int j = 0; j < half; ++j) {
          cplx w = tw_[size_t(j) * step];
          if (inv) w = std::conj(w);
          cplx u = a[i + j];
          cplx v = a[i + j + half] * w;
          a[i + j] = u + v;
          a[i + j + half] = u - v;
        }
      }
    }
  }

  int n_;
  std::vector<int> rev_;
  std::vector<cplx> tw_;
};

// Row-major 2D transform of a P x Q array.
class Fft2Plan {
 public:
  Fft2Plan(int p, int q) : p_(p), q_(q), row_(q), col_(p) {}

  int rows() const { return p_; }
  int cols() const { return q_; }

  void forward(std::vector<cplx>& a) const { run(a, false); }
  void inverse(std::vector<cplx>& a) const { run(a, true); }

 private:
  void run(std::vector<cplx>& a, bool inv) const {
    require(int(a.size()) == p_ * q_, ErrorCode::InvalidArgument, "Fft2Plan: bad size");
    for (int i = 0; i < p_; ++i) {
      cplx* row = a.data() + size_t(i) * q_;
      if (inv) row_.inverse(row); else row_.forward(row);
    }
    std::vector<cplx> scratch(static_cast<size_t>(p_));
    for (int j = 0; j < q_; ++j) {
      if (inv) col_.inverse_strided(a.data() + j, q_, scratch.data());
      else col_.forward_strided(a.data() + j, q_, scratch.data());
    }
  }

  int p_, q_;
  FftPlan row_, col_;
};

}  // namespace leafray

#endif
