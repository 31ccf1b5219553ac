// AVX2 kernels. This file is compiled with -mavx2 and must only be reached
// through the runtime dispatch in dispatch.cpp.

#include "simd_impl.hpp"

#if defined(MH3D_HAVE_AVX2_KERNELS)

#include <immintrin.h>

namespace mh3d::simd::avx2 {
namespace {

// Two complex products per register: [ar*br - ai*bi, ar*bi + ai*br].
inline __m256d cmul2(__m256d a, __m256d b) {
  const __m256d a_re = _mm256_movedup_pd(a);
  const __m256d a_im = _mm256_permute_pd(a, 0xF);
  const __m256d b_sw = _mm256_permute_pd(b, 0x5);
  return _mm256_addsub_pd(_mm256_mul_pd(a_re, b), _mm256_mul_pd(a_im, b_sw));
}

// conj(a) * b: [ar*br + ai*bi, ar*bi - ai*br].
inline __m256d cmulc2(__m256d a, __m256d b) {
  const __m256d a_re = _mm256_movedup_pd(a);
  const __m256d a_im = _mm256_permute_pd(a, 0xF);
  const __m256d b_sw = _mm256_permute_pd(b, 0x5);
  const __m256d t1 = _mm256_mul_pd(a_re, b);
  const __m256d t2 = _mm256_mul_pd(a_im, b_sw);
  // addsub(t1, -t2) = [t1 + t2, t1 - t2]
  return _mm256_addsub_pd(t1, _mm256_sub_pd(_mm256_setzero_pd(), t2));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void cmul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    _mm256_storeu_pd(out + 2 * i, cmul2(_mm256_loadu_pd(a + 2 * i), _mm256_loadu_pd(b + 2 * i)));
  }
  for (; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1], br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
}

void cmul_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d p = cmul2(_mm256_loadu_pd(a + 2 * i), _mm256_loadu_pd(b + 2 * i));
    _mm256_storeu_pd(out + 2 * i, _mm256_add_pd(_mm256_loadu_pd(out + 2 * i), p));
  }
  for (; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1], br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] += ar * br - ai * bi;
    out[2 * i + 1] += ar * bi + ai * br;
  }
}

void cmulc_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d p = cmulc2(_mm256_loadu_pd(a + 2 * i), _mm256_loadu_pd(b + 2 * i));
    _mm256_storeu_pd(out + 2 * i, _mm256_add_pd(_mm256_loadu_pd(out + 2 * i), p));
  }
  for (; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1], br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] += ar * br + ai * bi;
    out[2 * i + 1] += ar * bi - ai * br;
  }
}

void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void hadamard_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), p));
  }
  for (; i < n; ++i) out[i] += a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void extrapolate(const double* x, const double* x_prev, double beta, double* out, std::size_t n) {
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d d = _mm256_sub_pd(vx, _mm256_loadu_pd(x_prev + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(vx, _mm256_mul_pd(vb, d)));
  }
  for (; i < n; ++i) out[i] = x[i] + beta * (x[i] - x_prev[i]);
}

void projected_step(const double* y, const double* g, double tau, bool nonneg, double* out,
                    std::size_t n) {
  const __m256d vt = _mm256_set1_pd(tau);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  if (nonneg) {
    for (; i + 4 <= n; i += 4) {
      const __m256d s =
          _mm256_sub_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(vt, _mm256_loadu_pd(g + i)));
      _mm256_storeu_pd(out + i, _mm256_max_pd(s, zero));
    }
    for (; i < n; ++i) {
      const double s = y[i] - tau * g[i];
      out[i] = s > 0.0 ? s : 0.0;
    }
  } else {
    for (; i + 4 <= n; i += 4) {
      _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(y + i),
                                              _mm256_mul_pd(vt, _mm256_loadu_pd(g + i))));
    }
    for (; i < n; ++i) out[i] = y[i] - tau * g[i];
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

}  // namespace mh3d::simd::avx2

#endif
