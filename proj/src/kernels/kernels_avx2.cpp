// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; the dispatcher guarantees nothing here runs on a CPU
// without those features.

#include "conc/kernels/kernels.hpp"

#if defined(CONC_KERNELS_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace conc::kernels::avx2 {

namespace {

inline double hsum(__m256d v) noexcept {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// Vector ln(x) for normal positive doubles. Reduce x = m * 2^e with m in
// [sqrt(1/2), sqrt(2)), then log(m) = 2 atanh(w) with w = (m-1)/(m+1),
// summed as the odd series with exact rational coefficients. Better than
// 1 ulp over the full range; the equivalence tests bound it at 1e-12
// relative against std::log.
inline __m256d log_pd(__m256d x) noexcept {
    const __m256d one = _mm256_set1_pd(1.0);

    __m256i bits = _mm256_castpd_si256(x);
    __m256i expo_raw = _mm256_srli_epi64(bits, 52);
    expo_raw = _mm256_sub_epi64(expo_raw, _mm256_set1_epi64x(1022));
    // Low dwords hold the (small) exponent as int32.
    __m256d e = _mm256_cvtepi32_pd(_mm256_castsi256_si128(
        _mm256_permutevar8x32_epi32(expo_raw, _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0))));

    const __m256i mant_mask = _mm256_set1_epi64x(0x000fffffffffffffLL);
    const __m256i half_bits = _mm256_set1_epi64x(0x3fe0000000000000LL);
    __m256d m = _mm256_castsi256_pd(
        _mm256_or_si256(_mm256_and_si256(bits, mant_mask), half_bits));  // [0.5, 1)

    const __m256d sqrth = _mm256_set1_pd(0.70710678118654752440);
    const __m256d below = _mm256_cmp_pd(m, sqrth, _CMP_LT_OQ);
    m = _mm256_blendv_pd(m, _mm256_add_pd(m, m), below);
    e = _mm256_sub_pd(e, _mm256_and_pd(below, one));

    const __m256d w = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
    const __m256d w2 = _mm256_mul_pd(w, w);
    __m256d s = _mm256_set1_pd(1.0 / 21.0);
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 19.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 17.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 15.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 13.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 11.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 9.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 7.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 5.0));
    s = _mm256_fmadd_pd(s, w2, _mm256_set1_pd(1.0 / 3.0));
    s = _mm256_fmadd_pd(s, w2, one);

    // fdlibm split of ln2 keeps e*ln2 accurate for large |e|.
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d two_ws = _mm256_mul_pd(_mm256_add_pd(w, w), s);
    return _mm256_fmadd_pd(e, ln2_hi, _mm256_fmadd_pd(e, ln2_lo, two_ws));
}

}  // namespace

double sum(std::span<const double> x) noexcept {
    const size_t n = x.size();
    const double* p = x.data();
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += p[i];
    return r;
}

double dot(std::span<const double> x, std::span<const double> y) noexcept {
    const size_t n = x.size();
    const double* px = x.data();
    const double* py = y.data();
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i), acc);
    double r = hsum(acc);
    for (; i < n; ++i) r += px[i] * py[i];
    return r;
}

double sumsq(std::span<const double> x) noexcept {
    const size_t n = x.size();
    const double* p = x.data();
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(p + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += p[i] * p[i];
    return r;
}

double rank_weighted_sum(std::span<const double> x) noexcept {
    const size_t n = x.size();
    const double* p = x.data();
    __m256d acc = _mm256_setzero_pd();
    __m256d idx = _mm256_setr_pd(1.0, 2.0, 3.0, 4.0);
    const __m256d four = _mm256_set1_pd(4.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(idx, _mm256_loadu_pd(p + i), acc);
        idx = _mm256_add_pd(idx, four);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += static_cast<double>(i + 1) * p[i];
    return r;
}

double neg_xlogx_sum(std::span<const double> x) noexcept {
    const size_t n = x.size();
    const double* p = x.data();
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(p + i);
        acc = _mm256_fnmadd_pd(v, log_pd(v), acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r -= p[i] * std::log(p[i]);
    return r;
}

void subtract_scalar(std::span<const double> x, double c, std::span<double> out) noexcept {
    const size_t n = x.size();
    const double* p = x.data();
    double* q = out.data();
    const __m256d vc = _mm256_set1_pd(c);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(q + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), vc));
    for (; i < n; ++i) q[i] = p[i] - c;
}

void scale(std::span<const double> x, double c, std::span<double> out) noexcept {
    const size_t n = x.size();
    const double* p = x.data();
    double* q = out.data();
    const __m256d vc = _mm256_set1_pd(c);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(q + i, _mm256_mul_pd(_mm256_loadu_pd(p + i), vc));
    for (; i < n; ++i) q[i] = p[i] * c;
}

}  // namespace conc::kernels::avx2

#endif  // CONC_KERNELS_HAVE_AVX2
