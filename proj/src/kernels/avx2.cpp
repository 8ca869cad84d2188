#include <immintrin.h>

#include <cmath>

#include "sketchfit/kernels.hpp"
#include "tri_geom.hpp"

// AVX2+FMA variants. Compiled only on x86-64 (see src/CMakeLists.txt);
// selected at runtime when the CPU reports avx2 and fma.

namespace sketchfit::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// exp for doubles, |relative error| within a few ulp over [-746, 709].
// Range reduction against a hi/lo split of ln 2, degree-13 Taylor on the
// reduced argument, then the 2^n scale applied in two halves so results in
// the subnormal range stay finite.
inline __m256d vexp(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);

    __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    // Taylor: 1 + r (1 + r/2 (1 + r/3 (...)))
    __m256d p = _mm256_set1_pd(1.0 / 13.0);
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));  // inner-most partial
    const double invk[] = {1.0 / 12, 1.0 / 11, 1.0 / 10, 1.0 / 9, 1.0 / 8,
                           1.0 / 7,  1.0 / 6,  1.0 / 5,  1.0 / 4, 1.0 / 3,
                           1.0 / 2,  1.0};
    for (double ik : invk) {
        p = _mm256_fmadd_pd(_mm256_mul_pd(p, _mm256_set1_pd(ik)), r,
                            _mm256_set1_pd(1.0));
    }

    // scale = 2^n1 * 2^n2 with n1 = floor(n/2), n2 = n - n1
    __m256d half_n = _mm256_round_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)),
                                     _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
    __m256d rest_n = _mm256_sub_pd(n, half_n);
    auto pow2 = [](__m256d e) {
        __m128i i32 = _mm256_cvtpd_epi32(e);
        __m256i i64 = _mm256_cvtepi32_epi64(i32);
        i64 = _mm256_add_epi64(i64, _mm256_set1_epi64x(1023));
        i64 = _mm256_slli_epi64(i64, 52);
        return _mm256_castsi256_pd(i64);
    };
    __m256d result = _mm256_mul_pd(_mm256_mul_pd(p, pow2(half_n)), pow2(rest_n));

    const __m256d lo_cut = _mm256_set1_pd(detail::kExpZeroCutoff);
    const __m256d hi_cut = _mm256_set1_pd(709.0);
    result = _mm256_andnot_pd(_mm256_cmp_pd(x, lo_cut, _CMP_LE_OQ), result);
    __m256d inf = _mm256_set1_pd(HUGE_VAL);
    result = _mm256_blendv_pd(result, inf, _mm256_cmp_pd(x, hi_cut, _CMP_GE_OQ));
    return result;
}

double sum_impl(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double dot_impl(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

double sq_diff_sum_impl(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        r += d * d;
    }
    return r;
}

void iou_sums_impl(const double* a, const double* b, std::size_t n,
                   double* inter, double* uni) {
    __m256d iacc = _mm256_setzero_pd();
    __m256d uacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        __m256d vb = _mm256_loadu_pd(b + i);
        __m256d p = _mm256_mul_pd(va, vb);
        iacc = _mm256_add_pd(iacc, p);
        uacc = _mm256_add_pd(uacc, _mm256_sub_pd(_mm256_add_pd(va, vb), p));
    }
    double isum = hsum(iacc), usum = hsum(uacc);
    for (; i < n; ++i) {
        const double p = a[i] * b[i];
        isum += p;
        usum += a[i] + b[i] - p;
    }
    *inter = isum;
    *uni = usum;
}

void axpy_impl(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update_impl(double* p, const double* g, double* m, double* v,
                      std::size_t n, const AdamConsts& c) {
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d ob1 = _mm256_set1_pd(1.0 - c.beta1);
    const __m256d ob2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d inv_bias1 = _mm256_set1_pd(1.0 / c.bias1);
    const __m256d inv_bias2 = _mm256_set1_pd(1.0 / c.bias2);
    const __m256d lr = _mm256_set1_pd(c.lr);
    const __m256d eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                   _mm256_mul_pd(ob1, vg));
        __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                   _mm256_mul_pd(ob2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_mul_pd(vm, inv_bias1);
        __m256d vhat = _mm256_mul_pd(vv, inv_bias2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), eps);
        __m256d upd = _mm256_div_pd(_mm256_mul_pd(lr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
    }
    if (i < n) {
        AdamConsts tail = c;
        for (; i < n; ++i) {
            m[i] = tail.beta1 * m[i] + (1.0 - tail.beta1) * g[i];
            v[i] = tail.beta2 * v[i] + (1.0 - tail.beta2) * g[i] * g[i];
            const double mhat = m[i] / tail.bias1;
            const double vhat = v[i] / tail.bias2;
            p[i] -= tail.lr * mhat / (std::sqrt(vhat) + tail.eps);
        }
    }
}

void leaky_relu_impl(const double* x, double* y, std::size_t n, double slope) {
    const __m256d s = _mm256_set1_pd(slope);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d neg = _mm256_mul_pd(vx, s);
        __m256d mask = _mm256_cmp_pd(vx, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(y + i, _mm256_blendv_pd(neg, vx, mask));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_impl(const double* x, const double* gy, double* gx,
                          std::size_t n, double slope) {
    const __m256d s = _mm256_set1_pd(slope);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d f = _mm256_blendv_pd(s, one, _mm256_cmp_pd(vx, zero, _CMP_GT_OQ));
        __m256d vg = _mm256_fmadd_pd(_mm256_loadu_pd(gy + i), f,
                                     _mm256_loadu_pd(gx + i));
        _mm256_storeu_pd(gx + i, vg);
    }
    for (; i < n; ++i) gx[i] += gy[i] * (x[i] > 0.0 ? 1.0 : slope);
}

struct TriRowLanes {
    __m256d vx[3], vy[3];      // broadcast vertex coords
    __m256d ex[3], ey[3];      // edge vectors
    __m256d inv_len2[3];       // 0 for degenerate edges
    __m256d py;
    __m256d inv_sigma;
};

inline TriRowLanes prepare(const TriRow& t) {
    TriRowLanes L;
    const double vx[3] = {t.ax, t.bx, t.cx};
    const double vy[3] = {t.ay, t.by, t.cy};
    for (int k = 0; k < 3; ++k) {
        const int k1 = (k + 1) % 3;
        const double ex = vx[k1] - vx[k];
        const double ey = vy[k1] - vy[k];
        const double len2 = ex * ex + ey * ey;
        L.vx[k] = _mm256_set1_pd(vx[k]);
        L.vy[k] = _mm256_set1_pd(vy[k]);
        L.ex[k] = _mm256_set1_pd(ex);
        L.ey[k] = _mm256_set1_pd(ey);
        L.inv_len2[k] = _mm256_set1_pd(len2 > 0.0 ? 1.0 / len2 : 0.0);
    }
    L.py = _mm256_set1_pd(t.py);
    L.inv_sigma = _mm256_set1_pd(t.inv_sigma);
    return L;
}

struct LaneEval {
    __m256d z;
    __m256d sign;
    __m256d edge_mask[3];  // argmin edge selector
    __m256d t[3], qx[3], qy[3];
};

inline LaneEval eval_lanes(const TriRowLanes& L, __m256d px) {
    LaneEval e;
    const __m256d zero = _mm256_setzero_pd();
    __m256d best = zero, best_idx = zero;
    __m256d all_nonneg = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
    __m256d all_nonpos = all_nonneg;
    for (int k = 0; k < 3; ++k) {
        __m256d wx = _mm256_sub_pd(px, L.vx[k]);
        __m256d wy = _mm256_sub_pd(L.py, L.vy[k]);
        __m256d tnum = _mm256_fmadd_pd(wx, L.ex[k], _mm256_mul_pd(wy, L.ey[k]));
        __m256d t = _mm256_mul_pd(tnum, L.inv_len2[k]);
        t = _mm256_max_pd(t, zero);
        t = _mm256_min_pd(t, _mm256_set1_pd(1.0));
        __m256d qx = _mm256_fmadd_pd(t, L.ex[k], L.vx[k]);
        __m256d qy = _mm256_fmadd_pd(t, L.ey[k], L.vy[k]);
        __m256d dx = _mm256_sub_pd(px, qx);
        __m256d dy = _mm256_sub_pd(L.py, qy);
        __m256d d2 = _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy));
        e.t[k] = t;
        e.qx[k] = qx;
        e.qy[k] = qy;
        if (k == 0) {
            best = d2;
        } else {
            __m256d lt = _mm256_cmp_pd(d2, best, _CMP_LT_OQ);
            best = _mm256_blendv_pd(best, d2, lt);
            best_idx = _mm256_blendv_pd(best_idx, _mm256_set1_pd(double(k)), lt);
        }
        __m256d s = _mm256_fmsub_pd(L.ex[k], wy, _mm256_mul_pd(L.ey[k], wx));
        all_nonneg = _mm256_and_pd(all_nonneg, _mm256_cmp_pd(s, zero, _CMP_GE_OQ));
        all_nonpos = _mm256_and_pd(all_nonpos, _mm256_cmp_pd(s, zero, _CMP_LE_OQ));
    }
    for (int k = 0; k < 3; ++k)
        e.edge_mask[k] =
            _mm256_cmp_pd(best_idx, _mm256_set1_pd(double(k)), _CMP_EQ_OQ);
    __m256d inside = _mm256_or_pd(all_nonneg, all_nonpos);
    e.sign = _mm256_blendv_pd(_mm256_set1_pd(-1.0), _mm256_set1_pd(1.0), inside);
    e.z = _mm256_mul_pd(_mm256_mul_pd(e.sign, best), L.inv_sigma);
    return e;
}

void tri_row_forward_impl(const TriRow& t, double* logacc) {
    const TriRowLanes L = prepare(t);
    const __m256d lane_ix = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    int i = 0;
    for (; i + 4 <= t.n; i += 4) {
        __m256d idx = _mm256_add_pd(_mm256_set1_pd(double(i)), lane_ix);
        __m256d px = _mm256_fmadd_pd(idx, _mm256_set1_pd(t.dx),
                                     _mm256_set1_pd(t.x0));
        LaneEval e = eval_lanes(L, px);
        __m256d absz = _mm256_andnot_pd(sign_mask, e.z);
        __m256d w = vexp(_mm256_xor_pd(absz, sign_mask));  // exp(-|z|)
        __m256d sp = _mm256_add_pd(_mm256_max_pd(e.z, zero), w);
        __m256d big = _mm256_cmp_pd(w, _mm256_set1_pd(1e-8), _CMP_GE_OQ);
        int big_bits = _mm256_movemask_pd(big);
        if (big_bits) {
            alignas(32) double zs[4], sps[4];
            _mm256_store_pd(zs, e.z);
            _mm256_store_pd(sps, sp);
            for (int l = 0; l < 4; ++l)
                if (big_bits & (1 << l)) sps[l] = detail::softplus(zs[l]);
            sp = _mm256_load_pd(sps);
        }
        __m256d acc = _mm256_loadu_pd(logacc + i);
        _mm256_storeu_pd(logacc + i, _mm256_sub_pd(acc, sp));
    }
    detail::tri_row_forward_scalar(t, logacc, i, t.n);
}

void tri_row_backward_impl(const TriRow& t, const double* upstream, double g[6]) {
    const TriRowLanes L = prepare(t);
    const __m256d lane_ix = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc[6];
    for (auto& a : acc) a = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= t.n; i += 4) {
        __m256d idx = _mm256_add_pd(_mm256_set1_pd(double(i)), lane_ix);
        __m256d px = _mm256_fmadd_pd(idx, _mm256_set1_pd(t.dx),
                                     _mm256_set1_pd(t.x0));
        LaneEval e = eval_lanes(L, px);
        __m256d absz = _mm256_andnot_pd(sign_mask, e.z);
        __m256d w = vexp(_mm256_xor_pd(absz, sign_mask));  // exp(-|z|)
        __m256d wp1 = _mm256_add_pd(one, w);
        // sigmoid(z): w/(1+w) for z<0, 1/(1+w) for z>=0
        __m256d nonneg = _mm256_cmp_pd(e.z, _mm256_setzero_pd(), _CMP_GE_OQ);
        __m256d numer = _mm256_blendv_pd(w, one, nonneg);
        __m256d d = _mm256_div_pd(numer, wp1);
        __m256d up = _mm256_loadu_pd(upstream + i);
        __m256d coef = _mm256_mul_pd(_mm256_mul_pd(up, d),
                                     _mm256_mul_pd(e.sign, L.inv_sigma));
        coef = _mm256_add_pd(coef, coef);  // * 2
        for (int k = 0; k < 3; ++k) {
            __m256d m = e.edge_mask[k];
            __m256d ck = _mm256_and_pd(coef, m);
            __m256d gx = _mm256_mul_pd(ck, _mm256_sub_pd(e.qx[k], px));
            __m256d gy = _mm256_mul_pd(ck, _mm256_sub_pd(e.qy[k], L.py));
            __m256d omt = _mm256_sub_pd(one, e.t[k]);
            const int v0 = k, v1 = (k + 1) % 3;
            acc[2 * v0] = _mm256_fmadd_pd(gx, omt, acc[2 * v0]);
            acc[2 * v0 + 1] = _mm256_fmadd_pd(gy, omt, acc[2 * v0 + 1]);
            acc[2 * v1] = _mm256_fmadd_pd(gx, e.t[k], acc[2 * v1]);
            acc[2 * v1 + 1] = _mm256_fmadd_pd(gy, e.t[k], acc[2 * v1 + 1]);
        }
    }
    for (int c = 0; c < 6; ++c) g[c] += hsum(acc[c]);
    detail::tri_row_backward_scalar(t, upstream, g, i, t.n);
}

}  // namespace

const Kernels& avx2() {
    static const Kernels k = {
        "avx2",          sum_impl,         dot_impl,
        sq_diff_sum_impl, iou_sums_impl,   axpy_impl,
        adam_update_impl, leaky_relu_impl, leaky_relu_grad_impl,
        tri_row_forward_impl, tri_row_backward_impl,
    };
    return k;
}

}  // namespace sketchfit::kernels
