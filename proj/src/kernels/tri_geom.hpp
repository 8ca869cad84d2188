#pragma once

#include <cmath>

#include "sketchfit/kernels.hpp"

// Scalar per-pixel triangle coverage math. The scalar kernel uses these
// directly; the AVX2 kernel mirrors the same formulas lane-wise and falls
// back to them for row tails.

namespace sketchfit::kernels::detail {

constexpr double kExpZeroCutoff = exp_zero_cutoff;

struct TriEval {
    double z;     // sign * d2 * inv_sigma
    double sign;  // +1 inside the projected triangle, -1 outside
    int edge;     // argmin boundary edge, ties resolved to the lowest index
    double t;     // clamped segment parameter on that edge
    double qx, qy;
};

inline TriEval tri_eval(const TriRow& tr, double px, double py) {
    const double vx[3] = {tr.ax, tr.bx, tr.cx};
    const double vy[3] = {tr.ay, tr.by, tr.cy};

    TriEval best{};
    double best_d2 = 0.0;
    bool all_nonneg = true, all_nonpos = true;
    for (int k = 0; k < 3; ++k) {
        const int k1 = (k + 1) % 3;
        const double ex = vx[k1] - vx[k];
        const double ey = vy[k1] - vy[k];
        const double wx = px - vx[k];
        const double wy = py - vy[k];
        const double len2 = ex * ex + ey * ey;
        const double inv_len2 = len2 > 0.0 ? 1.0 / len2 : 0.0;
        double t = (wx * ex + wy * ey) * inv_len2;
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        const double qx = vx[k] + t * ex;
        const double qy = vy[k] + t * ey;
        const double dx = px - qx;
        const double dy = py - qy;
        const double d2 = dx * dx + dy * dy;
        if (k == 0 || d2 < best_d2) {
            best_d2 = d2;
            best.edge = k;
            best.t = t;
            best.qx = qx;
            best.qy = qy;
        }
        const double s = ex * wy - ey * wx;
        all_nonneg = all_nonneg && s >= 0.0;
        all_nonpos = all_nonpos && s <= 0.0;
    }
    best.sign = (all_nonneg || all_nonpos) ? 1.0 : -1.0;
    best.z = best.sign * best_d2 * tr.inv_sigma;
    return best;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// softplus(z) = log(1 + exp(z)); below w < 1e-8 the identity log1p(w) = w
// holds to double precision.
inline double softplus(double z) {
    const double w = std::exp(-std::fabs(z));
    const double base = z > 0.0 ? z : 0.0;
    return base + (w < 1e-8 ? w : std::log1p(w));
}

inline void tri_row_forward_scalar(const TriRow& tr, double* logacc,
                                   int begin, int end) {
    for (int i = begin; i < end; ++i) {
        const double px = tr.x0 + i * tr.dx;
        const TriEval ev = tri_eval(tr, px, tr.py);
        if (ev.z <= kExpZeroCutoff) continue;
        logacc[i] -= softplus(ev.z);
    }
}

inline void tri_row_backward_scalar(const TriRow& tr, const double* upstream,
                                    double g[6], int begin, int end) {
    for (int i = begin; i < end; ++i) {
        const double px = tr.x0 + i * tr.dx;
        const TriEval ev = tri_eval(tr, px, tr.py);
        if (ev.z <= kExpZeroCutoff) continue;
        const double d = sigmoid(ev.z);
        const double c = upstream[i] * d * ev.sign * tr.inv_sigma * 2.0;
        const double gx = c * (ev.qx - px);
        const double gy = c * (ev.qy - tr.py);
        const int v0 = ev.edge;
        const int v1 = (ev.edge + 1) % 3;
        g[2 * v0] += gx * (1.0 - ev.t);
        g[2 * v0 + 1] += gy * (1.0 - ev.t);
        g[2 * v1] += gx * ev.t;
        g[2 * v1 + 1] += gy * ev.t;
    }
}

}  // namespace sketchfit::kernels::detail
