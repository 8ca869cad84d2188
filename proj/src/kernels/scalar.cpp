#include <cmath>

#include "sketchfit/kernels.hpp"
#include "tri_geom.hpp"

namespace sketchfit::kernels {
namespace {

double sum_impl(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_impl(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sq_diff_sum_impl(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void iou_sums_impl(const double* a, const double* b, std::size_t n,
                   double* inter, double* uni) {
    double i_acc = 0.0, u_acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = a[i] * b[i];
        i_acc += p;
        u_acc += a[i] + b[i] - p;
    }
    *inter = i_acc;
    *uni = u_acc;
}

void axpy_impl(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update_impl(double* p, const double* g, double* m, double* v,
                      std::size_t n, const AdamConsts& c) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double mhat = m[i] / c.bias1;
        const double vhat = v[i] / c.bias2;
        p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

void leaky_relu_impl(const double* x, double* y, std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_impl(const double* x, const double* gy, double* gx,
                          std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * (x[i] > 0.0 ? 1.0 : slope);
}

void tri_row_forward_impl(const TriRow& t, double* logacc) {
    detail::tri_row_forward_scalar(t, logacc, 0, t.n);
}

void tri_row_backward_impl(const TriRow& t, const double* upstream, double g[6]) {
    detail::tri_row_backward_scalar(t, upstream, g, 0, t.n);
}

}  // namespace

const Kernels& scalar() {
    static const Kernels k = {
        "scalar",        sum_impl,         dot_impl,
        sq_diff_sum_impl, iou_sums_impl,   axpy_impl,
        adam_update_impl, leaky_relu_impl, leaky_relu_grad_impl,
        tri_row_forward_impl, tri_row_backward_impl,
    };
    return k;
}

}  // namespace sketchfit::kernels
