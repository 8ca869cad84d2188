#include <cmath>
#include <vector>

#include "doctest.h"
#include "sketchfit/common.hpp"
#include "sketchfit/kernels.hpp"

using namespace sketchfit;
namespace K = sketchfit::kernels;

namespace {

bool close(double a, double b, double rel = 1e-9, double abs_tol = 1e-12) {
    return std::fabs(a - b) <= std::max(abs_tol, rel * std::max(std::fabs(a), std::fabs(b)));
}

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

K::TriRow random_tri_row(Rng& rng, double sigma, int n = 64) {
    K::TriRow t;
    t.ax = rng.uniform(-0.8, 0.8);
    t.ay = rng.uniform(-0.8, 0.8);
    t.bx = rng.uniform(-0.8, 0.8);
    t.by = rng.uniform(-0.8, 0.8);
    t.cx = rng.uniform(-0.8, 0.8);
    t.cy = rng.uniform(-0.8, 0.8);
    t.py = rng.uniform(-1.0, 1.0);
    t.x0 = -1.0 + 1.0 / n;
    t.dx = 2.0 / n;
    t.n = n;
    t.inv_sigma = 1.0 / sigma;
    return t;
}

}  // namespace

TEST_CASE("variant registry always contains the scalar reference") {
    auto variants = K::available();
    REQUIRE(!variants.empty());
    CHECK(std::string(variants[0]->name) == "scalar");
    for (auto* v : variants) MESSAGE("kernel variant available: ", std::string(v->name));
}

TEST_CASE("reduction kernels agree across variants") {
    Rng rng(7);
    const auto& ref = K::scalar();
    for (auto* variant : K::available()) {
        for (size_t n : {size_t(1), size_t(3), size_t(4), size_t(17), size_t(1024)}) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            CHECK(close(variant->sum(a.data(), n), ref.sum(a.data(), n)));
            CHECK(close(variant->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n)));
            CHECK(close(variant->sq_diff_sum(a.data(), b.data(), n),
                        ref.sq_diff_sum(a.data(), b.data(), n)));
            double i1, u1, i2, u2;
            variant->iou_sums(a.data(), b.data(), n, &i1, &u1);
            ref.iou_sums(a.data(), b.data(), n, &i2, &u2);
            CHECK(close(i1, i2));
            CHECK(close(u1, u2));
        }
    }
}

TEST_CASE("axpy and leaky relu kernels agree across variants") {
    Rng rng(11);
    const auto& ref = K::scalar();
    for (auto* variant : K::available()) {
        const size_t n = 129;
        const auto x = random_vec(rng, n);
        auto y1 = random_vec(rng, n);
        auto y2 = y1;
        variant->axpy(0.37, x.data(), y1.data(), n);
        ref.axpy(0.37, x.data(), y2.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i]));

        std::vector<double> a1(n), a2(n);
        variant->leaky_relu(x.data(), a1.data(), n, 0.2);
        ref.leaky_relu(x.data(), a2.data(), n, 0.2);
        for (size_t i = 0; i < n; ++i) CHECK(a1[i] == a2[i]);

        auto g1 = random_vec(rng, n);
        auto g2 = g1;
        const auto gy = random_vec(rng, n);
        variant->leaky_relu_grad(x.data(), gy.data(), g1.data(), n, 0.2);
        ref.leaky_relu_grad(x.data(), gy.data(), g2.data(), n, 0.2);
        for (size_t i = 0; i < n; ++i) CHECK(close(g1[i], g2[i]));
    }
}

TEST_CASE("adam kernel agrees across variants") {
    Rng rng(13);
    const auto& ref = K::scalar();
    K::AdamConsts c{1e-3, 0.9, 0.999, 1e-8, 1.0 - 0.9, 1.0 - 0.999 * 0.999};
    for (auto* variant : K::available()) {
        const size_t n = 67;
        const auto g = random_vec(rng, n);
        auto p1 = random_vec(rng, n), m1 = random_vec(rng, n, 0, 1),
             v1 = random_vec(rng, n, 0, 1);
        auto p2 = p1, m2 = m1, v2 = v1;
        variant->adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, c);
        ref.adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, c);
        for (size_t i = 0; i < n; ++i) {
            CHECK(close(p1[i], p2[i]));
            CHECK(close(m1[i], m2[i]));
            CHECK(close(v1[i], v2[i]));
        }
    }
}

TEST_CASE("triangle row kernels agree across variants") {
    for (double sigma : {1e-4, 5e-2}) {
        Rng rng(17);
        for (int trial = 0; trial < 50; ++trial) {
            const K::TriRow t = random_tri_row(rng, sigma);
            const auto upstream = random_vec(rng, size_t(t.n));
            std::vector<double> acc_ref(size_t(t.n), 0.0);
            K::scalar().tri_row_forward(t, acc_ref.data());
            double g_ref[6] = {0, 0, 0, 0, 0, 0};
            K::scalar().tri_row_backward(t, upstream.data(), g_ref);

            for (auto* variant : K::available()) {
                std::vector<double> acc(size_t(t.n), 0.0);
                variant->tri_row_forward(t, acc.data());
                for (int i = 0; i < t.n; ++i)
                    CHECK(close(acc[i], acc_ref[i], 1e-9, 1e-13));
                double g[6] = {0, 0, 0, 0, 0, 0};
                variant->tri_row_backward(t, upstream.data(), g);
                for (int i = 0; i < 6; ++i) CHECK(close(g[i], g_ref[i], 1e-8, 1e-12));
            }
        }
    }
}

TEST_CASE("triangle row kernels are deterministic per variant") {
    Rng rng(23);
    const K::TriRow t = random_tri_row(rng, 1e-4);
    const auto upstream = random_vec(rng, size_t(t.n));
    for (auto* variant : K::available()) {
        std::vector<double> a1(size_t(t.n), 0.0), a2(size_t(t.n), 0.0);
        variant->tri_row_forward(t, a1.data());
        variant->tri_row_forward(t, a2.data());
        CHECK(a1 == a2);
        double g1[6] = {}, g2[6] = {};
        variant->tri_row_backward(t, upstream.data(), g1);
        variant->tri_row_backward(t, upstream.data(), g2);
        for (int i = 0; i < 6; ++i) CHECK(g1[i] == g2[i]);
    }
}

// Finite-difference check of the row backward against the row forward, per
// variant. Coordinates sitting on distance ties are skipped by the usual
// h-refinement test.
TEST_CASE("triangle row backward matches finite differences of the forward") {
    Rng rng(29);
    for (auto* variant : K::available()) {
        int checked = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const K::TriRow t = random_tri_row(rng, 5e-2, 16);
            const auto upstream = random_vec(rng, size_t(t.n), 0.1, 1.0);
            auto objective = [&](const K::TriRow& tr) {
                std::vector<double> acc(size_t(tr.n), 0.0);
                variant->tri_row_forward(tr, acc.data());
                double s = 0.0;
                for (int i = 0; i < tr.n; ++i) s += upstream[i] * (-std::expm1(acc[i]));
                return s;
            };
            // The kernel contract premultiplies upstream by (1 - S) = exp(acc),
            // so compose the objective the same way the renderer does.
            std::vector<double> acc(size_t(t.n), 0.0);
            variant->tri_row_forward(t, acc.data());
            std::vector<double> up(size_t(t.n));
            for (int i = 0; i < t.n; ++i) up[i] = upstream[i] * std::exp(acc[i]);
            double g[6] = {};
            variant->tri_row_backward(t, up.data(), g);

            double* coords[6];
            K::TriRow probe = t;
            coords[0] = &probe.ax; coords[1] = &probe.ay;
            coords[2] = &probe.bx; coords[3] = &probe.by;
            coords[4] = &probe.cx; coords[5] = &probe.cy;
            const double h = 1e-6;
            for (int cidx = 0; cidx < 6; ++cidx) {
                const double saved = *coords[cidx];
                auto fd_at = [&](double step) {
                    *coords[cidx] = saved + step;
                    const double fp = objective(probe);
                    *coords[cidx] = saved - step;
                    const double fm = objective(probe);
                    *coords[cidx] = saved;
                    return (fp - fm) / (2.0 * step);
                };
                const double fd = fd_at(h);
                // central differences of an O(1) objective cannot resolve
                // gradients below the cancellation floor
                if (std::max(std::fabs(g[cidx]), std::fabs(fd)) < 1e-7) continue;
                const double err =
                    std::fabs(g[cidx] - fd) / std::max({std::fabs(g[cidx]), std::fabs(fd), 1e-8});
                if (err > 1e-4) {
                    const double fd2 = fd_at(h * 0.5);
                    const double err2 = std::fabs(g[cidx] - fd2) /
                                        std::max({std::fabs(g[cidx]), std::fabs(fd2), 1e-8});
                    const double lo = std::max(std::min(err, err2), 1e-300);
                    if (std::max(err, err2) / lo > 10.0) continue;  // non-smooth
                    CHECK_MESSAGE(err2 < 1e-4, "variant ", std::string(variant->name),
                                  " coord ", cidx, " grad ", g[cidx], " fd ", fd2);
                    ++checked;
                } else {
                    ++checked;
                }
            }
        }
        CHECK(checked > 60);  // the skips must not eat the whole suite
    }
}

TEST_CASE("kernel selection honors explicit names") {
    const auto* before = &K::active();
    REQUIRE(K::select("scalar"));
    CHECK(std::string(K::active().name) == "scalar");
    CHECK_FALSE(K::select("no-such-isa"));
    CHECK(std::string(K::active().name) == "scalar");
    REQUIRE(K::select("auto"));
    (void)before;
}
