#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Data-parallel inner loops used by the renderer, losses, optimizer and
// discriminator. Every kernel has a scalar reference implementation and,
// on x86-64 with AVX2+FMA, a vectorized variant. The active set is picked
// at runtime (CPU detection, overridable via the SKETCHFIT_KERNELS
// environment variable or select()). Variants are equivalence-tested
// against the scalar reference; each variant on its own is deterministic.

namespace sketchfit::kernels {

// exp(z) underflows to exactly 0.0 for z below this, so coverage terms from
// farther away can be skipped without changing any accumulated bit. The
// rasterizer derives its face reach from it.
constexpr double exp_zero_cutoff = -746.0;

// One raster row of one projected triangle. Pixel i sits at
// (x0 + i*dx, py) in NDC. inv_sigma scales the squared distance that feeds
// the coverage sigmoid.
struct TriRow {
    double ax, ay, bx, by, cx, cy;
    double py;
    double x0, dx;
    int n;
    double inv_sigma;
};

struct AdamConsts {
    double lr;
    double beta1, beta2;
    double eps;
    double bias1, bias2;  // 1 - beta^t, precomputed by the caller
};

struct Kernels {
    const char* name;

    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);
    // inter = sum(a*b), uni = sum(a + b - a*b)
    void (*iou_sums)(const double* a, const double* b, std::size_t n,
                     double* inter, double* uni);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*adam_update)(double* p, const double* g, double* m, double* v,
                        std::size_t n, const AdamConsts& c);
    void (*leaky_relu)(const double* x, double* y, std::size_t n, double slope);
    // gx += gy * (x > 0 ? 1 : slope)
    void (*leaky_relu_grad)(const double* x, const double* gy, double* gx,
                            std::size_t n, double slope);
    // logacc[i] += log(1 - sigmoid(z_i)) with z_i the signed scaled squared
    // distance of pixel i to the triangle boundary.
    void (*tri_row_forward)(const TriRow& t, double* logacc);
    // g[0..5] += d(sum_i upstream_i * log(1 - sigmoid(z_i)))/d(ax,ay,...,cy),
    // negated to match the forward accumulation direction; upstream_i already
    // carries gpix_i * (1 - S_i).
    void (*tri_row_backward)(const TriRow& t, const double* upstream, double g[6]);
};

const Kernels& scalar();
#if defined(SKETCHFIT_HAVE_AVX2)
const Kernels& avx2();
#endif

// Active set: SKETCHFIT_KERNELS=scalar|avx2|auto, else CPU detection.
const Kernels& active();
// Force a variant by name; returns false if unknown or unsupported here.
bool select(std::string_view name);
std::vector<const Kernels*> available();

}  // namespace sketchfit::kernels
