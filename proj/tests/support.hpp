#pragma once

#include <cmath>
#include <functional>

#include "sketchfit/geometry.hpp"

// Test-side finite-difference oracle, independent of the library's own
// gradcheck harness.

namespace testsupport {

using sketchfit::Mesh;
using sketchfit::Vec3;

struct FdStats {
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;
};

inline double central_diff(const std::function<double(const Mesh&)>& f, Mesh& probe,
                           size_t vi, int axis, double h) {
    const double saved = probe.vertices[vi][axis];
    probe.vertices[vi][axis] = saved + h;
    const double fp = f(probe);
    probe.vertices[vi][axis] = saved - h;
    const double fm = f(probe);
    probe.vertices[vi][axis] = saved;
    return (fp - fm) / (2.0 * h);
}

// Compares an analytic gradient against central differences, skipping
// coordinates where halving h moves the error by more than 10x (kinks) and
// coordinates below the finite-difference resolution floor.
inline FdStats compare_grad(const std::function<double(const Mesh&)>& f,
                            const Mesh& mesh, const std::vector<Vec3>& analytic,
                            double h = 1e-4, double fd_floor = 1e-8) {
    FdStats stats;
    Mesh probe = mesh;
    for (size_t vi = 0; vi < mesh.vertices.size(); ++vi) {
        for (int axis = 0; axis < 3; ++axis) {
            const double ga = analytic[vi][axis];
            const double fd = central_diff(f, probe, vi, axis, h);
            if (std::max(std::fabs(ga), std::fabs(fd)) < fd_floor) {
                ++stats.checked;
                continue;
            }
            double err =
                std::fabs(ga - fd) / std::max({std::fabs(ga), std::fabs(fd), 1e-8});
            if (err > 1e-4) {
                const double fd2 = central_diff(f, probe, vi, axis, h * 0.5);
                const double err2 =
                    std::fabs(ga - fd2) / std::max({std::fabs(ga), std::fabs(fd2), 1e-8});
                const double lo = std::max(std::min(err, err2), 1e-300);
                if (std::max(err, err2) / lo > 10.0) {
                    ++stats.skipped;
                    continue;
                }
                // converging under refinement: truncation error, take the
                // better estimate
                err = std::min(err, err2);
            }
            ++stats.checked;
            if (err > stats.max_rel_err) stats.max_rel_err = err;
        }
    }
    return stats;
}

}  // namespace testsupport
