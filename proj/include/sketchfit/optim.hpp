#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sketchfit/adam.hpp"
#include "sketchfit/discriminator.hpp"
#include "sketchfit/losses.hpp"

namespace sketchfit {

// base * decay^floor(step / period)
double lr_at(int64_t step, double base, double decay, int64_t period);

struct GradcheckResult {
    double max_rel_err = 0.0;
    int worst_coord = -1;  // vertex * 3 + axis
    int checked = 0;
    int skipped_nonsmooth = 0;
};

// Central finite differences per vertex coordinate against the supplied
// analytic gradient. Coordinates whose relative error moves by more than
// 10x when h is halved are treated as sitting on a non-smooth point and
// excluded from the reported maximum.
GradcheckResult gradcheck(const std::function<double(const Mesh&)>& value_fn,
                          const std::vector<Vec3>& analytic_grad,
                          const Mesh& mesh, double h);

struct FitConfig {
    LossWeights weights;
    double w_laplacian = 1.0;
    double w_flatten = 1.0;
    std::vector<int> resolutions{32, 64, 128};
    int steps = 1500;
    double lr = 1e-4;
    double lr_decay = 0.3;
    int lr_period = 800;
    uint64_t seed = 0;
    bool enable_sd = false;
    bool enable_sp = true;
    int views = 4;               // random views per step (image symmetry + SD)
    double sigma = 1e-4;
    double camera_distance = 2.732;
    double fov_deg = 30.0;
    int disc_resolution = 64;
    double disc_lr = 1e-4;
};

void validate_fit_config(const FitConfig& cfg);

struct StepRecord {
    int step = 0;
    int stage_res = 0;
    double lr = 0.0;
    LossReport losses;
    double wall_ms = 0.0;
};

struct FitHistory {
    std::vector<StepRecord> steps;
    double final_iou = 0.0;        // binary 2D IoU vs target at full resolution
    double final_asymmetry = 0.0;  // asymmetry_distance about the x = 0 plane
    double wall_seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

struct FitResult {
    Mesh mesh;
    FitHistory history;
};

// Procedural symmetric primitives (spheres, boxes, ellipsoids) used as the
// discriminator's ground-truth pool.
std::vector<Mesh> make_primitive_pool(int count, uint64_t seed);

// Deforms the template by per-vertex offsets under the five-term objective:
// multi-scale silhouette IoU at the canonical view, Laplacian + flatten
// regularizers, vertex and image symmetry (when enable_sp), and the shape
// discriminator (when enable_sd, which also takes one discriminator training
// step per generator step on freshly sampled views). Deterministic per seed.
FitResult fit(const Silhouette& target, const Mesh& tmpl, const FitConfig& cfg,
              const std::vector<Mesh>* real_pool = nullptr);

// Binary IoU of the 0.5-thresholded render against a binary target.
double binary_silhouette_iou(const Silhouette& rendered, const Silhouette& target);

}  // namespace sketchfit
