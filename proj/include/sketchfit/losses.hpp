#pragma once

#include <vector>

#include "sketchfit/render.hpp"

namespace sketchfit {

struct LossWeights {
    std::vector<double> scale_weights{0.25, 0.25, 0.25, 0.25};
    double lambda_sd = 0.1;
    double lambda_sv = 0.1;
    double lambda_isym = 0.1;
};

void validate_weights(const LossWeights& w);

struct LossReport {
    double l_sp = 0.0;
    double l_r = 0.0;
    double l_sd = 0.0;
    double l_vsym = 0.0;
    double l_isym = 0.0;
    double total = 0.0;
};

// 1 - |s1 (x) s2| / |s1 (+) s2 - s1 (x) s2|, denominator floored at 1e-8.
struct IouLossResult {
    double value = 0.0;
    std::vector<double> d_s1;  // gradient w.r.t. s1 pixels
};
IouLossResult iou_loss(const Silhouette& s1, const Silhouette& s2);

// Weighted sum of iou_loss over a halving resolution pyramid; scale i uses
// factor 2^i (i from 0). Gradient is w.r.t. the full-resolution prediction.
struct MultiscaleResult {
    double value = 0.0;
    std::vector<double> per_scale;
    std::vector<double> d_pred;
};
MultiscaleResult multiscale_silhouette_loss(const Silhouette& pred,
                                            const Silhouette& target,
                                            const std::vector<double>& scale_weights);

struct VertexGradResult {
    double value = 0.0;
    std::vector<Vec3> d_vertices;
};

// (1/N) sum_i min_j || T v_i - v_j ||^2; gradient flows to v_i and its match.
VertexGradResult vertex_symmetry_loss(const Mesh& mesh, const SymmetryPlane& plane);

// Squared pixel difference between the horizontally flipped render and the
// render from the mirrored camera, summed over pixels, averaged over views.
VertexGradResult image_symmetry_loss(const Mesh& mesh,
                                     const std::vector<Camera>& views,
                                     const SymmetryPlane& plane,
                                     const RenderConfig& cfg);

// sum_pixels (hflip(s1) - s2)^2 with gradients; the per-view building block.
struct ImagePairResult {
    double value = 0.0;
    std::vector<double> d_s1;
    std::vector<double> d_s2;
};
ImagePairResult image_symmetry_term(const Silhouette& s1, const Silhouette& s2);

// sum_i || v_i - mean of neighbors ||^2
VertexGradResult laplacian_loss(const Mesh& mesh, const Adjacency& adj);
VertexGradResult laplacian_loss(const Mesh& mesh);

// sum_edges (cos theta_e + 1)^2 over interior dihedral angles; boundary
// edges are skipped and counted.
struct FlattenResult {
    double value = 0.0;
    std::vector<Vec3> d_vertices;
    int skipped_boundary_edges = 0;
};
FlattenResult flatten_loss(const Mesh& mesh, const Adjacency& adj);
FlattenResult flatten_loss(const Mesh& mesh);

// total = l_sp + l_r + lambda_sd*l_sd + lambda_sv*l_vsym + lambda_isym*l_isym.
// Throws numeric_error naming the first non-finite component.
LossReport total_loss(double l_sp, double l_r, double l_sd, double l_vsym,
                      double l_isym, const LossWeights& weights);

}  // namespace sketchfit
