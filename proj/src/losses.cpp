#include "sketchfit/losses.hpp"

#include <cmath>
#include <string>

#include "sketchfit/kernels.hpp"

namespace sketchfit {

void validate_weights(const LossWeights& w) {
    if (w.scale_weights.empty())
        throw validation_error("scale_weights must not be empty");
    for (double s : w.scale_weights)
        if (!(s >= 0.0)) throw validation_error("scale weights must be >= 0");
    if (!(w.lambda_sd >= 0.0 && w.lambda_sv >= 0.0 && w.lambda_isym >= 0.0))
        throw validation_error("loss weights must be >= 0");
}

IouLossResult iou_loss(const Silhouette& s1, const Silhouette& s2) {
    if (s1.width != s2.width || s1.height != s2.height)
        throw shape_error("iou_loss silhouettes differ in shape");
    constexpr double kDenomFloor = 1e-8;

    const size_t n = s1.values.size();
    double inter = 0.0, uni = 0.0;
    kernels::active().iou_sums(s1.values.data(), s2.values.data(), n, &inter, &uni);
    const bool floored = uni < kDenomFloor;
    const double denom = floored ? kDenomFloor : uni;

    IouLossResult out;
    out.value = 1.0 - inter / denom;
    out.d_s1.resize(n);
    const double inv_d = 1.0 / denom;
    const double inv_d2 = inter * inv_d * inv_d;
    for (size_t i = 0; i < n; ++i) {
        const double b = s2.values[i];
        // d(1 - I/U)/ds1 = -(b*U - I*(1-b)) / U^2; U is constant when floored
        out.d_s1[i] = floored ? -b * inv_d : -(b * inv_d - (1.0 - b) * inv_d2);
    }
    return out;
}

MultiscaleResult multiscale_silhouette_loss(const Silhouette& pred,
                                            const Silhouette& target,
                                            const std::vector<double>& scale_weights) {
    if (pred.width != target.width || pred.height != target.height)
        throw shape_error("prediction and target differ in shape");
    if (scale_weights.empty())
        throw validation_error("at least one scale weight required");

    MultiscaleResult out;
    out.d_pred.assign(pred.values.size(), 0.0);
    for (size_t i = 0; i < scale_weights.size(); ++i) {
        const int factor = 1 << i;
        if (pred.width % factor != 0 || pred.height % factor != 0)
            throw shape_error("resolution not divisible for scale " + std::to_string(i));
        const Silhouette p = downsample(pred, factor);
        const Silhouette t = downsample(target, factor);
        IouLossResult scale = iou_loss(p, t);
        out.per_scale.push_back(scale.value);
        out.value += scale_weights[i] * scale.value;

        Silhouette coarse_grad(p.width, p.height);
        coarse_grad.values = std::move(scale.d_s1);
        downsample_backward(coarse_grad, factor, scale_weights[i], out.d_pred);
    }
    return out;
}

VertexGradResult vertex_symmetry_loss(const Mesh& mesh, const SymmetryPlane& plane) {
    validate_plane(plane);
    if (mesh.vertices.empty())
        throw degenerate_error("vertex_symmetry_loss of an empty mesh");

    const Mat3 t = reflection_matrix(plane);
    const size_t n = mesh.vertices.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    VertexGradResult out;
    out.d_vertices.assign(n, Vec3{});
    for (size_t i = 0; i < n; ++i) {
        const Vec3 r = reflect_point(plane, mesh.vertices[i]);
        size_t best_j = 0;
        double best = norm2(r - mesh.vertices[0]);
        for (size_t j = 1; j < n; ++j) {
            const double d = norm2(r - mesh.vertices[j]);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        out.value += best * inv_n;
        const Vec3 diff = (r - mesh.vertices[best_j]) * (2.0 * inv_n);
        // d r / d v_i = T (the offset shift is constant)
        out.d_vertices[i] += t.apply(diff);
        out.d_vertices[best_j] -= diff;
    }
    return out;
}

ImagePairResult image_symmetry_term(const Silhouette& s1, const Silhouette& s2) {
    if (s1.width != s2.width || s1.height != s2.height)
        throw shape_error("image_symmetry_term shapes differ");
    ImagePairResult out;
    out.d_s1.assign(s1.values.size(), 0.0);
    out.d_s2.assign(s2.values.size(), 0.0);
    const Silhouette flipped = hflip(s1);
    out.value = kernels::active().sq_diff_sum(flipped.values.data(),
                                              s2.values.data(), s2.values.size());
    for (int r = 0; r < s1.height; ++r) {
        for (int c = 0; c < s1.width; ++c) {
            const double e = flipped.at(r, c) - s2.at(r, c);
            out.d_s1[size_t(r) * s1.width + (s1.width - 1 - c)] += 2.0 * e;
            out.d_s2[size_t(r) * s1.width + c] -= 2.0 * e;
        }
    }
    return out;
}

VertexGradResult image_symmetry_loss(const Mesh& mesh,
                                     const std::vector<Camera>& views,
                                     const SymmetryPlane& plane,
                                     const RenderConfig& cfg) {
    if (views.empty())
        throw validation_error("image_symmetry_loss needs at least one view");
    const double inv_m = 1.0 / static_cast<double>(views.size());

    VertexGradResult out;
    out.d_vertices.assign(mesh.vertices.size(), Vec3{});
    for (const Camera& view : views) {
        const Camera mirrored = mirror_camera(view, plane);
        const RenderCache rc1 = render_forward(mesh, view, cfg);
        const RenderCache rc2 = render_forward(mesh, mirrored, cfg);
        ImagePairResult term = image_symmetry_term(rc1.silhouette, rc2.silhouette);
        out.value += term.value * inv_m;
        for (double& g : term.d_s1) g *= inv_m;
        for (double& g : term.d_s2) g *= inv_m;
        const std::vector<Vec3> g1 = render_backward(rc1, term.d_s1);
        const std::vector<Vec3> g2 = render_backward(rc2, term.d_s2);
        for (size_t i = 0; i < out.d_vertices.size(); ++i)
            out.d_vertices[i] += g1[i] + g2[i];
    }
    return out;
}

VertexGradResult laplacian_loss(const Mesh& mesh, const Adjacency& adj) {
    VertexGradResult out;
    out.d_vertices.assign(mesh.vertices.size(), Vec3{});
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto& nb = adj.neighbors[i];
        if (nb.empty()) continue;
        Vec3 centroid;
        for (int j : nb) centroid += mesh.vertices[j];
        centroid *= 1.0 / static_cast<double>(nb.size());
        const Vec3 lap = mesh.vertices[i] - centroid;
        out.value += norm2(lap);
        out.d_vertices[i] += 2.0 * lap;
        const Vec3 spread = lap * (2.0 / static_cast<double>(nb.size()));
        for (int j : nb) out.d_vertices[j] -= spread;
    }
    return out;
}

VertexGradResult laplacian_loss(const Mesh& mesh) {
    return laplacian_loss(mesh, build_adjacency(mesh));
}

namespace {

Vec3 face_normal_raw(const Mesh& mesh, int fi) {
    const auto& f = mesh.faces[fi];
    return cross(mesh.vertices[f[1]] - mesh.vertices[f[0]],
                 mesh.vertices[f[2]] - mesh.vertices[f[0]]);
}

// Adds gn . d(cross(b-a, c-a))/d{a,b,c} to the vertex gradients.
void scatter_normal_grad(const Mesh& mesh, int fi, const Vec3& gn,
                         std::vector<Vec3>& grad) {
    const auto& f = mesh.faces[fi];
    const Vec3 u = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 w = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Vec3 gb = cross(w, gn);
    const Vec3 gc = cross(gn, u);
    grad[f[1]] += gb;
    grad[f[2]] += gc;
    grad[f[0]] -= gb + gc;
}

}  // namespace

FlattenResult flatten_loss(const Mesh& mesh, const Adjacency& adj) {
    FlattenResult out;
    out.d_vertices.assign(mesh.vertices.size(), Vec3{});
    for (const Edge& e : adj.edges) {
        if (e.face_count != 2) {
            ++out.skipped_boundary_edges;
            continue;
        }
        const Vec3 n0 = face_normal_raw(mesh, e.face[0]);
        const Vec3 n1 = face_normal_raw(mesh, e.face[1]);
        const double len0 = norm(n0), len1 = norm(n1);
        if (len0 < 1e-18 || len1 < 1e-18) continue;  // degenerate face
        const Vec3 u0 = n0 / len0, u1 = n1 / len1;
        const double cos_theta = -dot(u0, u1);
        const double term = (cos_theta + 1.0) * (cos_theta + 1.0);
        out.value += term;

        const double coef = -2.0 * (cos_theta + 1.0);
        // d cos / d n0 = -(I - u0 u0^T) u1 / |n0|
        const Vec3 gn0 = (u1 - u0 * dot(u0, u1)) * (coef / len0);
        const Vec3 gn1 = (u0 - u1 * dot(u0, u1)) * (coef / len1);
        scatter_normal_grad(mesh, e.face[0], gn0, out.d_vertices);
        scatter_normal_grad(mesh, e.face[1], gn1, out.d_vertices);
    }
    return out;
}

FlattenResult flatten_loss(const Mesh& mesh) {
    return flatten_loss(mesh, build_adjacency(mesh));
}

LossReport total_loss(double l_sp, double l_r, double l_sd, double l_vsym,
                      double l_isym, const LossWeights& weights) {
    validate_weights(weights);
    const struct {
        const char* name;
        double value;
    } parts[] = {{"l_sp", l_sp}, {"l_r", l_r}, {"l_sd", l_sd},
                 {"l_vsym", l_vsym}, {"l_isym", l_isym}};
    for (const auto& p : parts)
        if (!std::isfinite(p.value))
            throw numeric_error(std::string("non-finite loss component: ") + p.name);

    LossReport report;
    report.l_sp = l_sp;
    report.l_r = l_r;
    report.l_sd = l_sd;
    report.l_vsym = l_vsym;
    report.l_isym = l_isym;
    report.total = l_sp + l_r + weights.lambda_sd * l_sd +
                   weights.lambda_sv * l_vsym + weights.lambda_isym * l_isym;
    return report;
}

}  // namespace sketchfit
