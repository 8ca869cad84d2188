#include "sketchfit/render.hpp"

#include <algorithm>
#include <cmath>

#include "sketchfit/kernels.hpp"

namespace sketchfit {

void validate_camera(const Camera& cam) {
    if (!(cam.distance > 0.0)) throw validation_error("camera distance must be > 0");
    if (!(cam.fov_deg > 0.0 && cam.fov_deg < 180.0))
        throw validation_error("fov must be in (0, 180)");
    if (cam.image_size < 8 || (cam.image_size & (cam.image_size - 1)) != 0)
        throw validation_error("image size must be a power of two >= 8");
    if (std::fabs(std::fabs(cam.elevation_deg) - 90.0) < 1e-12)
        throw validation_error("elevation of +-90 degrees degenerates the up vector");
    if (!std::isfinite(cam.azimuth_deg) || !std::isfinite(cam.elevation_deg))
        throw validation_error("camera angles must be finite");
}

Camera camera_from_angles(double azimuth_deg, double elevation_deg,
                          double distance, int image_size, double fov_deg) {
    Camera cam;
    cam.azimuth_deg = azimuth_deg;
    cam.elevation_deg = elevation_deg;
    cam.distance = distance;
    cam.image_size = image_size;
    cam.fov_deg = fov_deg;
    validate_camera(cam);
    return cam;
}

Vec3 camera_eye(const Camera& cam) {
    const double a = deg_to_rad(cam.azimuth_deg);
    const double e = deg_to_rad(cam.elevation_deg);
    return Vec3{std::cos(e) * std::sin(a), std::sin(e), std::cos(e) * std::cos(a)} *
           cam.distance;
}

Camera mirror_camera(const Camera& cam, const SymmetryPlane& plane) {
    validate_camera(cam);
    const Vec3 eye = reflect_point(plane, camera_eye(cam));
    const double dist = norm(eye);
    Camera out = cam;
    out.distance = dist;
    out.elevation_deg = rad_to_deg(std::asin(std::clamp(eye.y / dist, -1.0, 1.0)));
    out.azimuth_deg = rad_to_deg(std::atan2(eye.x, eye.z));
    validate_camera(out);
    return out;
}

std::vector<Camera> sample_random_views(int count, uint64_t seed, double distance,
                                        int image_size, double fov_deg) {
    if (count < 0) throw validation_error("view count must be >= 0");
    Rng rng(seed);
    std::vector<Camera> views;
    views.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double az = rng.uniform(0.0, 360.0);
        const double el = rng.uniform(-20.0, 40.0);
        views.push_back(camera_from_angles(az, el, distance, image_size, fov_deg));
    }
    return views;
}

namespace {

struct CameraFrame {
    Vec3 eye;
    Vec3 right, up, forward;  // forward points from eye to origin
    double tan_half_fov;
};

CameraFrame make_frame(const Camera& cam) {
    CameraFrame f;
    f.eye = camera_eye(cam);
    f.forward = normalized(-f.eye);
    const Vec3 world_up{0.0, 1.0, 0.0};
    f.right = normalized(cross(f.forward, world_up));
    f.up = cross(f.right, f.forward);
    f.tan_half_fov = std::tan(deg_to_rad(cam.fov_deg) * 0.5);
    return f;
}

constexpr double kMinDepth = 1e-6;
constexpr double kMinProjectedArea2 = 2e-12;  // 2 * area threshold

}  // namespace

RenderCache render_forward(const Mesh& mesh, const Camera& cam,
                           const RenderConfig& cfg) {
    validate_camera(cam);
    validate_mesh(mesh);
    if (!(cfg.sigma > 0.0)) throw validation_error("sigma must be positive");

    const CameraFrame frame = make_frame(cam);
    const int size = cam.image_size;

    RenderCache cache;
    cache.size_ = size;
    cache.inv_sigma_ = 1.0 / cfg.sigma;
    cache.background_ = cfg.background;
    cache.faces_ = mesh.faces;
    cache.ndc_.resize(mesh.vertices.size());

    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        auto& pv = cache.ndc_[i];
        const Vec3 rel = mesh.vertices[i] - frame.eye;
        const double cx = dot(rel, frame.right);
        const double cy = dot(rel, frame.up);
        const double depth = dot(rel, frame.forward);
        if (depth <= kMinDepth) {
            pv.in_front = false;
            continue;
        }
        pv.in_front = true;
        const double inv = 1.0 / (depth * frame.tan_half_fov);
        pv.x = cx * inv;
        pv.y = cy * inv;
        // x_ndc = cx / (depth * tan), so
        // d(x_ndc)/d(world) = (right - x_ndc*tan*forward) / (depth * tan)
        const double inv_w = 1.0 / depth;
        for (int ax = 0; ax < 3; ++ax) {
            const double r = ax == 0 ? frame.right.x : (ax == 1 ? frame.right.y : frame.right.z);
            const double u = ax == 0 ? frame.up.x : (ax == 1 ? frame.up.y : frame.up.z);
            const double fw = ax == 0 ? frame.forward.x : (ax == 1 ? frame.forward.y : frame.forward.z);
            pv.jac[0][ax] = (r * inv_w - cx * inv_w * inv_w * fw) / frame.tan_half_fov;
            pv.jac[1][ax] = (u * inv_w - cy * inv_w * inv_w * fw) / frame.tan_half_fov;
        }
    }

    cache.face_live_.assign(mesh.faces.size(), 0);
    cache.log_acc_.assign(size_t(size) * size, 0.0);

    const auto& K = kernels::active();
    const double px_step = 2.0 / size;
    // Beyond this distance from a face the coverage term underflows to an
    // exact zero, so the face bounding box can be clipped without changing
    // any output bit.
    const double reach = std::sqrt(-kernels::exp_zero_cutoff * cfg.sigma) + px_step;

    for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& f = mesh.faces[fi];
        const auto& a = cache.ndc_[f[0]];
        const auto& b = cache.ndc_[f[1]];
        const auto& c = cache.ndc_[f[2]];
        if (!a.in_front || !b.in_front || !c.in_front) continue;
        const double area2 = std::fabs((b.x - a.x) * (c.y - a.y) -
                                       (b.y - a.y) * (c.x - a.x));
        if (area2 < kMinProjectedArea2) continue;
        cache.face_live_[fi] = 1;

        const double xlo = std::min({a.x, b.x, c.x}) - reach;
        const double xhi = std::max({a.x, b.x, c.x}) + reach;
        const double ylo = std::min({a.y, b.y, c.y}) - reach;
        const double yhi = std::max({a.y, b.y, c.y}) + reach;
        // pixel centers: x = -1 + (col + 0.5) * step, y = 1 - (row + 0.5) * step
        int col0 = std::max(0, int(std::ceil((xlo + 1.0) / px_step - 0.5)));
        int col1 = std::min(size - 1, int(std::floor((xhi + 1.0) / px_step - 0.5)));
        int row0 = std::max(0, int(std::ceil((1.0 - yhi) / px_step - 0.5)));
        int row1 = std::min(size - 1, int(std::floor((1.0 - ylo) / px_step - 0.5)));
        if (col0 > col1 || row0 > row1) continue;

        kernels::TriRow tr;
        tr.ax = a.x; tr.ay = a.y;
        tr.bx = b.x; tr.by = b.y;
        tr.cx = c.x; tr.cy = c.y;
        tr.dx = px_step;
        tr.inv_sigma = cache.inv_sigma_;
        tr.x0 = -1.0 + (col0 + 0.5) * px_step;
        tr.n = col1 - col0 + 1;
        for (int row = row0; row <= row1; ++row) {
            tr.py = 1.0 - (row + 0.5) * px_step;
            K.tri_row_forward(tr, &cache.log_acc_[size_t(row) * size + col0]);
        }
    }

    cache.silhouette = Silhouette(size, size);
    const double bg = cfg.background;
    for (size_t i = 0; i < cache.log_acc_.size(); ++i) {
        const double coverage = -std::expm1(cache.log_acc_[i]);
        cache.silhouette.values[i] = bg + (1.0 - bg) * coverage;
    }
    return cache;
}

std::vector<Vec3> render_backward(const RenderCache& cache,
                                  const std::vector<double>& pixel_grad) {
    const int size = cache.size_;
    if (pixel_grad.size() != size_t(size) * size)
        throw shape_error("pixel gradient size mismatch");

    // upstream(p) = gpix(p) * dS/dA = gpix * (1 - bg) * exp(log_acc)
    std::vector<double> upstream(pixel_grad.size());
    const double scale = 1.0 - cache.background_;
    for (size_t i = 0; i < upstream.size(); ++i)
        upstream[i] = pixel_grad[i] * scale * std::exp(cache.log_acc_[i]);

    std::vector<Vec3> grad(cache.ndc_.size());
    const auto& K = kernels::active();
    const double px_step = 2.0 / size;
    const double sigma = 1.0 / cache.inv_sigma_;
    const double reach = std::sqrt(-kernels::exp_zero_cutoff * sigma) + px_step;

    for (size_t fi = 0; fi < cache.faces_.size(); ++fi) {
        if (!cache.face_live_[fi]) continue;
        const auto& f = cache.faces_[fi];
        const auto& a = cache.ndc_[f[0]];
        const auto& b = cache.ndc_[f[1]];
        const auto& c = cache.ndc_[f[2]];

        const double xlo = std::min({a.x, b.x, c.x}) - reach;
        const double xhi = std::max({a.x, b.x, c.x}) + reach;
        const double ylo = std::min({a.y, b.y, c.y}) - reach;
        const double yhi = std::max({a.y, b.y, c.y}) + reach;
        int col0 = std::max(0, int(std::ceil((xlo + 1.0) / px_step - 0.5)));
        int col1 = std::min(size - 1, int(std::floor((xhi + 1.0) / px_step - 0.5)));
        int row0 = std::max(0, int(std::ceil((1.0 - yhi) / px_step - 0.5)));
        int row1 = std::min(size - 1, int(std::floor((1.0 - ylo) / px_step - 0.5)));
        if (col0 > col1 || row0 > row1) continue;

        kernels::TriRow tr;
        tr.ax = a.x; tr.ay = a.y;
        tr.bx = b.x; tr.by = b.y;
        tr.cx = c.x; tr.cy = c.y;
        tr.dx = px_step;
        tr.inv_sigma = cache.inv_sigma_;
        tr.x0 = -1.0 + (col0 + 0.5) * px_step;
        tr.n = col1 - col0 + 1;

        double g2d[6] = {0, 0, 0, 0, 0, 0};
        for (int row = row0; row <= row1; ++row) {
            tr.py = 1.0 - (row + 0.5) * px_step;
            K.tri_row_backward(tr, &upstream[size_t(row) * size + col0], g2d);
        }
        for (int k = 0; k < 3; ++k) {
            const auto& pv = cache.ndc_[f[k]];
            Vec3& gv = grad[f[k]];
            for (int ax = 0; ax < 3; ++ax)
                gv[ax] += g2d[2 * k] * pv.jac[0][ax] + g2d[2 * k + 1] * pv.jac[1][ax];
        }
    }
    return grad;
}

Silhouette soft_silhouette(const Mesh& mesh, const Camera& cam,
                           const RenderConfig& cfg) {
    return render_forward(mesh, cam, cfg).silhouette;
}

Silhouette downsample(const Silhouette& s, int factor) {
    if (factor <= 0 || (factor & (factor - 1)) != 0)
        throw shape_error("downsample factor must be a power of two");
    if (factor == 1) return s;
    if (s.width % factor != 0 || s.height % factor != 0)
        throw shape_error("downsample factor must divide both dimensions");
    Silhouette out(s.width / factor, s.height / factor);
    const double inv = 1.0 / (double(factor) * factor);
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            double acc = 0.0;
            for (int dr = 0; dr < factor; ++dr)
                for (int dc = 0; dc < factor; ++dc)
                    acc += s.at(r * factor + dr, c * factor + dc);
            out.at(r, c) = acc * inv;
        }
    }
    return out;
}

void downsample_backward(const Silhouette& coarse_grad, int factor, double weight,
                         std::vector<double>& fine_grad) {
    const int fw = coarse_grad.width * factor;
    if (fine_grad.size() != size_t(fw) * coarse_grad.height * factor)
        throw shape_error("fine gradient size mismatch");
    const double w = weight / (double(factor) * factor);
    for (int r = 0; r < coarse_grad.height; ++r)
        for (int c = 0; c < coarse_grad.width; ++c) {
            const double g = coarse_grad.at(r, c) * w;
            for (int dr = 0; dr < factor; ++dr)
                for (int dc = 0; dc < factor; ++dc)
                    fine_grad[size_t(r * factor + dr) * fw + (c * factor + dc)] += g;
        }
}

Silhouette hflip(const Silhouette& s) {
    Silhouette out(s.width, s.height);
    for (int r = 0; r < s.height; ++r)
        for (int c = 0; c < s.width; ++c) out.at(r, c) = s.at(r, s.width - 1 - c);
    return out;
}

}  // namespace sketchfit
