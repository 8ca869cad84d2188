#pragma once

#include <vector>

#include "sketchfit/geometry.hpp"

namespace sketchfit {

struct Camera {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    double distance = 2.732;
    double fov_deg = 30.0;
    int image_size = 64;
};

void validate_camera(const Camera& cam);

// Eye at distance * (cos e sin a, sin e, cos e cos a), looking at the origin
// with world up (0,1,0). Elevation of exactly +-90 degrees is rejected.
Camera camera_from_angles(double azimuth_deg, double elevation_deg,
                          double distance, int image_size,
                          double fov_deg = 30.0);

Vec3 camera_eye(const Camera& cam);

// Camera whose eye is the reflection of cam's eye through the plane.
// For the x = 0 plane this is azimuth -> -azimuth.
Camera mirror_camera(const Camera& cam, const SymmetryPlane& plane);

// Azimuth uniform in [0, 360), elevation uniform in [-20, 40] degrees.
std::vector<Camera> sample_random_views(int count, uint64_t seed,
                                        double distance = 2.732,
                                        int image_size = 64,
                                        double fov_deg = 30.0);

// Grayscale occupancy image, values in [0,1], row 0 at the top.
struct Silhouette {
    int width = 0, height = 0;
    std::vector<double> values;

    Silhouette() = default;
    Silhouette(int w, int h) : width(w), height(h), values(size_t(w) * h, 0.0) {}
    double& at(int row, int col) { return values[size_t(row) * width + col]; }
    double at(int row, int col) const { return values[size_t(row) * width + col]; }
};

struct RenderConfig {
    double sigma = 1e-4;     // sigmoid softness, squared NDC units
    double background = 0.0;
};

// Forward render with the state needed for the vertex-gradient pass.
class RenderCache {
  public:
    Silhouette silhouette;

    int vertex_count() const { return int(ndc_.size()); }

  private:
    friend RenderCache render_forward(const Mesh&, const Camera&, const RenderConfig&);
    friend std::vector<Vec3> render_backward(const RenderCache&,
                                             const std::vector<double>&);

    struct ProjVertex {
        double x = 0, y = 0;       // NDC position
        double jac[2][3] = {};     // d(x,y)/d(world vertex)
        bool in_front = false;
    };
    std::vector<ProjVertex> ndc_;
    std::vector<std::array<int, 3>> faces_;
    std::vector<uint8_t> face_live_;
    std::vector<double> log_acc_;
    int size_ = 0;
    double inv_sigma_ = 0.0;
    double background_ = 0.0;
};

// Soft silhouette: per pixel p, S(p) = 1 - prod_j (1 - D_j(p)) with
// D_j(p) = sigmoid(delta_j d^2(p, face j) / sigma), accumulated in log space.
RenderCache render_forward(const Mesh& mesh, const Camera& cam,
                           const RenderConfig& cfg);

// d(loss)/d(world vertices) given d(loss)/d(pixel values).
std::vector<Vec3> render_backward(const RenderCache& cache,
                                  const std::vector<double>& pixel_grad);

Silhouette soft_silhouette(const Mesh& mesh, const Camera& cam,
                           const RenderConfig& cfg);

// Box-average pooling by an integer factor dividing both dimensions.
Silhouette downsample(const Silhouette& s, int factor);

// Spreads coarse-pixel gradients uniformly over each pooled block.
void downsample_backward(const Silhouette& coarse_grad, int factor,
                         double weight, std::vector<double>& fine_grad);

Silhouette hflip(const Silhouette& s);

}  // namespace sketchfit
