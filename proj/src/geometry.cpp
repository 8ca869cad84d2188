#include "sketchfit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace sketchfit {

void validate_mesh(const Mesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    for (const Vec3& v : mesh.vertices)
        if (!finite(v)) throw validation_error("mesh has a non-finite vertex");
    for (const auto& f : mesh.faces) {
        for (int idx : f)
            if (idx < 0 || idx >= n)
                throw validation_error("face index out of range");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw validation_error("face repeats a vertex index");
    }
}

void validate_plane(const SymmetryPlane& plane) {
    if (std::fabs(norm(plane.normal) - 1.0) > 1e-9)
        throw validation_error("symmetry plane normal must be unit length");
}

Mat3 reflection_matrix(const SymmetryPlane& plane) {
    validate_plane(plane);
    const Vec3& n = plane.normal;
    Mat3 t = Mat3::identity();
    const double nn[3] = {n.x, n.y, n.z};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t.m[i][j] -= 2.0 * nn[i] * nn[j];
    return t;
}

Vec3 reflect_point(const SymmetryPlane& plane, const Vec3& p) {
    const Vec3 shift = plane.normal * plane.offset;
    return reflection_matrix(plane).apply(p - shift) + shift;
}

Mesh reflect_mesh(const SymmetryPlane& plane, const Mesh& mesh) {
    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = reflect_point(plane, v);
    // Reflection flips orientation; swap two indices to restore outward winding.
    for (auto& f : out.faces) std::swap(f[1], f[2]);
    return out;
}

Mesh icosphere(int subdivisions) {
    if (subdivisions < 0) throw validation_error("subdivisions must be >= 0");
    if (subdivisions > 5) throw capacity_error("icosphere subdivisions capped at 5");

    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                  {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                  {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int i, int j) {
            auto key = std::minmax(i, j);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(m.vertices.size());
            m.vertices.push_back((m.vertices[i] + m.vertices[j]) * 0.5);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (Vec3& v : m.vertices) v = normalized(v);
    return m;
}

Mesh box_mesh(const Vec3& he) {
    if (he.x <= 0 || he.y <= 0 || he.z <= 0)
        throw validation_error("box half extents must be positive");
    Mesh m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back({(i & 1) ? he.x : -he.x, (i & 2) ? he.y : -he.y,
                              (i & 4) ? he.z : -he.z});
    // Two triangles per box face, outward CCW.
    m.faces = {{0, 2, 3}, {0, 3, 1},   // -z
               {4, 5, 7}, {4, 7, 6},   // +z
               {0, 1, 5}, {0, 5, 4},   // -y
               {2, 6, 7}, {2, 7, 3},   // +y
               {0, 4, 6}, {0, 6, 2},   // -x
               {1, 3, 7}, {1, 7, 5}};  // +x
    return m;
}

Mesh scale_mesh(const Mesh& mesh, const Vec3& f) {
    if (f.x <= 0 || f.y <= 0 || f.z <= 0)
        throw validation_error("scale factors must be positive");
    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = {v.x * f.x, v.y * f.y, v.z * f.z};
    return out;
}

Mesh translate_mesh(const Mesh& mesh, const Vec3& t) {
    Mesh out = mesh;
    for (Vec3& v : out.vertices) v += t;
    return out;
}

Adjacency build_adjacency(const Mesh& mesh) {
    validate_mesh(mesh);
    Adjacency adj;
    adj.neighbors.assign(mesh.vertices.size(), {});
    std::map<std::pair<int, int>, int> edge_index;
    for (int fi = 0; fi < static_cast<int>(mesh.faces.size()); ++fi) {
        const auto& f = mesh.faces[fi];
        for (int k = 0; k < 3; ++k) {
            const auto key = std::minmax(f[k], f[(k + 1) % 3]);
            auto it = edge_index.find(key);
            if (it == edge_index.end()) {
                Edge e;
                e.v0 = key.first;
                e.v1 = key.second;
                e.face[0] = fi;
                e.face_count = 1;
                edge_index.emplace(key, static_cast<int>(adj.edges.size()));
                adj.edges.push_back(e);
            } else {
                Edge& e = adj.edges[it->second];
                if (e.face_count >= 2)
                    throw nonmanifold_error("edge shared by more than two faces");
                e.face[e.face_count++] = fi;
            }
        }
    }
    for (const Edge& e : adj.edges) {
        adj.neighbors[e.v0].push_back(e.v1);
        adj.neighbors[e.v1].push_back(e.v0);
        if (e.face_count == 1) ++adj.boundary_edges;
    }
    for (auto& nb : adj.neighbors) std::sort(nb.begin(), nb.end());
    return adj;
}

Mesh apply_offsets(const Mesh& tmpl, const std::vector<Vec3>& offsets) {
    if (offsets.size() != tmpl.vertices.size())
        throw shape_error("offset count does not match vertex count");
    Mesh out = tmpl;
    for (size_t i = 0; i < offsets.size(); ++i) out.vertices[i] += offsets[i];
    return out;
}

size_t VoxelGrid::count() const {
    size_t c = 0;
    for (uint8_t v : occupancy) c += v;
    return c;
}

namespace {

// Crossing x positions of the +x ray through (y, z). nullopt means the ray
// grazed an edge or vertex and the caller should nudge and retry.
std::optional<std::vector<double>> ray_crossings(const Mesh& mesh, double y,
                                                 double z) {
    constexpr double kGraze = 1e-12;
    std::vector<double> xs;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        // Barycentric solve in the yz plane.
        const double d00 = b.y - a.y, d01 = c.y - a.y;
        const double d10 = b.z - a.z, d11 = c.z - a.z;
        const double det = d00 * d11 - d01 * d10;
        if (std::fabs(det) < kGraze) continue;  // face parallel to the ray
        const double py = y - a.y, pz = z - a.z;
        const double u = (py * d11 - d01 * pz) / det;
        const double v = (d00 * pz - py * d10) / det;
        const double w = 1.0 - u - v;
        const double m = std::min({u, v, w});
        if (m < -kGraze) continue;           // outside
        if (m < kGraze) return std::nullopt;  // grazing hit
        xs.push_back(a.x + u * (b.x - a.x) + v * (c.x - a.x));
    }
    return xs;
}

}  // namespace

VoxelGrid voxelize(const Mesh& mesh, int resolution, const Vec3& lo, const Vec3& hi) {
    if (resolution <= 0) throw validation_error("voxel resolution must be positive");
    if (!(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z))
        throw validation_error("voxel bounds are degenerate");
    validate_mesh(mesh);

    VoxelGrid grid;
    grid.resolution = resolution;
    grid.lo = lo;
    grid.hi = hi;
    grid.occupancy.assign(static_cast<size_t>(resolution) * resolution * resolution, 0);

    const Vec3 cell{(hi.x - lo.x) / resolution, (hi.y - lo.y) / resolution,
                    (hi.z - lo.z) / resolution};
    for (int iz = 0; iz < resolution; ++iz) {
        const double zc = lo.z + (iz + 0.5) * cell.z;
        for (int iy = 0; iy < resolution; ++iy) {
            const double yc = lo.y + (iy + 0.5) * cell.y;
            std::optional<std::vector<double>> xs;
            double y = yc, z = zc;
            for (int attempt = 0; attempt < 8 && !xs; ++attempt) {
                xs = ray_crossings(mesh, y, z);
                if (!xs) {
                    const double nudge = (attempt + 1) * 1e-7 *
                                         std::max({cell.x, cell.y, cell.z});
                    y = yc + nudge;
                    z = zc + nudge * 0.618;
                }
            }
            if (!xs) continue;  // persistently grazing row, leave empty
            std::sort(xs->begin(), xs->end());
            size_t next = 0;
            bool inside = false;
            for (int ix = 0; ix < resolution; ++ix) {
                const double xc = lo.x + (ix + 0.5) * cell.x;
                while (next < xs->size() && (*xs)[next] < xc) {
                    inside = !inside;
                    ++next;
                }
                if (inside)
                    grid.occupancy[(static_cast<size_t>(iz) * resolution + iy) *
                                       resolution + ix] = 1;
            }
        }
    }
    return grid;
}

double voxel_iou(const Mesh& a, const Mesh& b, int resolution) {
    validate_mesh(a);
    validate_mesh(b);
    if (a.vertices.empty() || b.vertices.empty())
        throw degenerate_error("voxel_iou needs non-empty meshes");

    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    auto grow = [&](const Mesh& m) {
        for (const Vec3& v : m.vertices) {
            lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
            hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
        }
    };
    grow(a);
    grow(b);
    for (int axis = 0; axis < 3; ++axis) {
        const double extent = hi[axis] - lo[axis];
        const double pad = std::max(extent * 0.05, 1e-6);
        lo[axis] -= pad;
        hi[axis] += pad;
    }

    const VoxelGrid ga = voxelize(a, resolution, lo, hi);
    const VoxelGrid gb = voxelize(b, resolution, lo, hi);
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < ga.occupancy.size(); ++i) {
        const bool ia = ga.occupancy[i] != 0;
        const bool ib = gb.occupancy[i] != 0;
        inter += (ia && ib);
        uni += (ia || ib);
    }
    if (uni == 0) throw degenerate_error("both voxelizations are empty");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double asymmetry_distance(const Mesh& mesh, const SymmetryPlane& plane) {
    validate_plane(plane);
    if (mesh.vertices.empty())
        throw degenerate_error("asymmetry_distance of an empty mesh");
    const size_t n = mesh.vertices.size();
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 r = reflect_point(plane, mesh.vertices[i]);
        double best = norm2(r - mesh.vertices[0]);
        for (size_t j = 1; j < n; ++j) {
            const double d = norm2(r - mesh.vertices[j]);
            if (d < best) best = d;
        }
        total += best;
    }
    return total / static_cast<double>(n);
}

}  // namespace sketchfit
