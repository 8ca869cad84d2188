#pragma once

#include <array>
#include <vector>

#include "sketchfit/common.hpp"

namespace sketchfit {

// Triangle mesh with counter-clockwise winding (outward normals).
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
};

// Throws validation_error on out-of-range or repeated face indices and on
// non-finite vertices.
void validate_mesh(const Mesh& mesh);

// Plane {x : dot(normal, x) = offset}; default is the x = 0 plane.
struct SymmetryPlane {
    Vec3 normal{1.0, 0.0, 0.0};
    double offset = 0.0;
};

void validate_plane(const SymmetryPlane& plane);

// Householder reflection about the plane's direction: I - 2 n n^T.
// Reflection about an offset plane is T (x - d n) + d n, see reflect_point.
Mat3 reflection_matrix(const SymmetryPlane& plane);
Vec3 reflect_point(const SymmetryPlane& plane, const Vec3& p);
Mesh reflect_mesh(const SymmetryPlane& plane, const Mesh& mesh);

// Unit sphere built by subdividing an icosahedron; symmetric about x = 0.
// subdivisions > 5 throws capacity_error.
Mesh icosphere(int subdivisions);

// Axis-aligned box centered at the origin, 12 triangles.
Mesh box_mesh(const Vec3& half_extents);

// Per-axis scale; positive factors only (winding would flip otherwise).
Mesh scale_mesh(const Mesh& mesh, const Vec3& factors);
Mesh translate_mesh(const Mesh& mesh, const Vec3& t);

struct Edge {
    int v0, v1;                  // v0 < v1
    std::array<int, 2> face{-1, -1};
    int face_count = 0;
};

struct Adjacency {
    std::vector<Edge> edges;
    std::vector<std::vector<int>> neighbors;  // sorted vertex neighbors
    int boundary_edges = 0;                   // edges with one adjacent face
};

// Throws nonmanifold_error if an edge has more than two adjacent faces.
Adjacency build_adjacency(const Mesh& mesh);

Mesh apply_offsets(const Mesh& tmpl, const std::vector<Vec3>& offsets);

struct VoxelGrid {
    int resolution = 0;
    Vec3 lo, hi;
    std::vector<uint8_t> occupancy;  // resolution^3, x fastest

    bool at(int ix, int iy, int iz) const {
        return occupancy[(static_cast<size_t>(iz) * resolution + iy) * resolution + ix] != 0;
    }
    size_t count() const;
};

// Voxelizes onto a given grid box; cell is occupied iff its center is inside
// the mesh by +x ray parity (with a deterministic nudge when a ray grazes an
// edge or vertex).
VoxelGrid voxelize(const Mesh& mesh, int resolution, const Vec3& lo, const Vec3& hi);

// Shared grid from the padded union bounding box of both meshes.
// Throws degenerate_error when both voxelizations come out empty.
double voxel_iou(const Mesh& a, const Mesh& b, int resolution);

// (1/N) sum_i min_j || T v_i - v_j ||^2, the residual of mirror symmetry.
double asymmetry_distance(const Mesh& mesh, const SymmetryPlane& plane);

}  // namespace sketchfit
