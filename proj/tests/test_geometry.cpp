#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sketchfit/geometry.hpp"

using namespace sketchfit;

TEST_CASE("icosphere counts follow the subdivision formula") {
    // V = 10 * 4^s + 2, F = 20 * 4^s
    const Mesh m0 = icosphere(0);
    CHECK(m0.vertices.size() == 12);
    CHECK(m0.faces.size() == 20);
    const Mesh m1 = icosphere(1);
    CHECK(m1.vertices.size() == 42);
    CHECK(m1.faces.size() == 80);
    const Mesh m2 = icosphere(2);
    CHECK(m2.vertices.size() == 162);
    CHECK(m2.faces.size() == 320);
    CHECK_THROWS_AS(icosphere(6), capacity_error);
    CHECK_THROWS_AS(icosphere(-1), validation_error);
}

TEST_CASE("icosphere vertices sit on the unit sphere") {
    for (int s : {0, 1, 3}) {
        const Mesh m = icosphere(s);
        double worst = 0.0;
        for (const Vec3& v : m.vertices) worst = std::max(worst, std::fabs(norm(v) - 1.0));
        CHECK(worst < 1e-7);
    }
}

TEST_CASE("generated templates satisfy Euler characteristic and manifoldness") {
    for (int s : {0, 1, 2}) {
        const Mesh m = icosphere(s);
        const Adjacency adj = build_adjacency(m);
        const long euler = long(m.vertices.size()) - long(adj.edges.size()) +
                           long(m.faces.size());
        CHECK(euler == 2);
        CHECK(adj.boundary_edges == 0);
    }
    const Mesh cube = box_mesh({0.5, 0.5, 0.5});
    const Adjacency adj = build_adjacency(cube);
    CHECK(cube.vertices.size() == 8);
    CHECK(cube.faces.size() == 12);
    CHECK(adj.edges.size() == 18);
    CHECK(adj.boundary_edges == 0);
}

TEST_CASE("icosphere is mirror symmetric about x = 0") {
    const SymmetryPlane plane;
    for (int s : {0, 1, 2}) CHECK(asymmetry_distance(icosphere(s), plane) == 0.0);
}

TEST_CASE("adjacency of a single triangle reports boundary edges") {
    Mesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    const Adjacency adj = build_adjacency(tri);
    CHECK(adj.edges.size() == 3);
    for (const Edge& e : adj.edges) CHECK(e.face_count == 1);
    CHECK(adj.boundary_edges == 3);
}

TEST_CASE("adjacency rejects non-manifold edges") {
    Mesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
    m.faces = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}};  // edge (0,1) on three faces
    CHECK_THROWS_AS(build_adjacency(m), nonmanifold_error);
}

TEST_CASE("mesh validation catches bad faces") {
    Mesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 5}};
    CHECK_THROWS_AS(validate_mesh(m), validation_error);
    m.faces = {{0, 1, 1}};
    CHECK_THROWS_AS(validate_mesh(m), validation_error);
    m.faces = {{0, 1, 2}};
    CHECK_NOTHROW(validate_mesh(m));
    m.vertices[0].x = std::nan("");
    CHECK_THROWS_AS(validate_mesh(m), validation_error);
}

TEST_CASE("reflection matrix matches hand-evaluated cases") {
    const Mat3 tx = reflection_matrix(SymmetryPlane{{1, 0, 0}, 0.0});
    const double expect_x[3][3] = {{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(tx.m[i][j] == doctest::Approx(expect_x[i][j]));

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const Mat3 td = reflection_matrix(SymmetryPlane{{inv_sqrt2, inv_sqrt2, 0}, 0.0});
    const double expect_d[3][3] = {{0, -1, 0}, {-1, 0, 0}, {0, 0, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(td.m[i][j] == doctest::Approx(expect_d[i][j]).epsilon(1e-12));

    CHECK_THROWS_AS(reflection_matrix(SymmetryPlane{{1, 1, 0}, 0.0}), validation_error);
}

TEST_CASE("reflection is an involution") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Vec3 n{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (norm(n) < 1e-3) continue;
        const SymmetryPlane plane{normalized(n), rng.uniform(-0.5, 0.5)};
        const Mat3 t = reflection_matrix(plane);
        const Mat3 tt = t * t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(std::fabs(tt.m[i][j] - (i == j ? 1.0 : 0.0)) < 1e-12);

        const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec3 twice = reflect_point(plane, reflect_point(plane, p));
        CHECK(norm(twice - p) < 1e-9);
    }
}

TEST_CASE("reflect_mesh composed twice returns the original mesh") {
    const Mesh m = icosphere(1);
    const SymmetryPlane plane{normalized(Vec3{1, 2, 3}), 0.1};
    const Mesh back = reflect_mesh(plane, reflect_mesh(plane, m));
    for (size_t i = 0; i < m.vertices.size(); ++i)
        CHECK(norm(back.vertices[i] - m.vertices[i]) < 1e-9);
}

TEST_CASE("apply_offsets translates vertices and preserves faces") {
    const Mesh m = icosphere(1);
    SUBCASE("zero offsets leave the mesh identical") {
        const Mesh out = apply_offsets(m, std::vector<Vec3>(m.vertices.size()));
        for (size_t i = 0; i < m.vertices.size(); ++i) {
            CHECK(out.vertices[i].x == m.vertices[i].x);
            CHECK(out.vertices[i].y == m.vertices[i].y);
            CHECK(out.vertices[i].z == m.vertices[i].z);
        }
        CHECK(out.faces == m.faces);
    }
    SUBCASE("constant offset translates every vertex") {
        const Vec3 t{0.25, -1.0, 3.0};
        const Mesh out = apply_offsets(m, std::vector<Vec3>(m.vertices.size(), t));
        for (size_t i = 0; i < m.vertices.size(); ++i)
            CHECK(norm(out.vertices[i] - (m.vertices[i] + t)) == 0.0);
        CHECK(out.faces == m.faces);
    }
    SUBCASE("count mismatch is a shape error") {
        CHECK_THROWS_AS(apply_offsets(m, std::vector<Vec3>(3)), shape_error);
    }
}

TEST_CASE("voxel_iou on identical meshes is exactly one") {
    const Mesh m = icosphere(1);
    CHECK(voxel_iou(m, m, 24) == 1.0);
}

TEST_CASE("voxel_iou of disjoint copies is zero") {
    const Mesh a = box_mesh({0.4, 0.4, 0.4});
    const Mesh b = translate_mesh(a, {3.0, 0.0, 0.0});
    CHECK(voxel_iou(a, b, 32) == 0.0);
}

TEST_CASE("voxel_iou of half-overlapping unit cubes is one third") {
    // analytic volumes: intersection 0.5, union 1.5
    const Mesh a = box_mesh({0.5, 0.5, 0.5});
    const Mesh b = translate_mesh(a, {0.5, 0.0, 0.0});
    CHECK(std::fabs(voxel_iou(a, b, 64) - 1.0 / 3.0) < 0.02);
}

TEST_CASE("voxel_iou with two volume-free meshes is degenerate") {
    Mesh flat;  // zero-volume triangle pair, nothing encloses any cell center
    flat.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    flat.faces = {{0, 1, 2}, {1, 3, 2}};
    CHECK_THROWS_AS(voxel_iou(flat, flat, 16), degenerate_error);
    CHECK_THROWS_AS(voxel_iou(Mesh{}, Mesh{}, 16), degenerate_error);
}

TEST_CASE("voxel_iou is symmetric in its arguments") {
    const Mesh a = icosphere(1);
    const Mesh b = box_mesh({0.6, 0.8, 0.7});
    CHECK(voxel_iou(a, b, 32) == voxel_iou(b, a, 32));
}

TEST_CASE("voxelization of a box matches its analytic volume fraction") {
    const Mesh m = box_mesh({0.5, 0.5, 0.5});
    const VoxelGrid g = voxelize(m, 64, {-1, -1, -1}, {1, 1, 1});
    const double frac = double(g.count()) / double(64 * 64 * 64);
    CHECK(frac == doctest::Approx(1.0 / 8.0).epsilon(0.05));
}

TEST_CASE("asymmetry distance hand values") {
    const SymmetryPlane plane;
    SUBCASE("single off-plane vertex") {
        Mesh m;
        m.vertices = {{1, 0, 0}};
        CHECK(asymmetry_distance(m, plane) == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("empty mesh is degenerate") {
        CHECK_THROWS_AS(asymmetry_distance(Mesh{}, plane), degenerate_error);
    }
}

TEST_CASE("union with the reflected copy is symmetric for any vertex set") {
    Rng rng(31);
    const SymmetryPlane plane;
    for (int trial = 0; trial < 10; ++trial) {
        Mesh m;
        const int n = 5 + int(rng.uniform_int(20));
        for (int i = 0; i < n; ++i)
            m.vertices.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
        Mesh doubled = m;
        for (const Vec3& v : m.vertices)
            doubled.vertices.push_back(reflect_point(plane, v));
        CHECK(asymmetry_distance(doubled, plane) == 0.0);
    }
}

TEST_CASE("asymmetry distance is invariant to vertex reordering") {
    Rng rng(37);
    Mesh m;
    for (int i = 0; i < 15; ++i)
        m.vertices.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const SymmetryPlane plane;
    const double base = asymmetry_distance(m, plane);
    Mesh shuffled = m;
    std::reverse(shuffled.vertices.begin(), shuffled.vertices.end());
    CHECK(asymmetry_distance(shuffled, plane) == doctest::Approx(base).epsilon(1e-12));
}
