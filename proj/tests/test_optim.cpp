#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sketchfit/io.hpp"
#include "sketchfit/optim.hpp"
#include "support.hpp"

using namespace sketchfit;

namespace {

// binary target: canonical-view silhouette of a cube
Silhouette cube_target(int res, double distance) {
    const Mesh cube = box_mesh({0.5, 0.5, 0.5});
    RenderConfig cfg;
    const Silhouette s =
        soft_silhouette(cube, camera_from_angles(0, 0, distance, res), cfg);
    Silhouette t(res, res);
    for (size_t i = 0; i < s.values.size(); ++i)
        t.values[i] = s.values[i] > 0.5 ? 1.0 : 0.0;
    return t;
}

// Desk-scale recipe: fitting a single target directly wants larger steps
// than a full training schedule, softer regularizers, and an image-symmetry
// weight scaled down by the pixel count its sum ranges over.
FitConfig toy_config(int res, int steps) {
    FitConfig cfg;
    cfg.resolutions = {res};
    cfg.steps = steps;
    cfg.lr = 1e-2;
    cfg.camera_distance = 4.0;
    cfg.views = 2;
    cfg.w_laplacian = 0.3;
    cfg.w_flatten = 0.1;
    cfg.weights.lambda_isym = 1e-4;
    cfg.enable_sd = false;
    cfg.enable_sp = true;
    return cfg;
}

}  // namespace

TEST_CASE("adam first-step closed form") {
    // bias-corrected first step moves by about -lr * sign(g)
    std::vector<double> p = {1.0};
    AdamState st;
    adam_step(p, {0.5}, st, 1e-4);
    CHECK(std::fabs(p[0] - (1.0 - 1e-4)) < 1e-7);
    CHECK(st.t == 1);
}

TEST_CASE("adam with zero learning rate updates moments but not parameters") {
    std::vector<double> p = {2.0, -3.0};
    AdamState st;
    adam_step(p, {0.5, -0.25}, st, 0.0);
    CHECK(p[0] == 2.0);
    CHECK(p[1] == -3.0);
    CHECK(st.m[0] != 0.0);
    CHECK(st.v[0] != 0.0);
}

TEST_CASE("adam with zero gradients never moves parameters") {
    std::vector<double> p = {1.0, 2.0};
    AdamState st;
    for (int i = 0; i < 10; ++i) adam_step(p, {0.0, 0.0}, st, 1e-2);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 2.0);
}

TEST_CASE("adam rejects NaN gradients and shape mismatches") {
    std::vector<double> p = {1.0};
    AdamState st;
    CHECK_THROWS_AS(adam_step(p, {std::nan("")}, st, 1e-3), numeric_error);
    CHECK_THROWS_AS(adam_step(p, {1.0, 2.0}, st, 1e-3), shape_error);
}

TEST_CASE("learning rate schedule") {
    CHECK(lr_at(0, 1e-4, 0.3, 800) == 1e-4);
    CHECK(std::fabs(lr_at(800, 1e-4, 0.3, 800) - 3e-5) < 1e-15);
    CHECK(std::fabs(lr_at(1600, 1e-4, 0.3, 800) - 9e-6) < 1e-15);
    CHECK(lr_at(799, 1e-4, 0.3, 800) == 1e-4);
    CHECK_THROWS_AS(lr_at(0, 1e-4, 0.3, 0), validation_error);

    SUBCASE("piecewise constant and non-increasing") {
        double prev = lr_at(0, 1e-4, 0.3, 100);
        for (int s = 1; s < 1000; ++s) {
            const double cur = lr_at(s, 1e-4, 0.3, 100);
            CHECK(cur <= prev);
            if (s % 100 != 0) CHECK(cur == prev);
            prev = cur;
        }
    }
}

TEST_CASE("gradcheck accepts an analytic quadratic and flags a sign flip") {
    Mesh m = icosphere(0);
    auto quad = [](const Mesh& probe) {
        double acc = 0.0;
        for (size_t i = 0; i < probe.vertices.size(); ++i) {
            const double w = 0.25 + 0.1 * double(i);
            acc += w * norm2(probe.vertices[i]);
        }
        return acc;
    };
    std::vector<Vec3> analytic(m.vertices.size());
    for (size_t i = 0; i < m.vertices.size(); ++i)
        analytic[i] = m.vertices[i] * (2.0 * (0.25 + 0.1 * double(i)));

    const GradcheckResult good = gradcheck(quad, analytic, m, 1e-4);
    CHECK(good.max_rel_err < 1e-8);
    CHECK(good.checked == int(m.vertices.size()) * 3);
    CHECK(good.skipped_nonsmooth == 0);

    std::vector<Vec3> flipped = analytic;
    for (Vec3& g : flipped) g = -g;
    const GradcheckResult bad = gradcheck(quad, flipped, m, 1e-4);
    CHECK(bad.max_rel_err == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("fit with zero steps returns the template unchanged") {
    const Mesh tmpl = icosphere(1);
    FitConfig cfg = toy_config(32, 0);
    const Silhouette target = cube_target(32, cfg.camera_distance);
    const FitResult res = fit(target, tmpl, cfg);
    REQUIRE(res.mesh.vertices.size() == tmpl.vertices.size());
    for (size_t i = 0; i < tmpl.vertices.size(); ++i)
        CHECK(norm(res.mesh.vertices[i] - tmpl.vertices[i]) == 0.0);
    CHECK(res.history.steps.empty());
}

TEST_CASE("fit validates its inputs") {
    const Mesh tmpl = icosphere(1);
    FitConfig cfg = toy_config(32, 4);
    Silhouette target = cube_target(32, cfg.camera_distance);

    SUBCASE("non-binary target") {
        target.values[5] = 0.5;
        CHECK_THROWS_AS(fit(target, tmpl, cfg), validation_error);
    }
    SUBCASE("non-square target") {
        CHECK_THROWS_AS(fit(Silhouette(32, 16), tmpl, cfg), validation_error);
    }
    SUBCASE("resolution not divisible") {
        cfg.resolutions = {64};
        CHECK_THROWS_AS(fit(target, tmpl, cfg), validation_error);
    }
    SUBCASE("SD without a pool") {
        cfg.enable_sd = true;
        CHECK_THROWS_AS(fit(target, tmpl, cfg), validation_error);
    }
    SUBCASE("decreasing resolutions") {
        cfg.resolutions = {32, 16};
        CHECK_THROWS_AS(validate_fit_config(cfg), validation_error);
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    const Mesh tmpl = icosphere(1);
    FitConfig cfg = toy_config(32, 6);
    cfg.seed = 77;
    const Silhouette target = cube_target(32, cfg.camera_distance);

    const FitResult a = fit(target, tmpl, cfg);
    const FitResult b = fit(target, tmpl, cfg);
    REQUIRE(a.history.steps.size() == b.history.steps.size());
    for (size_t i = 0; i < a.mesh.vertices.size(); ++i) {
        CHECK(a.mesh.vertices[i].x == b.mesh.vertices[i].x);
        CHECK(a.mesh.vertices[i].y == b.mesh.vertices[i].y);
        CHECK(a.mesh.vertices[i].z == b.mesh.vertices[i].z);
    }
    for (size_t i = 0; i < a.history.steps.size(); ++i)
        CHECK(a.history.steps[i].losses.total == b.history.steps[i].losses.total);
}

TEST_CASE("fit trajectory with lambda_sd zero matches a run without the discriminator") {
    const Mesh tmpl = icosphere(1);
    FitConfig off = toy_config(32, 5);
    off.seed = 31;
    off.enable_sd = false;

    FitConfig zero = off;
    zero.enable_sd = true;
    zero.weights.lambda_sd = 0.0;
    const auto pool = make_primitive_pool(4, 5);

    const Silhouette target = cube_target(32, off.camera_distance);
    const FitResult a = fit(target, tmpl, off);
    const FitResult b = fit(target, tmpl, zero, &pool);
    REQUIRE(a.mesh.vertices.size() == b.mesh.vertices.size());
    for (size_t i = 0; i < a.mesh.vertices.size(); ++i) {
        CHECK(a.mesh.vertices[i].x == b.mesh.vertices[i].x);
        CHECK(a.mesh.vertices[i].y == b.mesh.vertices[i].y);
        CHECK(a.mesh.vertices[i].z == b.mesh.vertices[i].z);
    }
}

TEST_CASE("fit follows the progressive resolution schedule") {
    const Mesh tmpl = icosphere(1);
    FitConfig cfg = toy_config(16, 7);
    cfg.resolutions = {16, 32};
    cfg.steps = 7;
    const Silhouette target = cube_target(32, cfg.camera_distance);
    const FitResult res = fit(target, tmpl, cfg);
    REQUIRE(res.history.steps.size() == 7);
    CHECK(res.history.steps[0].stage_res == 16);
    CHECK(res.history.steps[2].stage_res == 16);
    CHECK(res.history.steps[3].stage_res == 32);  // remainder goes to the later stage
    CHECK(res.history.steps[6].stage_res == 32);
}

TEST_CASE("toy cube fit converges and the loss trend is downward") {
    const Mesh tmpl = icosphere(2);
    FitConfig cfg = toy_config(64, 220);
    cfg.seed = 7;
    const Silhouette target = cube_target(64, cfg.camera_distance);
    const FitResult res = fit(target, tmpl, cfg);
    REQUIRE(!res.history.aborted);
    REQUIRE(res.history.steps.size() == 220);

    auto median_total = [&](size_t begin, size_t count) {
        std::vector<double> vals;
        for (size_t i = begin; i < begin + count; ++i)
            vals.push_back(res.history.steps[i].losses.total);
        std::sort(vals.begin(), vals.end());
        return vals[vals.size() / 2];
    };
    CHECK(median_total(res.history.steps.size() - 50, 50) < median_total(0, 50));
    MESSAGE("final 2D IoU after 220 steps: ", res.history.final_iou);
    CHECK(res.history.final_iou > 0.9);
}

TEST_CASE("enabling the symmetry prior never worsens asymmetry on symmetric targets") {
    const Mesh tmpl = icosphere(1);
    for (uint64_t seed : {3u, 9u}) {
        FitConfig cfg = toy_config(32, 80);
        cfg.seed = seed;
        const Silhouette target = cube_target(32, cfg.camera_distance);

        FitConfig no_sp = cfg;
        no_sp.enable_sp = false;
        const double with_sp = fit(target, tmpl, cfg).history.final_asymmetry;
        const double without = fit(target, tmpl, no_sp).history.final_asymmetry;
        CHECK(with_sp <= without + 1e-6);
    }
}

TEST_CASE("primitive pool generation is deterministic and valid") {
    const auto a = make_primitive_pool(6, 11);
    const auto b = make_primitive_pool(6, 11);
    REQUIRE(a.size() == 6);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].vertices.size() == b[i].vertices.size());
        validate_mesh(a[i]);
        // pool meshes are symmetric about x = 0
        CHECK(asymmetry_distance(a[i], SymmetryPlane{}) < 1e-12);
    }
}
