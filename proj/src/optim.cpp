#include "sketchfit/optim.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <cmath>

#include "sketchfit/kernels.hpp"

namespace sketchfit {

double lr_at(int64_t step, double base, double decay, int64_t period) {
    if (period <= 0) throw validation_error("lr period must be positive");
    if (step < 0) throw validation_error("step must be >= 0");
    return base * std::pow(decay, double(step / period));
}

GradcheckResult gradcheck(const std::function<double(const Mesh&)>& value_fn,
                          const std::vector<Vec3>& analytic_grad,
                          const Mesh& mesh, double h) {
    if (!(h > 0.0)) throw validation_error("gradcheck step must be positive");
    if (analytic_grad.size() != mesh.vertices.size())
        throw shape_error("analytic gradient size mismatch");

    GradcheckResult result;
    Mesh probe = mesh;
    auto fd_at = [&](size_t vi, int axis, double step) {
        const double saved = probe.vertices[vi][axis];
        probe.vertices[vi][axis] = saved + step;
        const double fp = value_fn(probe);
        probe.vertices[vi][axis] = saved - step;
        const double fm = value_fn(probe);
        probe.vertices[vi][axis] = saved;
        return (fp - fm) / (2.0 * step);
    };
    auto rel_err = [](double ga, double gf) {
        return std::fabs(ga - gf) / std::max({std::fabs(ga), std::fabs(gf), 1e-8});
    };

    for (size_t vi = 0; vi < mesh.vertices.size(); ++vi) {
        for (int axis = 0; axis < 3; ++axis) {
            const double ga = analytic_grad[vi][axis];
            const double err_h = rel_err(ga, fd_at(vi, axis, h));
            ++result.checked;
            double err = err_h;
            if (err_h > 1e-4) {
                // Distinguish a genuinely wrong gradient from a kink: at a
                // smooth point the finite-difference error is stable in h,
                // at a tie crossing it moves wildly.
                const double err_h2 = rel_err(ga, fd_at(vi, axis, h * 0.5));
                const double lo = std::max(std::min(err_h, err_h2), 1e-300);
                const double hi = std::max(err_h, err_h2);
                if (hi / lo > 10.0) {
                    ++result.skipped_nonsmooth;
                    continue;
                }
                err = err_h;
            }
            if (err > result.max_rel_err) {
                result.max_rel_err = err;
                result.worst_coord = int(vi) * 3 + axis;
            }
        }
    }
    return result;
}

void validate_fit_config(const FitConfig& cfg) {
    validate_weights(cfg.weights);
    if (cfg.resolutions.empty())
        throw validation_error("at least one stage resolution required");
    int prev = 0;
    for (int r : cfg.resolutions) {
        if (r < 8 || (r & (r - 1)) != 0)
            throw validation_error("stage resolutions must be powers of two >= 8");
        if (r <= prev) throw validation_error("stage resolutions must increase");
        prev = r;
    }
    if (cfg.steps < 0) throw validation_error("steps must be >= 0");
    if (!(cfg.lr >= 0.0)) throw validation_error("learning rate must be >= 0");
    if (cfg.lr_period <= 0) throw validation_error("lr period must be positive");
    if (cfg.views < 1) throw validation_error("view count must be >= 1");
    if (!(cfg.sigma > 0.0)) throw validation_error("sigma must be positive");
    if (!(cfg.w_laplacian >= 0.0 && cfg.w_flatten >= 0.0))
        throw validation_error("regularizer weights must be >= 0");
}

std::vector<Mesh> make_primitive_pool(int count, uint64_t seed) {
    if (count <= 0) throw validation_error("pool size must be positive");
    Rng rng(seed);
    std::vector<Mesh> pool;
    pool.reserve(count);
    for (int i = 0; i < count; ++i) {
        const int kind = int(rng.uniform_int(3));
        if (kind == 0) {
            const double r = rng.uniform(0.45, 0.8);
            pool.push_back(scale_mesh(icosphere(2), {r, r, r}));
        } else if (kind == 1) {
            pool.push_back(box_mesh({rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                                     rng.uniform(0.3, 0.7)}));
        } else {
            pool.push_back(scale_mesh(icosphere(2),
                                      {rng.uniform(0.35, 0.75), rng.uniform(0.35, 0.75),
                                       rng.uniform(0.35, 0.75)}));
        }
    }
    return pool;
}

double binary_silhouette_iou(const Silhouette& rendered, const Silhouette& target) {
    if (rendered.width != target.width || rendered.height != target.height)
        throw shape_error("binary_silhouette_iou shapes differ");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < rendered.values.size(); ++i) {
        const bool a = rendered.values[i] > 0.5;
        const bool b = target.values[i] > 0.5;
        inter += (a && b);
        uni += (a || b);
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

namespace {

// Render cache pool for one optimization step: each distinct (camera, size)
// is rendered once, losses accumulate pixel gradients into it, and one
// backward per entry yields the vertex gradients.
class RenderAccum {
  public:
    RenderAccum(const Mesh& mesh, const RenderConfig& cfg) : mesh_(mesh), cfg_(cfg) {}

    struct Entry {
        Camera cam;
        RenderCache cache;
        std::vector<double> pixel_grad;
    };

    Entry& get(const Camera& cam) {
        for (auto& e : entries_) {
            if (e.cam.azimuth_deg == cam.azimuth_deg &&
                e.cam.elevation_deg == cam.elevation_deg &&
                e.cam.distance == cam.distance && e.cam.fov_deg == cam.fov_deg &&
                e.cam.image_size == cam.image_size)
                return e;
        }
        entries_.push_back(Entry{cam, render_forward(mesh_, cam, cfg_), {}});
        auto& e = entries_.back();
        e.pixel_grad.assign(e.cache.silhouette.values.size(), 0.0);
        return e;
    }

    std::vector<Vec3> backward() const {
        std::vector<Vec3> grad(mesh_.vertices.size());
        for (const auto& e : entries_) {
            const std::vector<Vec3> g = render_backward(e.cache, e.pixel_grad);
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        }
        return grad;
    }

  private:
    const Mesh& mesh_;
    const RenderConfig& cfg_;
    std::deque<Entry> entries_;  // reference stability across get() calls
};

void add_scaled(std::vector<double>& acc, const std::vector<double>& g, double w) {
    kernels::active().axpy(w, g.data(), acc.data(), acc.size());
}

}  // namespace

FitResult fit(const Silhouette& target, const Mesh& tmpl, const FitConfig& cfg,
              const std::vector<Mesh>* real_pool) {
    validate_fit_config(cfg);
    validate_mesh(tmpl);
    if (tmpl.vertices.empty()) throw degenerate_error("empty template mesh");
    if (target.width != target.height)
        throw validation_error("target silhouette must be square");
    for (double v : target.values)
        if (v != 0.0 && v != 1.0)
            throw validation_error("target silhouette must be binary");
    for (int r : cfg.resolutions)
        if (target.width % r != 0)
            throw validation_error("target resolution must be divisible by every stage");
    if (cfg.enable_sd && (!real_pool || real_pool->empty()))
        throw validation_error("enable_sd requires a non-empty real mesh pool");

    const auto t_start = std::chrono::steady_clock::now();
    const SymmetryPlane plane{};
    const Adjacency adj = build_adjacency(tmpl);
    const int n_verts = int(tmpl.vertices.size());

    // Stage schedule: steps split evenly, remainder to the later stages.
    const int n_stages = int(cfg.resolutions.size());
    std::vector<int> stage_steps(n_stages, cfg.steps / n_stages);
    for (int s = n_stages - int(cfg.steps % n_stages); s < n_stages; ++s)
        ++stage_steps[s];
    std::vector<Silhouette> stage_targets;
    for (int r : cfg.resolutions)
        stage_targets.push_back(downsample(target, target.width / r));

    RenderConfig rcfg;
    rcfg.sigma = cfg.sigma;

    // Independent deterministic streams so that toggling the discriminator
    // does not perturb the rest of the trajectory.
    Rng view_rng(cfg.seed + 1);
    Rng pool_rng(cfg.seed + 2);

    std::optional<DiscParams> disc;
    AdamState disc_opt;
    if (cfg.enable_sd)
        disc.emplace(DiscParams::init(cfg.views, cfg.disc_resolution, cfg.seed + 3));

    std::vector<double> offsets(size_t(n_verts) * 3, 0.0);
    AdamState mesh_opt;

    FitResult result;
    result.history.steps.reserve(cfg.steps);

    const double lambda_sv = cfg.enable_sp ? cfg.weights.lambda_sv : 0.0;
    const double lambda_isym = cfg.enable_sp ? cfg.weights.lambda_isym : 0.0;
    const double lambda_sd = cfg.enable_sd ? cfg.weights.lambda_sd : 0.0;

    int stage = 0, into_stage = 0;
    Mesh current = tmpl;
    for (int step = 0; step < cfg.steps; ++step) {
        const auto t_step = std::chrono::steady_clock::now();
        while (stage < n_stages - 1 && into_stage >= stage_steps[stage]) {
            ++stage;
            into_stage = 0;
        }
        ++into_stage;
        const int res = cfg.resolutions[stage];
        const double lr = lr_at(step, cfg.lr, cfg.lr_decay, cfg.lr_period);

        for (int v = 0; v < n_verts; ++v)
            current.vertices[v] = tmpl.vertices[v] +
                                  Vec3{offsets[3 * v], offsets[3 * v + 1], offsets[3 * v + 2]};

        // Per-step random viewpoints, consumed regardless of which loss terms
        // are enabled so trajectories stay comparable across toggles.
        std::vector<double> view_az(cfg.views), view_el(cfg.views);
        for (int i = 0; i < cfg.views; ++i) {
            view_az[i] = view_rng.uniform(0.0, 360.0);
            view_el[i] = view_rng.uniform(-20.0, 40.0);
        }

        RenderAccum accum(current, rcfg);
        std::vector<double> grad_flat(size_t(n_verts) * 3, 0.0);
        auto add_vertex_grads = [&](const std::vector<Vec3>& g, double w) {
            for (int v = 0; v < n_verts; ++v) {
                grad_flat[3 * v] += w * g[v].x;
                grad_flat[3 * v + 1] += w * g[v].y;
                grad_flat[3 * v + 2] += w * g[v].z;
            }
        };

        double l_sp = 0.0, l_r = 0.0, l_sd = 0.0, l_vsym = 0.0, l_isym = 0.0;
        bool failed = false;
        std::string fail_reason;
        try {
            // silhouette term at the ground-truth (canonical) viewpoint
            const Camera cam0 = camera_from_angles(0.0, 0.0, cfg.camera_distance,
                                                   res, cfg.fov_deg);
            auto& main_entry = accum.get(cam0);
            MultiscaleResult ms = multiscale_silhouette_loss(
                main_entry.cache.silhouette, stage_targets[stage], cfg.weights.scale_weights);
            l_sp = ms.value;
            add_scaled(main_entry.pixel_grad, ms.d_pred, 1.0);

            const VertexGradResult lap = laplacian_loss(current, adj);
            const FlattenResult flat = flatten_loss(current, adj);
            l_r = cfg.w_laplacian * lap.value + cfg.w_flatten * flat.value;
            add_vertex_grads(lap.d_vertices, cfg.w_laplacian);
            add_vertex_grads(flat.d_vertices, cfg.w_flatten);

            if (cfg.enable_sp) {
                const VertexGradResult vsym = vertex_symmetry_loss(current, plane);
                l_vsym = vsym.value;
                add_vertex_grads(vsym.d_vertices, lambda_sv);

                for (int i = 0; i < cfg.views; ++i) {
                    const Camera view = camera_from_angles(
                        view_az[i], view_el[i], cfg.camera_distance, res, cfg.fov_deg);
                    const Camera mirrored = mirror_camera(view, plane);
                    auto& e1 = accum.get(view);
                    auto& e2 = accum.get(mirrored);
                    ImagePairResult term =
                        image_symmetry_term(e1.cache.silhouette, e2.cache.silhouette);
                    const double inv_m = 1.0 / double(cfg.views);
                    l_isym += term.value * inv_m;
                    add_scaled(e1.pixel_grad, term.d_s1, lambda_isym * inv_m);
                    add_scaled(e2.pixel_grad, term.d_s2, lambda_isym * inv_m);
                }
            }

            if (cfg.enable_sd) {
                const Mesh& real_mesh = (*real_pool)[pool_rng.uniform_int(real_pool->size())];
                ViewBatch fake, real;
                fake.views = real.views = cfg.views;
                fake.resolution = real.resolution = cfg.disc_resolution;
                fake.real = false;
                real.real = true;
                fake.items.resize(1);
                real.items.resize(1);
                std::vector<RenderAccum::Entry*> fake_entries;
                for (int i = 0; i < cfg.views; ++i) {
                    const Camera view = camera_from_angles(view_az[i], view_el[i],
                                                           cfg.camera_distance,
                                                           cfg.disc_resolution, cfg.fov_deg);
                    auto& e = accum.get(view);
                    fake_entries.push_back(&e);
                    fake.items[0].insert(fake.items[0].end(),
                                         e.cache.silhouette.values.begin(),
                                         e.cache.silhouette.values.end());
                    const Silhouette rs = soft_silhouette(real_mesh, view, rcfg);
                    real.items[0].insert(real.items[0].end(), rs.values.begin(),
                                         rs.values.end());
                }

                const DiscForward ffwd = disc_forward(*disc, fake);
                const DiscForward rfwd = disc_forward(*disc, real);
                const GanLossValues gan = gan_loss_values(ffwd.logits, rfwd.logits);
                l_sd = gan.generator;
                const std::vector<double> dlogits = generator_logit_grad(ffwd.logits);
                const DiscBackward gb = disc_backward(*disc, fake, ffwd, dlogits, true);
                const size_t plane_px = size_t(cfg.disc_resolution) * cfg.disc_resolution;
                for (int i = 0; i < cfg.views; ++i) {
                    const double* g = gb.input_grad[0].data() + size_t(i) * plane_px;
                    auto& pg = fake_entries[i]->pixel_grad;
                    kernels::active().axpy(lambda_sd, g, pg.data(), plane_px);
                }

                disc_train_step(*disc, real, fake, disc_opt, cfg.disc_lr);
            }

            const LossReport report =
                total_loss(l_sp, l_r, l_sd, l_vsym, l_isym, cfg.weights);

            const std::vector<Vec3> render_grad = accum.backward();
            add_vertex_grads(render_grad, 1.0);

            adam_step(offsets, grad_flat, mesh_opt, lr);

            StepRecord rec;
            rec.step = step;
            rec.stage_res = res;
            rec.lr = lr;
            rec.losses = report;
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t_step)
                              .count();
            result.history.steps.push_back(rec);
        } catch (const numeric_error& e) {
            failed = true;
            fail_reason = e.what();
        }
        if (failed) {
            result.history.aborted = true;
            result.history.abort_reason = fail_reason;
            break;
        }
    }

    for (int v = 0; v < n_verts; ++v)
        current.vertices[v] = tmpl.vertices[v] +
                              Vec3{offsets[3 * v], offsets[3 * v + 1], offsets[3 * v + 2]};
    result.mesh = current;

    const Camera final_cam = camera_from_angles(0.0, 0.0, cfg.camera_distance,
                                                target.width, cfg.fov_deg);
    const Silhouette final_render = soft_silhouette(result.mesh, final_cam, rcfg);
    result.history.final_iou = binary_silhouette_iou(final_render, target);
    result.history.final_asymmetry = asymmetry_distance(result.mesh, plane);
    result.history.wall_seconds = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t_start)
                                      .count();
    return result;
}

}  // namespace sketchfit
