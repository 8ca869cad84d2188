// Command-line front end: fit a mesh to a sketch, render silhouettes,
// synthesize sketches, run gradient checks, evaluate voxel IoU, and run the
// SD/SP ablation grid.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sketchfit/io.hpp"

namespace sf = sketchfit;
namespace fs = std::filesystem;

namespace {

// "icosphere:N", "box", or a path to an OBJ file
sf::Mesh resolve_mesh(const std::string& name) {
    if (name.rfind("icosphere:", 0) == 0)
        return sf::icosphere(std::stoi(name.substr(10)));
    if (name == "box") return sf::box_mesh({0.5, 0.5, 0.5});
    return sf::load_obj(name);
}

struct GradTermReport {
    std::string name;
    sf::GradcheckResult result;
};

// Gradient suite on a deliberately asymmetric icosphere with 16x16 renders.
// Finite differences at h = 1e-4 need a softness the default sigma does not
// have, so the suite runs at sigma = 2e-2.
std::vector<GradTermReport> run_gradcheck(const std::string& term) {
    sf::Mesh mesh = sf::icosphere(1);
    sf::Rng rng(12345);
    for (sf::Vec3& v : mesh.vertices)
        v += sf::Vec3{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                      rng.uniform(-0.05, 0.05)};

    const sf::SymmetryPlane plane;
    sf::RenderConfig rcfg;
    rcfg.sigma = 2e-2;
    const sf::Camera cam = sf::camera_from_angles(0, 0, 2.732, 16);
    const auto views = sf::sample_random_views(2, 7, 2.732, 16);

    // fixed binary target for the silhouette term
    sf::Silhouette target(16, 16);
    {
        const sf::Silhouette s =
            sf::soft_silhouette(sf::box_mesh({0.6, 0.45, 0.5}), cam, rcfg);
        for (size_t i = 0; i < s.values.size(); ++i)
            target.values[i] = s.values[i] > 0.5 ? 1.0 : 0.0;
    }
    const std::vector<double> scale_weights = {0.25, 0.25, 0.25, 0.25};

    // small discriminator over the two sampled views
    sf::DiscParams disc = sf::DiscParams::init(2, 16, 77);
    {
        sf::Rng wrng(78);
        const auto& L = disc.layout();
        for (size_t i = L.fc_w; i < L.total; ++i)
            disc.data()[i] = wrng.uniform(-0.05, 0.05);
    }
    const sf::Mesh real_mesh = sf::box_mesh({0.55, 0.5, 0.45});

    auto render_stack = [&](const sf::Mesh& m) {
        sf::ViewBatch batch;
        batch.views = 2;
        batch.resolution = 16;
        batch.items.resize(1);
        for (const sf::Camera& v : views) {
            const sf::Silhouette s = sf::soft_silhouette(m, v, rcfg);
            batch.items[0].insert(batch.items[0].end(), s.values.begin(), s.values.end());
        }
        return batch;
    };
    const std::vector<double> real_logits =
        sf::disc_forward(disc, render_stack(real_mesh)).logits;

    auto sp_value = [&](const sf::Mesh& m) {
        return sf::multiscale_silhouette_loss(sf::soft_silhouette(m, cam, rcfg), target,
                                              scale_weights)
            .value;
    };
    auto sp_grad = [&](const sf::Mesh& m) {
        const sf::RenderCache rc = sf::render_forward(m, cam, rcfg);
        const sf::MultiscaleResult ms =
            sf::multiscale_silhouette_loss(rc.silhouette, target, scale_weights);
        return sf::render_backward(rc, ms.d_pred);
    };
    auto sd_value = [&](const sf::Mesh& m) {
        const auto fake = render_stack(m);
        return sf::gan_loss_values(sf::disc_forward(disc, fake).logits, real_logits)
            .generator;
    };
    auto sd_grad = [&](const sf::Mesh& m) {
        const auto fake = render_stack(m);
        const sf::DiscForward fwd = sf::disc_forward(disc, fake);
        const auto dlogits = sf::generator_logit_grad(fwd.logits);
        const sf::DiscBackward bwd = sf::disc_backward(disc, fake, fwd, dlogits, true);
        std::vector<sf::Vec3> grad(m.vertices.size());
        const size_t px = 16 * 16;
        for (size_t vi = 0; vi < views.size(); ++vi) {
            const sf::RenderCache rc = sf::render_forward(m, views[vi], rcfg);
            std::vector<double> pg(bwd.input_grad[0].begin() + vi * px,
                                   bwd.input_grad[0].begin() + (vi + 1) * px);
            const auto g = sf::render_backward(rc, pg);
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        }
        return grad;
    };

    const sf::LossWeights weights;
    auto full_value = [&](const sf::Mesh& m) {
        const double l_sp = sp_value(m);
        const double l_r = sf::laplacian_loss(m).value + sf::flatten_loss(m).value;
        const double l_sd = sd_value(m);
        const double l_vsym = sf::vertex_symmetry_loss(m, plane).value;
        const double l_isym = sf::image_symmetry_loss(m, views, plane, rcfg).value;
        return sf::total_loss(l_sp, l_r, l_sd, l_vsym, l_isym, weights).total;
    };
    auto full_grad = [&](const sf::Mesh& m) {
        std::vector<sf::Vec3> grad = sp_grad(m);
        const auto lap = sf::laplacian_loss(m);
        const auto flat = sf::flatten_loss(m);
        const auto vsym = sf::vertex_symmetry_loss(m, plane);
        const auto isym = sf::image_symmetry_loss(m, views, plane, rcfg);
        const auto sd = sd_grad(m);
        for (size_t i = 0; i < grad.size(); ++i)
            grad[i] += lap.d_vertices[i] + flat.d_vertices[i] +
                       weights.lambda_sv * vsym.d_vertices[i] +
                       weights.lambda_isym * isym.d_vertices[i] +
                       weights.lambda_sd * sd[i];
        return grad;
    };

    std::vector<GradTermReport> reports;
    auto add = [&](const std::string& name, auto value_fn, auto grad_fn) {
        if (term != "all" && term != name) return;
        reports.push_back({name, sf::gradcheck(value_fn, grad_fn(mesh), mesh, 1e-4)});
    };
    add("sp", sp_value, sp_grad);
    add("vsym",
        [&](const sf::Mesh& m) { return sf::vertex_symmetry_loss(m, plane).value; },
        [&](const sf::Mesh& m) { return sf::vertex_symmetry_loss(m, plane).d_vertices; });
    add("isym",
        [&](const sf::Mesh& m) { return sf::image_symmetry_loss(m, views, plane, rcfg).value; },
        [&](const sf::Mesh& m) {
            return sf::image_symmetry_loss(m, views, plane, rcfg).d_vertices;
        });
    add("lap", [&](const sf::Mesh& m) { return sf::laplacian_loss(m).value; },
        [&](const sf::Mesh& m) { return sf::laplacian_loss(m).d_vertices; });
    add("flat", [&](const sf::Mesh& m) { return sf::flatten_loss(m).value; },
        [&](const sf::Mesh& m) { return sf::flatten_loss(m).d_vertices; });
    add("sd", sd_value, sd_grad);
    if (term == "all")
        reports.push_back(
            {"total", sf::gradcheck(full_value, full_grad(mesh), mesh, 1e-4)});
    return reports;
}

// desk-scale fitting defaults for the ablation grid
sf::FitConfig ablate_config(int res, int steps, double lr) {
    sf::FitConfig cfg;
    cfg.resolutions = {res};
    cfg.steps = steps;
    cfg.lr = lr;
    cfg.camera_distance = 4.0;
    cfg.views = 2;
    cfg.w_laplacian = 0.3;
    cfg.w_flatten = 0.1;
    cfg.weights.lambda_isym = 1e-4;
    cfg.disc_resolution = res;
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"silhouette-guided mesh fitting from a single sketch"};
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit a template mesh to a sketch");
    std::string sketch_path, template_arg = "icosphere:2", config_path, out_path = "out.obj";
    std::string history_path, summary_path;
    double template_scale = 1.0;
    fit_cmd->add_option("sketch", sketch_path, "input sketch (png/pgm)")->required();
    fit_cmd->add_option("--template", template_arg,
                        "template mesh (icosphere:N, box, or OBJ path)");
    fit_cmd->add_option("--template-scale", template_scale, "uniform template scale");
    fit_cmd->add_option("--config", config_path, "run configuration file");
    fit_cmd->add_option("--out", out_path, "output OBJ path");
    fit_cmd->add_option("--history", history_path, "per-step JSONL history path");
    fit_cmd->add_option("--summary", summary_path, "summary CSV path");

    // render
    auto* render_cmd = app.add_subcommand("render", "render a soft silhouette of a mesh");
    std::string render_mesh, render_out = "render.png";
    double render_az = 0, render_el = 0, render_dist = 2.732, render_sigma = 1e-4;
    int render_res = 64;
    render_cmd->add_option("mesh", render_mesh, "OBJ path or builtin")->required();
    render_cmd->add_option("--az", render_az, "azimuth degrees");
    render_cmd->add_option("--el", render_el, "elevation degrees");
    render_cmd->add_option("--distance", render_dist, "camera distance");
    render_cmd->add_option("--res", render_res, "image size (power of two)");
    render_cmd->add_option("--sigma", render_sigma, "rasterizer softness");
    render_cmd->add_option("--out", render_out, "output image (png/pgm)");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    std::string grad_term = "all";
    grad_cmd->add_option("--term", grad_term, "all|sp|vsym|isym|lap|flat|sd")
        ->check(CLI::IsMember({"all", "sp", "vsym", "isym", "lap", "flat", "sd"}));

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "voxel IoU between two meshes");
    std::string eval_pred, eval_gt;
    int eval_res = 64;
    eval_cmd->add_option("--pred", eval_pred, "predicted mesh OBJ")->required();
    eval_cmd->add_option("--gt", eval_gt, "ground-truth mesh OBJ")->required();
    eval_cmd->add_option("--res", eval_res, "voxel resolution per axis");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "synthesize a sketch from a mesh");
    std::string synth_mesh, synth_mode = "silhouette", synth_out = "sketch.png";
    double synth_az = 0, synth_el = 0, synth_dist = 2.732;
    int synth_res = 64;
    synth_cmd->add_option("--mesh", synth_mesh, "OBJ path or builtin")->required();
    synth_cmd->add_option("--mode", synth_mode, "silhouette|edge")
        ->check(CLI::IsMember({"silhouette", "edge"}));
    synth_cmd->add_option("--az", synth_az, "azimuth degrees");
    synth_cmd->add_option("--el", synth_el, "elevation degrees");
    synth_cmd->add_option("--distance", synth_dist, "camera distance");
    synth_cmd->add_option("--res", synth_res, "image size (power of two)");
    synth_cmd->add_option("--out", synth_out, "output image (png/pgm)");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "SD/SP on-off grid over a sketch suite");
    std::string suite_dir, ablate_out = "ablation.csv";
    int ablate_steps = 250, ablate_res = 64;
    double ablate_lr = 1e-2;
    uint64_t ablate_seed = 0;
    ablate_cmd->add_option("--suite", suite_dir, "directory of sketch images")->required();
    ablate_cmd->add_option("--out", ablate_out, "output CSV path");
    ablate_cmd->add_option("--steps", ablate_steps, "steps per fit");
    ablate_cmd->add_option("--res", ablate_res, "fitting resolution");
    ablate_cmd->add_option("--lr", ablate_lr, "learning rate");
    ablate_cmd->add_option("--seed", ablate_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints usage/help
        return code == 0 ? 0 : 1;
    }

    if (fit_cmd->parsed()) {
        const sf::LoadedSketch sketch = sf::load_sketch(sketch_path);
        if (!sketch.contour_filled)
            std::cerr << "warning: no closed contour found, using the stroke mask as target\n";
        sf::Mesh tmpl = resolve_mesh(template_arg);
        if (template_scale != 1.0)
            tmpl = sf::scale_mesh(tmpl, {template_scale, template_scale, template_scale});
        sf::FitConfig cfg;
        if (!config_path.empty()) cfg = sf::load_config(config_path);
        std::vector<sf::Mesh> pool;
        const std::vector<sf::Mesh>* pool_ptr = nullptr;
        if (cfg.enable_sd) {
            pool = sf::make_primitive_pool(8, cfg.seed + 1000);
            pool_ptr = &pool;
        }
        const sf::FitResult result = sf::fit(sketch.target, tmpl, cfg, pool_ptr);
        sf::save_obj(result.mesh, out_path);
        if (!history_path.empty() && !result.history.steps.empty())
            sf::write_history_jsonl(result.history, history_path);
        if (!summary_path.empty() && !result.history.steps.empty())
            sf::write_summary_csv(result.history, summary_path);
        std::printf("final_iou %.4f asymmetry %.6g steps %zu wall %.1fs\n",
                    result.history.final_iou, result.history.final_asymmetry,
                    result.history.steps.size(), result.history.wall_seconds);
        if (result.history.aborted) {
            std::cerr << "aborted: " << result.history.abort_reason << "\n";
            return 2;
        }
        return 0;
    }

    if (render_cmd->parsed()) {
        const sf::Mesh mesh = resolve_mesh(render_mesh);
        const sf::Camera cam =
            sf::camera_from_angles(render_az, render_el, render_dist, render_res);
        sf::RenderConfig rcfg;
        rcfg.sigma = render_sigma;
        const sf::Silhouette s = sf::soft_silhouette(mesh, cam, rcfg);
        sf::save_image(sf::silhouette_to_gray(s), render_out);
        return 0;
    }

    if (grad_cmd->parsed()) {
        const auto reports = run_gradcheck(grad_term);
        bool all_ok = true;
        for (const auto& r : reports) {
            const bool ok = r.result.max_rel_err < 1e-3;
            all_ok = all_ok && ok;
            std::printf("%-6s max_rel_err %.3e checked %d skipped %d [%s]\n",
                        r.name.c_str(), r.result.max_rel_err, r.result.checked,
                        r.result.skipped_nonsmooth, ok ? "PASS" : "FAIL");
        }
        return all_ok ? 0 : 2;
    }

    if (eval_cmd->parsed()) {
        const double iou =
            sf::voxel_iou(sf::load_obj(eval_pred), sf::load_obj(eval_gt), eval_res);
        std::printf("%.4f\n", iou);
        return 0;
    }

    if (synth_cmd->parsed()) {
        const sf::Mesh mesh = resolve_mesh(synth_mesh);
        const sf::Camera cam =
            sf::camera_from_angles(synth_az, synth_el, synth_dist, synth_res);
        const sf::SketchMode mode =
            synth_mode == "edge" ? sf::SketchMode::edge : sf::SketchMode::silhouette;
        const sf::SketchImage sketch = sf::synth_sketch(mesh, cam, mode);
        sf::save_image(sf::sketch_to_gray(sketch), synth_out);
        return 0;
    }

    if (ablate_cmd->parsed()) {
        std::vector<fs::path> sketches;
        for (const auto& entry : fs::directory_iterator(suite_dir)) {
            const std::string ext = entry.path().extension().string();
            if (ext == ".png" || ext == ".pgm") sketches.push_back(entry.path());
        }
        std::sort(sketches.begin(), sketches.end());
        if (sketches.empty()) throw sf::validation_error("no sketches in suite directory");

        const auto pool = sf::make_primitive_pool(8, ablate_seed + 1000);
        struct Row {
            bool sd, sp;
            std::vector<double> ious;
        };
        std::vector<Row> rows = {{false, false, {}}, {true, false, {}}, {true, true, {}}};
        for (auto& row : rows) {
            for (const auto& path : sketches) {
                const sf::LoadedSketch sketch = sf::load_sketch(path.string());
                sf::FitConfig cfg = ablate_config(ablate_res, ablate_steps, ablate_lr);
                cfg.seed = ablate_seed;
                cfg.enable_sd = row.sd;
                cfg.enable_sp = row.sp;
                const sf::FitResult res =
                    sf::fit(sketch.target, sf::icosphere(2), cfg, row.sd ? &pool : nullptr);
                row.ious.push_back(res.history.final_iou);
            }
        }

        std::ofstream csv(ablate_out);
        if (!csv) throw sf::io_error("cannot open " + ablate_out);
        csv << "sd,sp";
        for (const auto& p : sketches) csv << ',' << p.stem().string();
        csv << ",mean\n";
        for (const auto& row : rows) {
            csv << (row.sd ? 1 : 0) << ',' << (row.sp ? 1 : 0);
            double mean = 0;
            for (double v : row.ious) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.4f", v);
                csv << ',' << buf;
                mean += v;
            }
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", mean / double(row.ious.size()));
            csv << ',' << buf << '\n';
        }
        std::printf("wrote %s (%zu sketches x %zu configurations)\n", ablate_out.c_str(),
                    sketches.size(), rows.size());
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const sf::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const sf::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
