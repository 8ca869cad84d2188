#include <vector>

#include "sketchfit/io.hpp"

namespace sketchfit {

LoadedSketch load_sketch(const std::string& path) {
    const GrayImage img = load_image(path);

    LoadedSketch out;
    out.sketch.width = img.width;
    out.sketch.height = img.height;
    out.sketch.values.resize(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i)
        out.sketch.values[i] = img.pixels[i] < 128 ? 0 : 1;

    // Flood fill the background from the border; unreached background pixels
    // are enclosed by strokes and belong to the target region.
    const int w = img.width, h = img.height;
    std::vector<uint8_t> outside(size_t(w) * h, 0);
    std::vector<int> stack;
    auto push = [&](int x, int y) {
        const size_t i = size_t(y) * w + x;
        if (!outside[i] && out.sketch.values[i] == 1) {
            outside[i] = 1;
            stack.push_back(int(i));
        }
    };
    for (int x = 0; x < w; ++x) {
        push(x, 0);
        push(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        push(0, y);
        push(w - 1, y);
    }
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int x = i % w, y = i / w;
        if (x > 0) push(x - 1, y);
        if (x + 1 < w) push(x + 1, y);
        if (y > 0) push(x, y - 1);
        if (y + 1 < h) push(x, y + 1);
    }

    out.target = Silhouette(w, h);
    size_t interior = 0;
    for (size_t i = 0; i < out.sketch.values.size(); ++i) {
        const bool stroke = out.sketch.values[i] == 0;
        const bool enclosed = out.sketch.values[i] == 1 && !outside[i];
        interior += enclosed;
        out.target.values[i] = (stroke || enclosed) ? 1.0 : 0.0;
    }
    out.contour_filled = interior > 0;
    if (!out.contour_filled) {
        // no enclosed region: the stroke mask itself is the target
        for (size_t i = 0; i < out.sketch.values.size(); ++i)
            out.target.values[i] = out.sketch.values[i] == 0 ? 1.0 : 0.0;
    }
    return out;
}

SketchImage synth_sketch(const Mesh& mesh, const Camera& cam, SketchMode mode,
                         const RenderConfig& cfg) {
    const Silhouette render = soft_silhouette(mesh, cam, cfg);
    const int w = render.width, h = render.height;
    std::vector<uint8_t> mask(render.values.size());
    size_t covered = 0;
    for (size_t i = 0; i < render.values.size(); ++i) {
        mask[i] = render.values[i] > 0.5 ? 1 : 0;
        covered += mask[i];
    }
    if (covered == 0) throw degenerate_error("render produced an empty silhouette");

    SketchImage out;
    out.width = w;
    out.height = h;
    out.values.resize(mask.size());
    if (mode == SketchMode::silhouette) {
        for (size_t i = 0; i < mask.size(); ++i) out.values[i] = mask[i] ? 0 : 1;
        return out;
    }

    // edge mode: mask minus its 8-neighbourhood erosion
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = size_t(y) * w + x;
            if (!mask[i]) {
                out.values[i] = 1;
                continue;
            }
            bool interior = true;
            for (int dy = -1; dy <= 1 && interior; ++dy)
                for (int dx = -1; dx <= 1 && interior; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h ||
                        !mask[size_t(ny) * w + nx])
                        interior = false;
                }
            out.values[i] = interior ? 1 : 0;
        }
    }
    return out;
}

GrayImage sketch_to_gray(const SketchImage& sketch) {
    GrayImage img;
    img.width = sketch.width;
    img.height = sketch.height;
    img.pixels.resize(sketch.values.size());
    for (size_t i = 0; i < sketch.values.size(); ++i)
        img.pixels[i] = sketch.values[i] ? 255 : 0;
    return img;
}

GrayImage silhouette_to_gray(const Silhouette& s) {
    GrayImage img;
    img.width = s.width;
    img.height = s.height;
    img.pixels.resize(s.values.size());
    for (size_t i = 0; i < s.values.size(); ++i) {
        const double v = s.values[i];
        img.pixels[i] = uint8_t(v <= 0.0 ? 0 : (v >= 1.0 ? 255 : v * 255.0 + 0.5));
    }
    return img;
}

}  // namespace sketchfit
