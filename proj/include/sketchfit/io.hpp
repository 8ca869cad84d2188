#pragma once

#include <string>
#include <vector>

#include "sketchfit/optim.hpp"

namespace sketchfit {

// 8-bit grayscale raster, row 0 at the top.
struct GrayImage {
    int width = 0, height = 0;
    std::vector<uint8_t> pixels;
};

// Reads 8-bit grayscale PNG (color type 0, no interlace) or PGM (P5/P2).
// Other bit depths and color types are format errors.
GrayImage load_image(const std::string& path);
void save_png(const GrayImage& img, const std::string& path);
void save_pgm(const GrayImage& img, const std::string& path);
// Dispatches on the file extension (.png or .pgm).
void save_image(const GrayImage& img, const std::string& path);

// Binary sketch: 0 marks a stroke, 1 is background.
struct SketchImage {
    int width = 0, height = 0;
    std::vector<uint8_t> values;
};

struct LoadedSketch {
    SketchImage sketch;
    Silhouette target;   // binary occupancy derived from the strokes
    bool contour_filled = false;  // false: stroke mask used directly
};

// Pixels below 128 become strokes. The fitting target is the stroke mask
// plus every region it encloses (flood fill from the image border); when
// nothing is enclosed the stroke mask itself is the target and
// contour_filled stays false.
LoadedSketch load_sketch(const std::string& path);

Mesh load_obj(const std::string& path);
void save_obj(const Mesh& mesh, const std::string& path);

enum class SketchMode { silhouette, edge };

// Threshold of the soft render at 0.5, written in sketch convention.
// Edge mode keeps only the 8-neighbourhood boundary of the mask.
SketchImage synth_sketch(const Mesh& mesh, const Camera& cam, SketchMode mode,
                         const RenderConfig& cfg = {});

GrayImage sketch_to_gray(const SketchImage& sketch);
GrayImage silhouette_to_gray(const Silhouette& s);

// Flat key=value run configuration. Unknown and duplicate keys are format
// errors; parse(serialize(cfg)) reproduces cfg exactly.
FitConfig parse_config(const std::string& text);
std::string serialize_config(const FitConfig& cfg);
FitConfig load_config(const std::string& path);
void save_config(const FitConfig& cfg, const std::string& path);

// One JSON object per step with a fixed key order; wall_ms is the only
// field that varies between reruns of the same seed.
void write_history_jsonl(const FitHistory& history, const std::string& path);
// Header: final_iou,asymmetry_distance,steps,wall_seconds
void write_summary_csv(const FitHistory& history, const std::string& path);

}  // namespace sketchfit
