#include <cstdio>
#include <fstream>

#include "sketchfit/io.hpp"

namespace sketchfit {
namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_history_jsonl(const FitHistory& history, const std::string& path) {
    if (history.steps.empty())
        throw validation_error("refusing to write an empty history");
    std::ofstream out(path);
    if (!out) throw io_error("cannot open history file for writing: " + path);
    for (const StepRecord& r : history.steps) {
        out << "{\"step\":" << r.step << ",\"stage_res\":" << r.stage_res
            << ",\"lr\":" << num(r.lr) << ",\"l_sp\":" << num(r.losses.l_sp)
            << ",\"l_r\":" << num(r.losses.l_r) << ",\"l_sd\":" << num(r.losses.l_sd)
            << ",\"l_vsym\":" << num(r.losses.l_vsym)
            << ",\"l_isym\":" << num(r.losses.l_isym)
            << ",\"total\":" << num(r.losses.total)
            << ",\"wall_ms\":" << num(r.wall_ms) << "}\n";
    }
    if (!out) throw io_error("failed writing history: " + path);
}

void write_summary_csv(const FitHistory& history, const std::string& path) {
    if (history.steps.empty())
        throw validation_error("refusing to write an empty summary");
    std::ofstream out(path);
    if (!out) throw io_error("cannot open summary file for writing: " + path);
    out << "final_iou,asymmetry_distance,steps,wall_seconds\n";
    out << num(history.final_iou) << ',' << num(history.final_asymmetry) << ','
        << history.steps.size() << ',' << num(history.wall_seconds) << '\n';
    if (!out) throw io_error("failed writing summary: " + path);
}

}  // namespace sketchfit
