#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sketchfit/io.hpp"

namespace sketchfit {
namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw format_error("config key '" + key + "': bad number '" + v + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int64_t i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw format_error("config key '" + key + "': bad integer '" + v + "'");
    }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t i = std::stoull(v, &used);
        if (used != v.size() || v[0] == '-') throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw format_error("config key '" + key + "': bad integer '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw format_error("config key '" + key + "': bad boolean '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F item) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(item(key, trim(tok)));
    if (out.empty()) throw format_error("config key '" + key + "': empty list");
    return out;
}

}  // namespace

FitConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw format_error("config line " + std::to_string(line_no) +
                               ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw format_error("config line " + std::to_string(line_no) +
                                            ": empty key");
        if (!kv.emplace(key, value).second)
            throw format_error("duplicate config key '" + key + "'");
    }

    FitConfig cfg;
    auto take = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::string();
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    std::string v;
    if (!(v = take("scale_weights")).empty())
        cfg.weights.scale_weights = parse_list<double>("scale_weights", v, parse_double);
    if (!(v = take("lambda_sd")).empty()) cfg.weights.lambda_sd = parse_double("lambda_sd", v);
    if (!(v = take("lambda_sv")).empty()) cfg.weights.lambda_sv = parse_double("lambda_sv", v);
    if (!(v = take("lambda_isym")).empty())
        cfg.weights.lambda_isym = parse_double("lambda_isym", v);
    if (!(v = take("w_laplacian")).empty()) cfg.w_laplacian = parse_double("w_laplacian", v);
    if (!(v = take("w_flatten")).empty()) cfg.w_flatten = parse_double("w_flatten", v);
    if (!(v = take("resolutions")).empty())
        cfg.resolutions = parse_list<int>("resolutions", v, [](const std::string& k,
                                                               const std::string& s) {
            return int(parse_int(k, s));
        });
    if (!(v = take("steps")).empty()) cfg.steps = int(parse_int("steps", v));
    if (!(v = take("lr")).empty()) cfg.lr = parse_double("lr", v);
    if (!(v = take("lr_decay")).empty()) cfg.lr_decay = parse_double("lr_decay", v);
    if (!(v = take("lr_period")).empty()) cfg.lr_period = int(parse_int("lr_period", v));
    if (!(v = take("seed")).empty()) cfg.seed = parse_uint("seed", v);
    if (!(v = take("enable_sd")).empty()) cfg.enable_sd = parse_bool("enable_sd", v);
    if (!(v = take("enable_sp")).empty()) cfg.enable_sp = parse_bool("enable_sp", v);
    if (!(v = take("views")).empty()) cfg.views = int(parse_int("views", v));
    if (!(v = take("sigma")).empty()) cfg.sigma = parse_double("sigma", v);
    if (!(v = take("camera_distance")).empty())
        cfg.camera_distance = parse_double("camera_distance", v);
    if (!(v = take("fov")).empty()) cfg.fov_deg = parse_double("fov", v);
    if (!(v = take("disc_resolution")).empty())
        cfg.disc_resolution = int(parse_int("disc_resolution", v));
    if (!(v = take("disc_lr")).empty()) cfg.disc_lr = parse_double("disc_lr", v);

    if (!kv.empty())
        throw format_error("unknown config key '" + kv.begin()->first + "'");
    validate_fit_config(cfg);
    return cfg;
}

std::string serialize_config(const FitConfig& cfg) {
    std::ostringstream out;
    auto list_d = [](const std::vector<double>& xs) {
        std::string s;
        for (size_t i = 0; i < xs.size(); ++i)
            s += (i ? "," : "") + fmt_double(xs[i]);
        return s;
    };
    auto list_i = [](const std::vector<int>& xs) {
        std::string s;
        for (size_t i = 0; i < xs.size(); ++i)
            s += (i ? "," : "") + std::to_string(xs[i]);
        return s;
    };
    out << "scale_weights=" << list_d(cfg.weights.scale_weights) << '\n';
    out << "lambda_sd=" << fmt_double(cfg.weights.lambda_sd) << '\n';
    out << "lambda_sv=" << fmt_double(cfg.weights.lambda_sv) << '\n';
    out << "lambda_isym=" << fmt_double(cfg.weights.lambda_isym) << '\n';
    out << "w_laplacian=" << fmt_double(cfg.w_laplacian) << '\n';
    out << "w_flatten=" << fmt_double(cfg.w_flatten) << '\n';
    out << "resolutions=" << list_i(cfg.resolutions) << '\n';
    out << "steps=" << cfg.steps << '\n';
    out << "lr=" << fmt_double(cfg.lr) << '\n';
    out << "lr_decay=" << fmt_double(cfg.lr_decay) << '\n';
    out << "lr_period=" << cfg.lr_period << '\n';
    out << "seed=" << cfg.seed << '\n';
    out << "enable_sd=" << (cfg.enable_sd ? "true" : "false") << '\n';
    out << "enable_sp=" << (cfg.enable_sp ? "true" : "false") << '\n';
    out << "views=" << cfg.views << '\n';
    out << "sigma=" << fmt_double(cfg.sigma) << '\n';
    out << "camera_distance=" << fmt_double(cfg.camera_distance) << '\n';
    out << "fov=" << fmt_double(cfg.fov_deg) << '\n';
    out << "disc_resolution=" << cfg.disc_resolution << '\n';
    out << "disc_lr=" << fmt_double(cfg.disc_lr) << '\n';
    return out.str();
}

FitConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const FitConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open config file for writing: " + path);
    out << serialize_config(cfg);
    if (!out) throw io_error("failed writing config file: " + path);
}

}  // namespace sketchfit
