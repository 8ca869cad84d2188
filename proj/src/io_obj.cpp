#include <cstdio>
#include <fstream>
#include <sstream>

#include "sketchfit/io.hpp"

namespace sketchfit {

Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open OBJ file: " + path);

    Mesh mesh;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw format_error(path + ":" + std::to_string(line_no) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x >> v.y >> v.z)) fail("malformed vertex record");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // accept i, i/j, i/j/k, i//k; only the vertex index is used
                const size_t slash = tok.find('/');
                const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                int value = 0;
                try {
                    value = std::stoi(head);
                } catch (const std::exception&) {
                    fail("malformed face index '" + tok + "'");
                }
                if (value < 0) fail("negative (relative) face indices are unsupported");
                if (value == 0) fail("face index 0 (OBJ indices are 1-based)");
                idx.push_back(value);
            }
            if (idx.size() != 3) fail("only triangular faces are supported");
            std::array<int, 3> f{};
            for (int k = 0; k < 3; ++k) {
                if (idx[k] > int(mesh.vertices.size()))
                    fail("face index out of range");
                f[k] = idx[k] - 1;
            }
            mesh.faces.push_back(f);
        }
        // vt/vn/o/g/s/usemtl/mtllib and anything else: ignored
    }
    validate_mesh(mesh);
    return mesh;
}

void save_obj(const Mesh& mesh, const std::string& path) {
    validate_mesh(mesh);
    std::ofstream out(path);
    if (!out) throw io_error("cannot open OBJ file for writing: " + path);
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw io_error("failed writing OBJ file: " + path);
}

}  // namespace sketchfit
