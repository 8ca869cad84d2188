#include <cstdlib>
#include <string>

#include "sketchfit/kernels.hpp"

namespace sketchfit::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SKETCHFIT_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels* detect() {
#if defined(SKETCHFIT_HAVE_AVX2)
    if (cpu_has_avx2()) return &avx2();
#endif
    return &scalar();
}

const Kernels* resolve(std::string_view name) {
    if (name == "scalar") return &scalar();
#if defined(SKETCHFIT_HAVE_AVX2)
    if (name == "avx2") return cpu_has_avx2() ? &avx2() : nullptr;
#endif
    if (name == "auto" || name.empty()) return detect();
    return nullptr;
}

const Kernels*& slot() {
    static const Kernels* current = [] {
        const char* env = std::getenv("SKETCHFIT_KERNELS");
        const Kernels* k = env ? resolve(env) : nullptr;
        return k ? k : detect();
    }();
    return current;
}

}  // namespace

const Kernels& active() { return *slot(); }

bool select(std::string_view name) {
    const Kernels* k = resolve(name);
    if (!k) return false;
    slot() = k;
    return true;
}

std::vector<const Kernels*> available() {
    std::vector<const Kernels*> out{&scalar()};
#if defined(SKETCHFIT_HAVE_AVX2)
    if (cpu_has_avx2()) out.push_back(&avx2());
#endif
    return out;
}

}  // namespace sketchfit::kernels
