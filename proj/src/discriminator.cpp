#include "sketchfit/discriminator.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "sketchfit/kernels.hpp"

namespace sketchfit {

namespace {

constexpr int kChannels[4] = {0, 16, 32, 64};  // [0] replaced by views
constexpr double kLeakySlope = 0.2;
constexpr uint32_t kMagic = 0x43444653;  // "SFDC" little-endian
constexpr uint32_t kVersion = 1;

size_t conv_w_count(int ic, int oc) { return size_t(oc) * ic * 9; }

struct ConvDims {
    int ic, oc, in_size, out_size;
};

// im2col for 3x3 stride-2 pad-1: patches[out_pixel][ic*9], zero padded.
void im2col(const double* x, int ic, int in_size, int out_size, double* cols) {
    const int patch = ic * 9;
    for (int oy = 0; oy < out_size; ++oy) {
        for (int ox = 0; ox < out_size; ++ox) {
            double* dst = cols + (size_t(oy) * out_size + ox) * patch;
            for (int c = 0; c < ic; ++c) {
                const double* plane = x + size_t(c) * in_size * in_size;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * 2 - 1 + ky;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * 2 - 1 + kx;
                        *dst++ = (iy >= 0 && iy < in_size && ix >= 0 && ix < in_size)
                                     ? plane[size_t(iy) * in_size + ix]
                                     : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, int ic, int in_size, int out_size, double* gx) {
    const int patch = ic * 9;
    for (int oy = 0; oy < out_size; ++oy) {
        for (int ox = 0; ox < out_size; ++ox) {
            const double* src = cols + (size_t(oy) * out_size + ox) * patch;
            for (int c = 0; c < ic; ++c) {
                double* plane = gx + size_t(c) * in_size * in_size;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * 2 - 1 + ky;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * 2 - 1 + kx;
                        if (iy >= 0 && iy < in_size && ix >= 0 && ix < in_size)
                            plane[size_t(iy) * in_size + ix] += *src;
                        ++src;
                    }
                }
            }
        }
    }
}

void conv_forward(const double* x, const double* w, const double* b,
                  const ConvDims& d, double* z, std::vector<double>& cols) {
    const int patch = d.ic * 9;
    const int opix = d.out_size * d.out_size;
    cols.resize(size_t(opix) * patch);
    im2col(x, d.ic, d.in_size, d.out_size, cols.data());
    const auto& K = kernels::active();
    for (int oc = 0; oc < d.oc; ++oc) {
        const double* wrow = w + size_t(oc) * patch;
        double* zplane = z + size_t(oc) * opix;
        for (int p = 0; p < opix; ++p)
            zplane[p] = K.dot(wrow, cols.data() + size_t(p) * patch, patch) + b[oc];
    }
}

// gz is d(loss)/d(pre-activation); accumulates dW, dB and optionally gx.
void conv_backward(const double* x, const double* w, const ConvDims& d,
                   const double* gz, double* gw, double* gb, double* gx,
                   std::vector<double>& cols, std::vector<double>& gcols) {
    const int patch = d.ic * 9;
    const int opix = d.out_size * d.out_size;
    cols.resize(size_t(opix) * patch);
    im2col(x, d.ic, d.in_size, d.out_size, cols.data());
    const auto& K = kernels::active();
    for (int oc = 0; oc < d.oc; ++oc) {
        const double* gzp = gz + size_t(oc) * opix;
        double* gwrow = gw + size_t(oc) * patch;
        for (int p = 0; p < opix; ++p) {
            K.axpy(gzp[p], cols.data() + size_t(p) * patch, gwrow, patch);
            gb[oc] += gzp[p];
        }
    }
    if (gx) {
        gcols.assign(size_t(opix) * patch, 0.0);
        for (int oc = 0; oc < d.oc; ++oc) {
            const double* gzp = gz + size_t(oc) * opix;
            const double* wrow = w + size_t(oc) * patch;
            for (int p = 0; p < opix; ++p)
                K.axpy(gzp[p], wrow, gcols.data() + size_t(p) * patch, patch);
        }
        col2im_add(gcols.data(), d.ic, d.in_size, d.out_size, gx);
    }
}

}  // namespace

DiscParams DiscParams::init(int views, int resolution, uint64_t seed) {
    if (views < 1) throw validation_error("discriminator needs at least one view");
    if (resolution < 16 || (resolution & (resolution - 1)) != 0)
        throw validation_error("discriminator resolution must be a power of two >= 16");

    DiscParams p;
    p.views_ = views;
    p.resolution_ = resolution;
    auto& L = p.layout_;
    L.channels[0] = views;
    for (int i = 1; i < 4; ++i) L.channels[i] = kChannels[i];
    for (int i = 0; i < 4; ++i) L.spatial[i] = resolution >> i;

    size_t off = 0;
    for (int l = 0; l < 3; ++l) {
        L.conv_w[l] = off;
        off += conv_w_count(L.channels[l], L.channels[l + 1]);
        L.conv_b[l] = off;
        off += L.channels[l + 1];
    }
    const size_t fc_in = size_t(L.channels[3]) * L.spatial[3] * L.spatial[3];
    L.fc_w = off;
    off += fc_in;
    L.fc_b = off;
    off += 1;
    L.total = off;

    p.data_.assign(off, 0.0);
    Rng rng(seed);
    for (int l = 0; l < 3; ++l) {
        const int fan_in = L.channels[l] * 9;
        const int fan_out = L.channels[l + 1] * 9;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        const size_t count = conv_w_count(L.channels[l], L.channels[l + 1]);
        for (size_t i = 0; i < count; ++i)
            p.data_[L.conv_w[l] + i] = rng.uniform(-limit, limit);
        // biases stay zero
    }
    // final layer zero-initialized: logit is 0 for any input
    return p;
}

void DiscParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    const uint32_t header[4] = {kMagic, kVersion, uint32_t(views_), uint32_t(resolution_)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(data_.data()),
              std::streamsize(data_.size() * sizeof(double)));
    if (!out) throw io_error("failed writing checkpoint: " + path);
}

DiscParams DiscParams::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    uint32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] != kMagic)
        throw format_error("not a discriminator checkpoint: " + path);
    if (header[1] != kVersion)
        throw format_error("unsupported checkpoint version");
    DiscParams p = init(int(header[2]), int(header[3]), 0);
    in.read(reinterpret_cast<char*>(p.data_.data()),
            std::streamsize(p.data_.size() * sizeof(double)));
    if (!in || in.gcount() != std::streamsize(p.data_.size() * sizeof(double)))
        throw format_error("checkpoint truncated: " + path);
    return p;
}

void validate_batch(const DiscParams& params, const ViewBatch& batch) {
    if (batch.views != params.views() || batch.resolution != params.resolution())
        throw shape_error("batch shape does not match discriminator");
    for (const auto& item : batch.items) {
        if (item.size() != batch.item_size())
            throw shape_error("batch item has wrong size");
        for (double v : item)
            if (!std::isfinite(v)) throw numeric_error("non-finite batch value");
    }
}

DiscForward disc_forward(const DiscParams& params, const ViewBatch& batch) {
    validate_batch(params, batch);
    const auto& L = params.layout();
    const auto& data = params.data();
    const auto& K = kernels::active();

    DiscForward fwd;
    const size_t n = batch.items.size();
    fwd.logits.resize(n);
    fwd.x0.resize(n);
    fwd.z1.resize(n);
    fwd.z2.resize(n);
    fwd.z3.resize(n);

    std::vector<double> cols, act;
    for (size_t i = 0; i < n; ++i) {
        fwd.x0[i] = batch.items[i];
        const double* x = fwd.x0[i].data();
        std::vector<double>* zs[3] = {&fwd.z1[i], &fwd.z2[i], &fwd.z3[i]};
        std::vector<double> prev;
        for (int l = 0; l < 3; ++l) {
            ConvDims d{L.channels[l], L.channels[l + 1], L.spatial[l], L.spatial[l + 1]};
            zs[l]->assign(size_t(d.oc) * d.out_size * d.out_size, 0.0);
            conv_forward(x, data.data() + L.conv_w[l], data.data() + L.conv_b[l], d,
                         zs[l]->data(), cols);
            act.resize(zs[l]->size());
            K.leaky_relu(zs[l]->data(), act.data(), act.size(), kLeakySlope);
            prev = act;
            x = prev.data();
        }
        const size_t fc_in = size_t(L.channels[3]) * L.spatial[3] * L.spatial[3];
        fwd.logits[i] = K.dot(data.data() + L.fc_w, x, fc_in) + data[L.fc_b];
        if (!std::isfinite(fwd.logits[i]))
            throw numeric_error("discriminator produced a non-finite logit");
    }
    return fwd;
}

DiscBackward disc_backward(const DiscParams& params, const ViewBatch& batch,
                           const DiscForward& fwd, const std::vector<double>& dlogits,
                           bool want_input_grad) {
    validate_batch(params, batch);
    if (dlogits.size() != batch.items.size())
        throw shape_error("dlogits size mismatch");
    const auto& L = params.layout();
    const auto& data = params.data();
    const auto& K = kernels::active();

    DiscBackward bwd;
    bwd.param_grad.assign(L.total, 0.0);
    if (want_input_grad) bwd.input_grad.resize(batch.items.size());

    std::vector<double> cols, gcols, a1, a2, a3;
    for (size_t i = 0; i < batch.items.size(); ++i) {
        const double g = dlogits[i];
        // recompute post-activations from the cached pre-activations
        a1.resize(fwd.z1[i].size());
        a2.resize(fwd.z2[i].size());
        a3.resize(fwd.z3[i].size());
        K.leaky_relu(fwd.z1[i].data(), a1.data(), a1.size(), kLeakySlope);
        K.leaky_relu(fwd.z2[i].data(), a2.data(), a2.size(), kLeakySlope);
        K.leaky_relu(fwd.z3[i].data(), a3.data(), a3.size(), kLeakySlope);

        const size_t fc_in = a3.size();
        // fc layer
        K.axpy(g, a3.data(), bwd.param_grad.data() + L.fc_w, fc_in);
        bwd.param_grad[L.fc_b] += g;
        std::vector<double> ga3(fc_in, 0.0);
        K.axpy(g, data.data() + L.fc_w, ga3.data(), fc_in);

        std::vector<double> gz3(fwd.z3[i].size(), 0.0);
        K.leaky_relu_grad(fwd.z3[i].data(), ga3.data(), gz3.data(), gz3.size(), kLeakySlope);

        ConvDims d3{L.channels[2], L.channels[3], L.spatial[2], L.spatial[3]};
        std::vector<double> ga2(a2.size(), 0.0);
        conv_backward(a2.data(), data.data() + L.conv_w[2], d3, gz3.data(),
                      bwd.param_grad.data() + L.conv_w[2],
                      bwd.param_grad.data() + L.conv_b[2], ga2.data(), cols, gcols);

        std::vector<double> gz2(fwd.z2[i].size(), 0.0);
        K.leaky_relu_grad(fwd.z2[i].data(), ga2.data(), gz2.data(), gz2.size(), kLeakySlope);

        ConvDims d2{L.channels[1], L.channels[2], L.spatial[1], L.spatial[2]};
        std::vector<double> ga1(a1.size(), 0.0);
        conv_backward(a1.data(), data.data() + L.conv_w[1], d2, gz2.data(),
                      bwd.param_grad.data() + L.conv_w[1],
                      bwd.param_grad.data() + L.conv_b[1], ga1.data(), cols, gcols);

        std::vector<double> gz1(fwd.z1[i].size(), 0.0);
        K.leaky_relu_grad(fwd.z1[i].data(), ga1.data(), gz1.data(), gz1.size(), kLeakySlope);

        ConvDims d1{L.channels[0], L.channels[1], L.spatial[0], L.spatial[1]};
        double* gx = nullptr;
        if (want_input_grad) {
            bwd.input_grad[i].assign(batch.item_size(), 0.0);
            gx = bwd.input_grad[i].data();
        }
        conv_backward(fwd.x0[i].data(), data.data() + L.conv_w[0], d1, gz1.data(),
                      bwd.param_grad.data() + L.conv_w[0],
                      bwd.param_grad.data() + L.conv_b[0], gx, cols, gcols);
    }
    return bwd;
}

double nonsat_f(double u) {
    // -softplus(-u)
    const double w = std::exp(-std::fabs(u));
    const double base = u < 0.0 ? -u : 0.0;
    return -(base + (w < 1e-8 ? w : std::log1p(w)));
}

namespace {
double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}
}  // namespace

GanLossValues gan_loss_values(const std::vector<double>& fake_logits,
                              const std::vector<double>& real_logits) {
    if (fake_logits.empty() || real_logits.empty())
        throw validation_error("gan losses need non-empty batches");
    double fake_term = 0.0, real_term = 0.0;
    for (double u : fake_logits) fake_term += nonsat_f(u);
    for (double u : real_logits) real_term += nonsat_f(-u);
    GanLossValues v;
    v.generator = fake_term / double(fake_logits.size()) +
                  real_term / double(real_logits.size());
    v.discriminator = -v.generator;
    return v;
}

std::vector<double> generator_logit_grad(const std::vector<double>& fake_logits) {
    std::vector<double> g(fake_logits.size());
    const double inv = 1.0 / double(fake_logits.size());
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = stable_sigmoid(-fake_logits[i]) * inv;  // f'(u) = sigmoid(-u)
    return g;
}

GanLossValues gan_losses(const DiscParams& params, const ViewBatch& fake,
                         const ViewBatch& real) {
    const DiscForward ff = disc_forward(params, fake);
    const DiscForward fr = disc_forward(params, real);
    return gan_loss_values(ff.logits, fr.logits);
}

DiscStepMetrics disc_train_step(DiscParams& params, const ViewBatch& real,
                                const ViewBatch& fake, AdamState& opt, double lr) {
    if (real.items.empty() || fake.items.empty())
        throw validation_error("disc_train_step needs non-empty batches");

    const DiscForward ff = disc_forward(params, fake);
    const DiscForward fr = disc_forward(params, real);
    const GanLossValues values = gan_loss_values(ff.logits, fr.logits);

    // discriminator loss = -E[f(u_fake)] - E[f(-u_real)]
    std::vector<double> dfake(ff.logits.size()), dreal(fr.logits.size());
    const double inv_f = 1.0 / double(ff.logits.size());
    const double inv_r = 1.0 / double(fr.logits.size());
    for (size_t i = 0; i < dfake.size(); ++i)
        dfake[i] = -stable_sigmoid(-ff.logits[i]) * inv_f;
    for (size_t i = 0; i < dreal.size(); ++i)
        dreal[i] = stable_sigmoid(fr.logits[i]) * inv_r;

    const DiscBackward bf = disc_backward(params, fake, ff, dfake, false);
    const DiscBackward br = disc_backward(params, real, fr, dreal, false);
    std::vector<double> grad = bf.param_grad;
    kernels::active().axpy(1.0, br.param_grad.data(), grad.data(), grad.size());

    adam_step(params.data(), grad, opt, lr);

    DiscStepMetrics m;
    m.disc_loss = values.discriminator;
    m.gen_loss = values.generator;
    int ok_r = 0, ok_f = 0;
    for (double u : fr.logits) ok_r += (u < 0.0);
    for (double u : ff.logits) ok_f += (u > 0.0);
    m.accuracy_real = double(ok_r) / double(fr.logits.size());
    m.accuracy_fake = double(ok_f) / double(ff.logits.size());
    return m;
}

}  // namespace sketchfit
