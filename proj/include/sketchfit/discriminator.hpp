#pragma once

#include <string>
#include <vector>

#include "sketchfit/adam.hpp"
#include "sketchfit/common.hpp"

namespace sketchfit {

// Structural shape discriminator: a small convolutional network over V view
// silhouettes stacked as channels. Three stride-2 3x3 convolutions with
// leaky-rectifier slope 0.2 (channels V -> 16 -> 32 -> 64), then a linear
// layer to a single logit. Positive logits mean "generated", negative mean
// "ground truth"; that orientation is what the adversarial objective below
// trains toward.
class DiscParams {
  public:
    // resolution must be a power of two >= 16; views >= 1. Convolution and
    // bias weights use a uniform fan-based init, the final linear layer is
    // zero-initialized so every input maps to logit 0 at creation.
    static DiscParams init(int views, int resolution, uint64_t seed);

    int views() const { return views_; }
    int resolution() const { return resolution_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // Flat checkpoint: 16-byte header (magic 'SFDC', u32 version = 1,
    // u32 views, u32 resolution; all little-endian) followed by the raw
    // little-endian doubles of data() in layer order
    // conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b, fc_w, fc_b.
    void save(const std::string& path) const;
    static DiscParams load(const std::string& path);

    // Offsets into data() per layer, in the order above.
    struct Layout {
        size_t conv_w[3], conv_b[3];
        size_t fc_w, fc_b;
        size_t total;
        int channels[4];   // V, 16, 32, 64
        int spatial[4];    // R, R/2, R/4, R/8
    };
    const Layout& layout() const { return layout_; }

  private:
    DiscParams() = default;
    int views_ = 0, resolution_ = 0;
    Layout layout_{};
    std::vector<double> data_;
};

// A batch of stacked view silhouettes, each item views * R * R doubles.
struct ViewBatch {
    int views = 0;
    int resolution = 0;
    std::vector<std::vector<double>> items;
    bool real = false;

    size_t item_size() const { return size_t(views) * resolution * resolution; }
};

void validate_batch(const DiscParams& params, const ViewBatch& batch);

// Forward pass keeping the activations needed for gradients.
struct DiscForward {
    std::vector<double> logits;
    // per item: input copy and pre-activation conv outputs
    std::vector<std::vector<double>> x0, z1, z2, z3;
};

DiscForward disc_forward(const DiscParams& params, const ViewBatch& batch);

struct DiscBackward {
    std::vector<double> param_grad;
    std::vector<std::vector<double>> input_grad;  // per item
};

// Gradients of sum_i dlogits[i] * logit_i with respect to parameters and
// input silhouettes.
DiscBackward disc_backward(const DiscParams& params, const ViewBatch& batch,
                           const DiscForward& fwd, const std::vector<double>& dlogits,
                           bool want_input_grad = true);

// f(u) = -log(1 + exp(-u)), stable over the full double range.
double nonsat_f(double u);

struct GanLossValues {
    double generator = 0.0;      // E[f(u_fake)] + E[f(-u_real)]
    double discriminator = 0.0;  // negation of the same objective
};

GanLossValues gan_loss_values(const std::vector<double>& fake_logits,
                              const std::vector<double>& real_logits);

// d(generator loss)/d(fake logits): sigmoid(-u) / batch.
std::vector<double> generator_logit_grad(const std::vector<double>& fake_logits);

GanLossValues gan_losses(const DiscParams& params, const ViewBatch& fake,
                         const ViewBatch& real);

struct DiscStepMetrics {
    double disc_loss = 0.0;
    double gen_loss = 0.0;
    double accuracy_real = 0.0;  // fraction of real items with logit < 0
    double accuracy_fake = 0.0;  // fraction of fake items with logit > 0
};

// One Adam update of the discriminator parameters on the paired batches.
// Mesh-side state is never touched here.
DiscStepMetrics disc_train_step(DiscParams& params, const ViewBatch& real,
                                const ViewBatch& fake, AdamState& opt, double lr);

}  // namespace sketchfit
