// nn.hpp - from-scratch trainable 1D CNN: conv blocks (conv -> batchnorm ->
// leaky ReLU -> maxpool/2), fully connected blocks with dropout, softmax
// cross-entropy, plain SGD with exponential learning-rate decay.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blefp/features.hpp"

namespace blefp {

struct ShapeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InsufficientLength : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct LabelOutOfRange : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyClass : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// (batch, channels, length) row-major.
struct Tensor {
    std::size_t batch = 0, channels = 0, length = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t b, std::size_t c, std::size_t l)
        : batch(b), channels(c), length(l), data(b * c * l, 0.0) {}
    double& at(std::size_t b, std::size_t c, std::size_t l) {
        return data[(b * channels + c) * length + l];
    }
    double at(std::size_t b, std::size_t c, std::size_t l) const {
        return data[(b * channels + c) * length + l];
    }
};

struct ConvBlockSpec {
    int filters = 0;
    int kernel = 0;
};
struct FcBlockSpec {
    int neurons = 0;
    double dropout = 0.0;
};

struct NetworkConfig {
    std::vector<ConvBlockSpec> conv_blocks;
    std::vector<FcBlockSpec> fc_blocks;
    int n_classes = 2;
    bool same_padding = false;  // zero-pad convs so length is preserved
    double leaky_slope = 0.3;
    double lr0 = 0.05;
    int decay_steps = 600;
    double decay_rate = 0.75;
    bool staircase_decay = false;
    int epochs = 25;
    int batch_size = 64;
    uint64_t seed = 1;
    double bn_momentum = 0.99;
    double bn_eps = 1e-3;
    double sgd_momentum = 0.0;

    void validate() const;
};

// Architecture from the reference setup: 5 conv blocks + 2 FC blocks.
NetworkConfig table1_config(int n_classes);
// Small preset for desk-scale runs.
NetworkConfig desk_config(int n_classes);

struct ConvBlockParams {
    int in_channels = 0, filters = 0, kernel = 0;
    int pad_left = 0, pad_right = 0;  // zero-padding (same-padding mode)
    std::vector<double> w;  // filters x in_channels x kernel
    std::vector<double> b;
    std::vector<double> gamma, beta;          // batchnorm affine
    std::vector<double> run_mean, run_var;    // batchnorm running stats
};

struct DenseParams {
    int in = 0, out = 0;
    std::vector<double> w;  // out x in
    std::vector<double> b;
};

struct Model {
    NetworkConfig config;
    int input_channels = 0;
    int input_length = 0;
    std::vector<ConvBlockParams> conv;
    std::vector<DenseParams> fc;
    DenseParams head;
};

// Gradients mirror the trainable parameters (running stats excluded).
struct ConvBlockGrads {
    std::vector<double> w, b, gamma, beta;
};
struct DenseGrads {
    std::vector<double> w, b;
};
struct Grads {
    std::vector<ConvBlockGrads> conv;
    std::vector<DenseGrads> fc;
    DenseGrads head;
};

enum class Mode { Train, Eval };

// Analytic per-layer length trace: input length, then post-conv and post-pool
// lengths per block. Throws InsufficientLength if any layer underflows.
std::vector<int> trace_lengths(const NetworkConfig& cfg, int input_length);

Model init_model(const NetworkConfig& cfg, int input_channels, int input_length);

// Valid cross-correlation, stride 1, no padding.
Tensor conv1d_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>& b,
                      int filters, int in_channels, int kernel);

// One conv block: conv -> batchnorm -> leaky ReLU -> maxpool width 2 stride 2.
// Train mode uses batch statistics and updates running stats on `block`.
Tensor block_forward(const Tensor& x, ConvBlockParams& block, Mode mode, double leaky_slope,
                     double bn_momentum, double bn_eps);

// Logits (batch x n_classes). Eval mode is deterministic; dropout only fires
// in train mode with the given seed.
Tensor forward(Model& model, const Tensor& batch, Mode mode, uint64_t dropout_seed = 0);

// Mean softmax cross-entropy over the batch plus full backprop gradients.
// Batch statistics are used for batchnorm (train-mode forward).
std::pair<double, Grads> loss_and_grad(Model& model, const Tensor& batch,
                                       const std::vector<int>& labels,
                                       uint64_t dropout_seed = 0,
                                       bool update_running_stats = true);

double lr_schedule(int step, const NetworkConfig& cfg);

struct FeatureDataset {
    std::vector<FeatureTensor> tensors;
    std::vector<int> labels;
};

Model train(const FeatureDataset& dataset, const NetworkConfig& cfg);

std::vector<int> predict(Model& model, const Tensor& batch);

// Turn extracted features into an nn input batch (all tensors must share shape).
Tensor batch_from_features(const std::vector<FeatureTensor>& tensors, std::size_t first,
                           std::size_t count);

// Trainable parameter blobs in a fixed order, paired with their gradients.
std::vector<std::pair<std::string, std::vector<double>*>> param_blobs(Model& model);
std::vector<std::vector<double>*> grad_blobs(Grads& grads);
Grads zero_grads_like(const Model& model);

// Versioned binary checkpoint: magic "BLEFPM1\0", little-endian 64-bit counts,
// IEEE-754 64-bit payloads, JSON config footer.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// Central finite-difference check of every backprop gradient. `corrupt` is a
// negative-control hook that perturbs one gradient before comparison.
struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_err = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_err = 0.0;
    bool pass = false;
};

GradCheckReport gradient_check(const NetworkConfig& cfg, int input_channels, int input_length,
                               int batch, double eps = 1e-5, double tol = 1e-4, uint64_t seed = 7,
                               bool corrupt = false);

}  // namespace blefp
