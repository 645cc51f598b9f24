#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decon/rng.hpp"

namespace decon {

// One fully connected layer, row-major weights [out][in].
struct DenseLayer {
    std::vector<std::vector<double>> weight;
    std::vector<double> bias;

    int in_dim() const { return weight.empty() ? 0 : static_cast<int>(weight.front().size()); }
    int out_dim() const { return static_cast<int>(weight.size()); }
};

struct BranchOutputs {
    std::vector<double> logits_std;
    std::vector<double> logits_bal;
};

struct AugmentConfig {
    double sigma_weak = 0.05;
    double sigma_strong = 0.3;
    double dropout_frac = 0.1;

    void validate() const;
};

enum class AugmentStrength { Weak, Strong };

// Per-sample forward cache: layer inputs plus pre-activations, consumed by
// backward().
struct ForwardCache {
    std::vector<std::vector<double>> inputs;   // input to each trunk layer
    std::vector<std::vector<double>> preacts;  // pre-activation of each trunk layer
    std::vector<double> trunk_out;
};

// Gradient buffers mirroring the parameter layout.
struct DualNetGrads {
    std::vector<DenseLayer> trunk;
    DenseLayer head_std;
    DenseLayer head_bal;

    void zero();
    void scale(double s);
};

// Shared trunk (leaky-rectifier units) with two linear heads: standard logits
// f(x) and balanced logits f_bal(x).
class DualNet {
public:
    static constexpr double kLeakySlope = 0.01;

    DualNet() = default;
    // hidden: widths of trunk layers, e.g. {32, 32}
    DualNet(int input_dim, const std::vector<int>& hidden, int num_classes, std::uint64_t seed);

    int input_dim() const { return input_dim_; }
    int num_classes() const { return num_classes_; }

    BranchOutputs forward(const std::vector<double>& x) const;
    BranchOutputs forward(const std::vector<double>& x, ForwardCache& cache) const;

    // Accumulates parameter gradients for one sample given per-head upstream
    // logit gradients (either may be empty to skip that head).
    void backward(const ForwardCache& cache,
                  const std::vector<double>& grad_logits_std,
                  const std::vector<double>& grad_logits_bal,
                  DualNetGrads& grads) const;

    DualNetGrads make_grads() const;

    // flat parameter access, used by SGD / EMA / finite differences
    std::size_t num_params() const;
    std::vector<double> flat_params() const;
    void set_flat_params(const std::vector<double>& flat);
    static std::vector<double> flatten(const DualNetGrads& grads);

    std::string to_json() const;
    static DualNet from_json(const std::string& json_text);

    const std::vector<DenseLayer>& trunk() const { return trunk_; }
    const DenseLayer& head_std() const { return head_std_; }
    const DenseLayer& head_bal() const { return head_bal_; }

private:
    int input_dim_ = 0;
    int num_classes_ = 0;
    std::vector<DenseLayer> trunk_;
    DenseLayer head_std_;
    DenseLayer head_bal_;
};

std::vector<double> augment(const std::vector<double>& x, const AugmentConfig& cfg,
                            AugmentStrength strength, Rng& rng);

}  // namespace decon
