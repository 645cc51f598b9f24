#include "decon/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace decon {

using nlohmann::json;

void AugmentConfig::validate() const {
    if (sigma_weak < 0.0) throw std::invalid_argument("AugmentConfig: sigma_weak < 0");
    if (sigma_strong < sigma_weak) throw std::invalid_argument("AugmentConfig: sigma_strong < sigma_weak");
    if (dropout_frac < 0.0 || dropout_frac >= 1.0) throw std::invalid_argument("AugmentConfig: dropout_frac outside [0,1)");
}

namespace {

DenseLayer init_layer(int in_dim, int out_dim, Rng& rng) {
    // fan-in scaled uniform
    double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    DenseLayer layer;
    layer.weight.assign(out_dim, std::vector<double>(in_dim));
    layer.bias.assign(out_dim, 0.0);
    for (auto& row : layer.weight)
        for (auto& w : row) w = rng.uniform(-bound, bound);
    return layer;
}

DenseLayer zero_like(const DenseLayer& l) {
    DenseLayer z;
    z.weight.assign(l.weight.size(), std::vector<double>(l.in_dim(), 0.0));
    z.bias.assign(l.bias.size(), 0.0);
    return z;
}

std::vector<double> affine(const DenseLayer& l, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != l.in_dim()) throw std::invalid_argument("dense layer: dimension mismatch");
    std::vector<double> out(l.bias);
    for (int o = 0; o < l.out_dim(); ++o) {
        const auto& row = l.weight[o];
        double acc = out[o];
        for (int i = 0; i < l.in_dim(); ++i) acc += row[i] * x[i];
        out[o] = acc;
    }
    return out;
}

// accumulate dL/dW, dL/db and return dL/dx
std::vector<double> affine_backward(const DenseLayer& l, const std::vector<double>& x,
                                    const std::vector<double>& grad_out, DenseLayer& grad) {
    std::vector<double> grad_in(l.in_dim(), 0.0);
    for (int o = 0; o < l.out_dim(); ++o) {
        double g = grad_out[o];
        if (g == 0.0) continue;
        grad.bias[o] += g;
        const auto& row = l.weight[o];
        auto& grow = grad.weight[o];
        for (int i = 0; i < l.in_dim(); ++i) {
            grow[i] += g * x[i];
            grad_in[i] += g * row[i];
        }
    }
    return grad_in;
}

}  // namespace

void DualNetGrads::zero() {
    auto zero_dense = [](DenseLayer& l) {
        for (auto& row : l.weight) std::fill(row.begin(), row.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    };
    for (auto& l : trunk) zero_dense(l);
    zero_dense(head_std);
    zero_dense(head_bal);
}

void DualNetGrads::scale(double s) {
    auto scale_dense = [s](DenseLayer& l) {
        for (auto& row : l.weight)
            for (auto& w : row) w *= s;
        for (auto& b : l.bias) b *= s;
    };
    for (auto& l : trunk) scale_dense(l);
    scale_dense(head_std);
    scale_dense(head_bal);
}

DualNet::DualNet(int input_dim, const std::vector<int>& hidden, int num_classes, std::uint64_t seed)
    : input_dim_(input_dim), num_classes_(num_classes) {
    if (input_dim < 1 || num_classes < 2) throw std::invalid_argument("DualNet: bad dimensions");
    Rng rng(substream_seed(seed, "init"));
    int in = input_dim;
    for (int width : hidden) {
        trunk_.push_back(init_layer(in, width, rng));
        in = width;
    }
    head_std_ = init_layer(in, num_classes, rng);
    head_bal_ = init_layer(in, num_classes, rng);
}

BranchOutputs DualNet::forward(const std::vector<double>& x) const {
    ForwardCache cache;
    return forward(x, cache);
}

BranchOutputs DualNet::forward(const std::vector<double>& x, ForwardCache& cache) const {
    cache.inputs.clear();
    cache.preacts.clear();
    std::vector<double> h = x;
    for (const auto& layer : trunk_) {
        cache.inputs.push_back(h);
        std::vector<double> z = affine(layer, h);
        cache.preacts.push_back(z);
        for (auto& v : z) v = v >= 0.0 ? v : kLeakySlope * v;
        h = std::move(z);
    }
    cache.trunk_out = h;
    BranchOutputs out;
    out.logits_std = affine(head_std_, h);
    out.logits_bal = affine(head_bal_, h);
    return out;
}

void DualNet::backward(const ForwardCache& cache,
                       const std::vector<double>& grad_logits_std,
                       const std::vector<double>& grad_logits_bal,
                       DualNetGrads& grads) const {
    if (cache.trunk_out.empty() && !trunk_.empty())
        throw std::logic_error("DualNet::backward called before forward");
    std::vector<double> grad_trunk(cache.trunk_out.size(), 0.0);
    if (!grad_logits_std.empty()) {
        auto g = affine_backward(head_std_, cache.trunk_out, grad_logits_std, grads.head_std);
        for (std::size_t i = 0; i < grad_trunk.size(); ++i) grad_trunk[i] += g[i];
    }
    if (!grad_logits_bal.empty()) {
        auto g = affine_backward(head_bal_, cache.trunk_out, grad_logits_bal, grads.head_bal);
        for (std::size_t i = 0; i < grad_trunk.size(); ++i) grad_trunk[i] += g[i];
    }
    for (int l = static_cast<int>(trunk_.size()) - 1; l >= 0; --l) {
        const auto& z = cache.preacts[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < grad_trunk.size(); ++i)
            if (z[i] < 0.0) grad_trunk[i] *= kLeakySlope;
        grad_trunk = affine_backward(trunk_[static_cast<std::size_t>(l)],
                                     cache.inputs[static_cast<std::size_t>(l)], grad_trunk,
                                     grads.trunk[static_cast<std::size_t>(l)]);
    }
}

DualNetGrads DualNet::make_grads() const {
    DualNetGrads g;
    for (const auto& l : trunk_) g.trunk.push_back(zero_like(l));
    g.head_std = zero_like(head_std_);
    g.head_bal = zero_like(head_bal_);
    return g;
}

namespace {
template <typename Fn>
void for_each_layer(std::vector<DenseLayer>& trunk, DenseLayer& hs, DenseLayer& hb, Fn fn) {
    for (auto& l : trunk) fn(l);
    fn(hs);
    fn(hb);
}
template <typename Fn>
void for_each_layer(const std::vector<DenseLayer>& trunk, const DenseLayer& hs, const DenseLayer& hb, Fn fn) {
    for (const auto& l : trunk) fn(l);
    fn(hs);
    fn(hb);
}
}  // namespace

std::size_t DualNet::num_params() const {
    std::size_t n = 0;
    for_each_layer(trunk_, head_std_, head_bal_, [&](const DenseLayer& l) {
        n += static_cast<std::size_t>(l.out_dim()) * static_cast<std::size_t>(l.in_dim()) + l.bias.size();
    });
    return n;
}

std::vector<double> DualNet::flat_params() const {
    std::vector<double> flat;
    flat.reserve(num_params());
    for_each_layer(trunk_, head_std_, head_bal_, [&](const DenseLayer& l) {
        for (const auto& row : l.weight) flat.insert(flat.end(), row.begin(), row.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    });
    return flat;
}

void DualNet::set_flat_params(const std::vector<double>& flat) {
    if (flat.size() != num_params()) throw std::invalid_argument("set_flat_params: size mismatch");
    std::size_t k = 0;
    for_each_layer(trunk_, head_std_, head_bal_, [&](DenseLayer& l) {
        for (auto& row : l.weight)
            for (auto& w : row) w = flat[k++];
        for (auto& b : l.bias) b = flat[k++];
    });
}

std::vector<double> DualNet::flatten(const DualNetGrads& grads) {
    std::vector<double> flat;
    for_each_layer(grads.trunk, grads.head_std, grads.head_bal, [&](const DenseLayer& l) {
        for (const auto& row : l.weight) flat.insert(flat.end(), row.begin(), row.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    });
    return flat;
}

namespace {
json layer_to_json(const DenseLayer& l) {
    return json{{"weight", l.weight}, {"bias", l.bias}};
}
DenseLayer layer_from_json(const json& j) {
    DenseLayer l;
    l.weight = j.at("weight").get<std::vector<std::vector<double>>>();
    l.bias = j.at("bias").get<std::vector<double>>();
    return l;
}
}  // namespace

std::string DualNet::to_json() const {
    json j;
    j["input_dim"] = input_dim_;
    j["num_classes"] = num_classes_;
    j["trunk"] = json::array();
    for (const auto& l : trunk_) j["trunk"].push_back(layer_to_json(l));
    j["head_std"] = layer_to_json(head_std_);
    j["head_bal"] = layer_to_json(head_bal_);
    return j.dump();
}

DualNet DualNet::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    DualNet net;
    net.input_dim_ = j.at("input_dim").get<int>();
    net.num_classes_ = j.at("num_classes").get<int>();
    for (const auto& lj : j.at("trunk")) net.trunk_.push_back(layer_from_json(lj));
    net.head_std_ = layer_from_json(j.at("head_std"));
    net.head_bal_ = layer_from_json(j.at("head_bal"));
    return net;
}

std::vector<double> augment(const std::vector<double>& x, const AugmentConfig& cfg,
                            AugmentStrength strength, Rng& rng) {
    cfg.validate();
    std::vector<double> out = x;
    double sigma = strength == AugmentStrength::Weak ? cfg.sigma_weak : cfg.sigma_strong;
    if (sigma > 0.0)
        for (auto& v : out) v += rng.normal(0.0, sigma);
    if (strength == AugmentStrength::Strong && cfg.dropout_frac > 0.0) {
        // zero out round(frac * d) coordinates chosen without replacement
        std::size_t d = out.size();
        std::size_t k = static_cast<std::size_t>(std::floor(cfg.dropout_frac * static_cast<double>(d) + 0.5));
        std::vector<std::size_t> idx(d);
        for (std::size_t i = 0; i < d; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + rng.index(d - i);
            std::swap(idx[i], idx[j]);
            out[idx[i]] = 0.0;
        }
    }
    return out;
}

}  // namespace decon
