#include "decon/priorest.hpp"

#include <stdexcept>

namespace decon {

EmaPrior::EmaPrior(std::size_t num_classes, double momentum)
    : value_(ClassPrior::uniform(num_classes)),
      initial_(value_),
      momentum_(momentum) {
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("EmaPrior: momentum outside [0,1)");
}

void EmaPrior::update(const ClassPrior& batch_mean) {
    if (batch_mean.size() != value_.size()) throw std::invalid_argument("EmaPrior: size mismatch");
    std::vector<double> next(value_.size());
    for (std::size_t c = 0; c < next.size(); ++c)
        next[c] = momentum_ * value_[c] + (1.0 - momentum_) * batch_mean[c];
    value_ = ClassPrior(std::move(next));
    ++step_;
    history_.push_back(batch_mean);
    if (history_.size() > kHistoryCap) history_.pop_front();
}

namespace {
ClassPrior mean_of(const std::vector<const std::vector<std::vector<double>>*>& groups) {
    std::size_t n = 0;
    std::size_t dim = 0;
    for (const auto* g : groups)
        for (const auto& v : *g) {
            if (dim == 0) dim = v.size();
            if (v.size() != dim) throw std::invalid_argument("batch mean: inconsistent vector sizes");
            ++n;
        }
    if (n == 0) throw std::invalid_argument("batch mean: empty batch");
    std::vector<double> acc(dim, 0.0);
    for (const auto* g : groups)
        for (const auto& v : *g)
            for (std::size_t c = 0; c < dim; ++c) acc[c] += v[c];
    for (auto& a : acc) a /= static_cast<double>(n);
    return ClassPrior(std::move(acc));
}
}  // namespace

ClassPrior batch_mean_balanced(const std::vector<std::vector<double>>& probs_labeled,
                               const std::vector<std::vector<double>>& probs_unlabeled) {
    return mean_of({&probs_labeled, &probs_unlabeled});
}

ClassPrior batch_mean_standard(const std::vector<std::vector<double>>& probs_unlabeled) {
    return mean_of({&probs_unlabeled});
}

}  // namespace decon
