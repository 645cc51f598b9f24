#include "decon/prior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace decon {

ClassPrior::ClassPrior(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("ClassPrior: empty vector");
    double sum = 0.0;
    for (double& p : probs_) {
        if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("ClassPrior: negative or non-finite entry");
        p = std::max(p, kFloor);
        sum += p;
    }
    for (double& p : probs_) p /= sum;
}

ClassPrior ClassPrior::uniform(std::size_t num_classes) {
    if (num_classes == 0) throw std::invalid_argument("ClassPrior: zero classes");
    return ClassPrior(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

ClassPrior ClassPrior::from_counts(const std::vector<double>& counts) {
    return ClassPrior(counts);
}

std::vector<double> ClassPrior::log() const {
    std::vector<double> out(probs_.size());
    for (std::size_t c = 0; c < probs_.size(); ++c) out[c] = std::log(probs_[c]);
    return out;
}

double ClassPrior::l1_distance(const ClassPrior& other) const {
    if (other.size() != size()) throw std::invalid_argument("ClassPrior: size mismatch");
    double d = 0.0;
    for (std::size_t c = 0; c < size(); ++c) d += std::fabs(probs_[c] - other.probs_[c]);
    return d;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - mx);
        sum += out[c];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::size_t argmax(const std::vector<double>& v) {
    // lowest-index tie-break
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c)
        if (v[c] > v[best]) best = c;
    return best;
}

}  // namespace decon
