#pragma once

#include <cstddef>
#include <vector>

namespace decon {

// Probability vector over C classes, kept strictly inside the simplex.
// Entries are floor-clipped at kFloor and renormalized on construction so
// log(prior) is always finite.
class ClassPrior {
public:
    static constexpr double kFloor = 1e-8;

    ClassPrior() = default;
    explicit ClassPrior(std::vector<double> probs);
    static ClassPrior uniform(std::size_t num_classes);
    // normalize arbitrary nonnegative weights (e.g. class counts)
    static ClassPrior from_counts(const std::vector<double>& counts);

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t c) const { return probs_[c]; }
    const std::vector<double>& probs() const { return probs_; }
    std::vector<double> log() const;

    double l1_distance(const ClassPrior& other) const;

private:
    std::vector<double> probs_;
};

// softmax with max-subtraction; output sums to 1 and is strictly positive
std::vector<double> softmax(const std::vector<double>& logits);

std::size_t argmax(const std::vector<double>& v);

}  // namespace decon
