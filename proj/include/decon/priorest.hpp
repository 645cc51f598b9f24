#pragma once

#include <deque>
#include <vector>

#include "decon/prior.hpp"

namespace decon {

// EMA estimate of a class prior driven by mini-batch prediction means.
// Keeps a bounded history of the drive sequence so the closed-form and
// tracking-bound checks can replay the updates.
class EmaPrior {
public:
    static constexpr std::size_t kHistoryCap = 1024;

    EmaPrior(std::size_t num_classes, double momentum);

    const ClassPrior& value() const { return value_; }
    double momentum() const { return momentum_; }
    long step() const { return step_; }
    const std::deque<ClassPrior>& history() const { return history_; }
    const ClassPrior& initial() const { return initial_; }

    // value <- m * value + (1 - m) * batch_mean
    void update(const ClassPrior& batch_mean);

private:
    ClassPrior value_;
    ClassPrior initial_;
    double momentum_;
    long step_ = 0;
    std::deque<ClassPrior> history_;
};

// Eq-style mini-batch means feeding the two EMA priors: the balanced-branch
// estimate averages over labeled and unlabeled predictions, the standard-branch
// estimate over unlabeled predictions only.
ClassPrior batch_mean_balanced(const std::vector<std::vector<double>>& probs_labeled,
                               const std::vector<std::vector<double>>& probs_unlabeled);
ClassPrior batch_mean_standard(const std::vector<std::vector<double>>& probs_unlabeled);

}  // namespace decon
