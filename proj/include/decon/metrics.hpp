#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "decon/prior.hpp"

namespace decon {

struct GroupMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;
    std::vector<double> per_class_precision;
    std::vector<double> per_class_recall;
    std::vector<double> per_class_f1;
    GroupMetrics head_group;
    GroupMetrics tail_group;
    double pseudo_acc = 0.0;
    double branch_kl = 0.0;
    double prior_kl = 0.0;
    double psi_gap = 0.0;
    bool psi_gap_degenerate = false;

    std::string to_json() const;
};

double pseudo_label_accuracy(const std::vector<std::size_t>& q_tilde,
                             const std::vector<std::size_t>& truth);

double kl_divergence(const ClassPrior& p, const ClassPrior& q);

struct PsiGapResult {
    double value = 0.0;
    bool degenerate = false;  // one of the two groups was empty
};
PsiGapResult psi_gap(const std::vector<double>& weights, const std::vector<bool>& correct_mask);

// Confusion-based evaluation of predicted vs true labels on a test set.
// head/tail groups: top and bottom ceil(C/3) classes ordered by labeled count.
EvalReport classification_report(const std::vector<std::size_t>& predicted,
                                 const std::vector<std::size_t>& truth,
                                 std::size_t num_classes,
                                 const std::vector<int>& labeled_counts);

}  // namespace decon
