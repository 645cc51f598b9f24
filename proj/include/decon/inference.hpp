#pragma once

#include <cstddef>
#include <vector>

#include "decon/prior.hpp"

namespace decon {

struct Prediction {
    std::vector<double> raw_logits;
    std::vector<double> adjusted_scores;  // raw - tau3 * log(prior)
    std::size_t label = 0;                // argmax of adjusted scores, lowest-index tie-break
    double margin = 0.0;                  // top adjusted score minus runner-up
};

Prediction post_hoc_predict(const std::vector<double>& logits_bal, const ClassPrior& pi_b,
                            double tau3);

// softmax of the adjusted scores; algebraically equal to
// p(y|x) * prior_y^{-tau3} / normalizer with p = softmax(raw logits)
std::vector<double> adjusted_probs(const std::vector<double>& logits_bal, const ClassPrior& pi_b,
                                   double tau3);

// Margin robustness: if the argmax margin under prior_a exceeds
// 2 * tau * ||log prior_a - log prior_b||_inf, the argmax cannot flip when
// swapping prior_a for prior_b.
struct MarginReport {
    bool premise_held = false;
    bool conclusion_held = false;  // meaningful only when premise_held
    double margin = 0.0;
    double log_prior_gap = 0.0;    // ||log a - log b||_inf
};

MarginReport margin_robustness_check(const std::vector<double>& logits, const ClassPrior& prior_a,
                                     const ClassPrior& prior_b, double tau);

}  // namespace decon
