#include "decon/inference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace decon {

Prediction post_hoc_predict(const std::vector<double>& logits_bal, const ClassPrior& pi_b,
                            double tau3) {
    if (logits_bal.size() != pi_b.size()) throw std::invalid_argument("post_hoc_predict: size mismatch");
    Prediction pred;
    pred.raw_logits = logits_bal;
    auto log_pi = pi_b.log();
    pred.adjusted_scores.resize(logits_bal.size());
    for (std::size_t c = 0; c < logits_bal.size(); ++c)
        pred.adjusted_scores[c] = logits_bal[c] - tau3 * log_pi[c];
    pred.label = argmax(pred.adjusted_scores);
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pred.adjusted_scores.size(); ++c)
        if (c != pred.label && pred.adjusted_scores[c] > runner_up) runner_up = pred.adjusted_scores[c];
    pred.margin = pred.adjusted_scores.size() > 1 ? pred.adjusted_scores[pred.label] - runner_up : 0.0;
    return pred;
}

std::vector<double> adjusted_probs(const std::vector<double>& logits_bal, const ClassPrior& pi_b,
                                   double tau3) {
    return softmax(post_hoc_predict(logits_bal, pi_b, tau3).adjusted_scores);
}

MarginReport margin_robustness_check(const std::vector<double>& logits, const ClassPrior& prior_a,
                                     const ClassPrior& prior_b, double tau) {
    Prediction under_a = post_hoc_predict(logits, prior_a, tau);
    Prediction under_b = post_hoc_predict(logits, prior_b, tau);
    auto log_a = prior_a.log();
    auto log_b = prior_b.log();
    double gap = 0.0;
    for (std::size_t c = 0; c < log_a.size(); ++c)
        gap = std::max(gap, std::fabs(log_a[c] - log_b[c]));
    MarginReport rep;
    rep.margin = under_a.margin;
    rep.log_prior_gap = gap;
    rep.premise_held = under_a.margin > 2.0 * tau * gap;
    rep.conclusion_held = under_a.label == under_b.label;
    return rep;
}

}  // namespace decon
