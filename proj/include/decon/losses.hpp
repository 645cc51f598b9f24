#pragma once

#include <cstddef>
#include <vector>

#include "decon/prior.hpp"

namespace decon {

struct Hyperparams {
    double tau1 = 1.0;   // pseudo-label correction intensity
    double tau2 = 2.0;   // standard-branch alignment intensity
    double tau3 = 1.0;   // post-hoc adjustment intensity
    double rho = 0.95;   // confidence threshold for the standard consistency term
    double m = 0.99;     // EMA momentum for both prior estimates
    int batch_b = 32;    // labeled mini-batch size
    double mu = 2.0;     // unlabeled-to-labeled batch ratio

    void validate() const;
};

// Per-unlabeled-sample record produced by pseudo-label correction.
struct WeightedPseudoLabel {
    std::vector<double> p_pre;   // softmax of standard-branch logits (weak view)
    std::vector<double> p_plc;   // distribution after log-prior correction
    std::size_t q_tilde = 0;     // corrected pseudo-label
    double eta = 0.0;            // overlap score, in [0,1]
    double psi = 0.0;            // final weight gamma_t * eta
};

struct LossBreakdown {
    double l_labeled = 0.0;    // standard branch, labeled (aligned CE)
    double l_con = 0.0;        // standard branch, consistency
    double l_b_labeled = 0.0;  // balanced branch, labeled (balanced softmax)
    double l_b_con = 0.0;      // balanced branch, weighted consistency
    double total = 0.0;
};

struct LossWithGrad {
    double value = 0.0;
    std::vector<double> grad_logits;  // dL/dlogits for the differentiated head
};

// Balanced softmax: CE on logits shifted by +log(prior).
LossWithGrad balanced_softmax_loss(const std::vector<double>& logits_bal, std::size_t y,
                                   const ClassPrior& pi_labeled);

// Standard-branch labeled loss: CE on logits shifted by tau2 * (log pi - log pi_b).
LossWithGrad aligned_labeled_loss(const std::vector<double>& logits_std, std::size_t y,
                                  const ClassPrior& pi_labeled, const ClassPrior& pi_b,
                                  double tau2);

struct ConsistencyResult {
    double value = 0.0;
    std::vector<double> grad_logits_strong;  // pseudo-label side is detached
    bool masked_in = false;
    std::size_t q = 0;
};

// FixMatch consistency: pseudo-label from the weak view, CE on the strong view,
// gated by max-confidence >= rho.
ConsistencyResult standard_consistency(const std::vector<double>& logits_weak,
                                       const std::vector<double>& logits_strong, double rho);

// Pseudo-label correction: argmax_c [f_c - tau1 * log pi_s_c] plus the
// softmax of the corrected scores.
struct PlcResult {
    std::size_t q_tilde = 0;
    std::vector<double> p_plc;
};
PlcResult plc_pseudo_label(const std::vector<double>& logits_std_weak, const ClassPrior& pi_s,
                           double tau1);

// eta = max_c p_pre[c] * p_plc[c]; psi = gamma_t * eta
void overlap_weight(WeightedPseudoLabel& rec, double gamma_t);
double overlap_score(const std::vector<double>& p_pre, const std::vector<double>& p_plc);

// gamma_t = sum of max-confidences / sum of overlap scores; callers should
// handle the degenerate all-zero-eta batch by reusing the previous value.
struct GammaResult {
    double value = 1.0;
    bool degenerate = false;
};
GammaResult gamma_scale(const std::vector<double>& confidences, const std::vector<double>& etas);

// psi-weighted CE against the corrected pseudo-label; psi is detached.
LossWithGrad balanced_consistency(const std::vector<double>& logits_bal_strong,
                                  std::size_t q_tilde, double psi);

double total_loss(LossBreakdown& parts);

}  // namespace decon
