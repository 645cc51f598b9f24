#include "decon/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace decon {

void Hyperparams::validate() const {
    if (tau1 < 0.0 || tau2 < 0.0 || tau3 < 0.0) throw std::invalid_argument("Hyperparams: negative tau");
    if (rho <= 0.0 || rho > 1.0) throw std::invalid_argument("Hyperparams: rho outside (0,1]");
    if (m < 0.0 || m >= 1.0) throw std::invalid_argument("Hyperparams: m outside [0,1)");
    if (batch_b < 1) throw std::invalid_argument("Hyperparams: batch_b < 1");
    if (mu <= 0.0) throw std::invalid_argument("Hyperparams: mu <= 0");
}

namespace {

// CE on shifted logits; gradient w.r.t. the raw logits is
// softmax(logits + shift) - onehot(y).
LossWithGrad shifted_ce(const std::vector<double>& logits, const std::vector<double>& shift,
                        std::size_t y) {
    if (y >= logits.size()) throw std::invalid_argument("loss: label out of range");
    std::vector<double> adjusted(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) adjusted[c] = logits[c] + shift[c];
    std::vector<double> p = softmax(adjusted);
    LossWithGrad out;
    out.value = -std::log(p[y]);
    out.grad_logits = std::move(p);
    out.grad_logits[y] -= 1.0;
    return out;
}

}  // namespace

LossWithGrad balanced_softmax_loss(const std::vector<double>& logits_bal, std::size_t y,
                                   const ClassPrior& pi_labeled) {
    return shifted_ce(logits_bal, pi_labeled.log(), y);
}

LossWithGrad aligned_labeled_loss(const std::vector<double>& logits_std, std::size_t y,
                                  const ClassPrior& pi_labeled, const ClassPrior& pi_b,
                                  double tau2) {
    auto log_pi = pi_labeled.log();
    auto log_pi_b = pi_b.log();
    std::vector<double> shift(log_pi.size());
    for (std::size_t c = 0; c < shift.size(); ++c) shift[c] = tau2 * (log_pi[c] - log_pi_b[c]);
    return shifted_ce(logits_std, shift, y);
}

ConsistencyResult standard_consistency(const std::vector<double>& logits_weak,
                                       const std::vector<double>& logits_strong, double rho) {
    std::vector<double> p_weak = softmax(logits_weak);
    ConsistencyResult res;
    res.q = argmax(p_weak);
    res.masked_in = p_weak[res.q] >= rho;
    res.grad_logits_strong.assign(logits_strong.size(), 0.0);
    if (!res.masked_in) return res;
    auto ce = shifted_ce(logits_strong, std::vector<double>(logits_strong.size(), 0.0), res.q);
    res.value = ce.value;
    res.grad_logits_strong = std::move(ce.grad_logits);
    return res;
}

PlcResult plc_pseudo_label(const std::vector<double>& logits_std_weak, const ClassPrior& pi_s,
                           double tau1) {
    auto log_pi = pi_s.log();
    std::vector<double> adjusted(logits_std_weak.size());
    for (std::size_t c = 0; c < adjusted.size(); ++c)
        adjusted[c] = logits_std_weak[c] - tau1 * log_pi[c];
    PlcResult res;
    res.q_tilde = argmax(adjusted);
    res.p_plc = softmax(adjusted);
    return res;
}

double overlap_score(const std::vector<double>& p_pre, const std::vector<double>& p_plc) {
    if (p_pre.size() != p_plc.size()) throw std::invalid_argument("overlap_score: size mismatch");
    double eta = 0.0;
    for (std::size_t c = 0; c < p_pre.size(); ++c) eta = std::max(eta, p_pre[c] * p_plc[c]);
    return eta;
}

void overlap_weight(WeightedPseudoLabel& rec, double gamma_t) {
    if (gamma_t < 0.0) throw std::invalid_argument("overlap_weight: gamma_t < 0");
    rec.eta = overlap_score(rec.p_pre, rec.p_plc);
    rec.psi = gamma_t * rec.eta;
}

GammaResult gamma_scale(const std::vector<double>& confidences, const std::vector<double>& etas) {
    if (confidences.size() != etas.size() || confidences.empty())
        throw std::invalid_argument("gamma_scale: bad input lengths");
    double conf_sum = 0.0, eta_sum = 0.0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
        conf_sum += confidences[i];
        eta_sum += etas[i];
    }
    GammaResult res;
    if (eta_sum <= 0.0) {
        res.degenerate = true;
        return res;
    }
    res.value = conf_sum / eta_sum;
    return res;
}

LossWithGrad balanced_consistency(const std::vector<double>& logits_bal_strong,
                                  std::size_t q_tilde, double psi) {
    if (psi < 0.0) throw std::invalid_argument("balanced_consistency: psi < 0");
    LossWithGrad out;
    out.grad_logits.assign(logits_bal_strong.size(), 0.0);
    if (psi == 0.0) return out;
    auto ce = shifted_ce(logits_bal_strong, std::vector<double>(logits_bal_strong.size(), 0.0), q_tilde);
    out.value = psi * ce.value;
    for (std::size_t c = 0; c < out.grad_logits.size(); ++c)
        out.grad_logits[c] = psi * ce.grad_logits[c];
    return out;
}

double total_loss(LossBreakdown& parts) {
    double t = parts.l_labeled + parts.l_con + parts.l_b_labeled + parts.l_b_con;
    if (!std::isfinite(t)) throw std::invalid_argument("total_loss: non-finite part");
    parts.total = t;
    return t;
}

}  // namespace decon
