#include "decon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace decon {

using nlohmann::json;

double pseudo_label_accuracy(const std::vector<std::size_t>& q_tilde,
                             const std::vector<std::size_t>& truth) {
    if (q_tilde.size() != truth.size() || q_tilde.empty())
        throw std::invalid_argument("pseudo_label_accuracy: length mismatch or empty");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < q_tilde.size(); ++i)
        if (q_tilde[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(q_tilde.size());
}

double kl_divergence(const ClassPrior& p, const ClassPrior& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) kl += p[c] * std::log(p[c] / q[c]);
    return std::max(kl, 0.0);
}

PsiGapResult psi_gap(const std::vector<double>& weights, const std::vector<bool>& correct_mask) {
    if (weights.size() != correct_mask.size() || weights.empty())
        throw std::invalid_argument("psi_gap: length mismatch or empty");
    double sum_pos = 0.0, sum_neg = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (correct_mask[i]) {
            sum_pos += weights[i];
            ++n_pos;
        } else {
            sum_neg += weights[i];
            ++n_neg;
        }
    }
    PsiGapResult res;
    if (n_pos == 0 && n_neg == 0) throw std::invalid_argument("psi_gap: both groups empty");
    if (n_pos == 0) {
        res.value = -sum_neg / static_cast<double>(n_neg);
        res.degenerate = true;
    } else if (n_neg == 0) {
        res.value = sum_pos / static_cast<double>(n_pos);
        res.degenerate = true;
    } else {
        res.value = sum_pos / static_cast<double>(n_pos) - sum_neg / static_cast<double>(n_neg);
    }
    return res;
}

EvalReport classification_report(const std::vector<std::size_t>& predicted,
                                 const std::vector<std::size_t>& truth,
                                 std::size_t num_classes,
                                 const std::vector<int>& labeled_counts) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw std::invalid_argument("classification_report: length mismatch or empty");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] >= num_classes || truth[i] >= num_classes)
            throw std::invalid_argument("classification_report: label out of range");
        if (predicted[i] == truth[i]) {
            ++tp[predicted[i]];
            ++hits;
        } else {
            ++fp[predicted[i]];
            ++fn[truth[i]];
        }
    }
    EvalReport rep;
    rep.accuracy = static_cast<double>(hits) / static_cast<double>(predicted.size());
    rep.per_class_precision.resize(num_classes);
    rep.per_class_recall.resize(num_classes);
    rep.per_class_f1.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        double p_den = static_cast<double>(tp[c] + fp[c]);
        double r_den = static_cast<double>(tp[c] + fn[c]);
        double p = p_den > 0.0 ? tp[c] / p_den : 0.0;
        double r = r_den > 0.0 ? tp[c] / r_den : 0.0;
        rep.per_class_precision[c] = p;
        rep.per_class_recall[c] = r;
        rep.per_class_f1[c] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }

    // head/tail groups from labeled counts: thirds of the class list
    std::vector<std::size_t> order(num_classes);
    std::iota(order.begin(), order.end(), 0);
    if (labeled_counts.size() == num_classes)
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return labeled_counts[a] > labeled_counts[b];
        });
    std::size_t group = (num_classes + 2) / 3;
    auto aggregate = [&](std::size_t begin, std::size_t end) {
        GroupMetrics g;
        std::size_t gtp = 0, gfp = 0, gfn = 0;
        for (std::size_t k = begin; k < end; ++k) {
            gtp += tp[order[k]];
            gfp += fp[order[k]];
            gfn += fn[order[k]];
        }
        double p_den = static_cast<double>(gtp + gfp);
        double r_den = static_cast<double>(gtp + gfn);
        g.precision = p_den > 0.0 ? gtp / p_den : 0.0;
        g.recall = r_den > 0.0 ? gtp / r_den : 0.0;
        g.f1 = (g.precision + g.recall) > 0.0
                   ? 2.0 * g.precision * g.recall / (g.precision + g.recall)
                   : 0.0;
        return g;
    };
    rep.head_group = aggregate(0, group);
    rep.tail_group = aggregate(num_classes - group, num_classes);
    return rep;
}

std::string EvalReport::to_json() const {
    json j;
    j["accuracy"] = accuracy;
    j["per_class_precision"] = per_class_precision;
    j["per_class_recall"] = per_class_recall;
    j["per_class_f1"] = per_class_f1;
    j["head_group"] = {{"precision", head_group.precision}, {"recall", head_group.recall}, {"f1", head_group.f1}};
    j["tail_group"] = {{"precision", tail_group.precision}, {"recall", tail_group.recall}, {"f1", tail_group.f1}};
    j["pseudo_acc"] = pseudo_acc;
    j["branch_kl"] = branch_kl;
    j["prior_kl"] = prior_kl;
    j["psi_gap"] = psi_gap;
    j["psi_gap_degenerate"] = psi_gap_degenerate;
    return j.dump(2);
}

}  // namespace decon
