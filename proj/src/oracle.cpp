#include "decon/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "decon/inference.hpp"
#include "decon/losses.hpp"
#include "decon/priorest.hpp"
#include "decon/rng.hpp"

namespace decon {

using nlohmann::json;

std::vector<double> log_class_conditional(const GaussianMixture& mix, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != mix.dim) throw std::invalid_argument("log_class_conditional: dim mismatch");
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    std::vector<double> out(mix.num_classes);
    for (int c = 0; c < mix.num_classes; ++c) {
        double acc = 0.0;
        for (int i = 0; i < mix.dim; ++i) {
            double v = mix.diag_vars[c][i];
            double d = x[i] - mix.means[c][i];
            acc += kLog2Pi + std::log(v) + d * d / v;
        }
        out[c] = -0.5 * acc;
    }
    return out;
}

std::size_t bayes_predict(const BayesOracle& oracle, const std::vector<double>& x) {
    auto scores = log_class_conditional(oracle.mixture, x);
    auto log_pi = oracle.prior.log();
    for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += log_pi[c];
    return argmax(scores);
}

double bayes_accuracy_mc(const BayesOracle& oracle, const ClassPrior& sampling_prior,
                         std::size_t num_samples, std::uint64_t seed) {
    Rng rng(substream_seed(seed, "bayes-mc"));
    std::size_t hits = 0;
    std::vector<double> x(static_cast<std::size_t>(oracle.mixture.dim));
    for (std::size_t n = 0; n < num_samples; ++n) {
        double u = rng.uniform();
        double acc = 0.0;
        int y = oracle.mixture.num_classes - 1;
        for (int c = 0; c < oracle.mixture.num_classes; ++c) {
            acc += sampling_prior[static_cast<std::size_t>(c)];
            if (u < acc) { y = c; break; }
        }
        for (int i = 0; i < oracle.mixture.dim; ++i)
            x[static_cast<std::size_t>(i)] =
                rng.normal(oracle.mixture.means[y][i], std::sqrt(oracle.mixture.diag_vars[y][i]));
        if (bayes_predict(oracle, x) == static_cast<std::size_t>(y)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(num_samples);
}

std::vector<double> decoupled_logits(const GaussianMixture& mix, const std::vector<double>& x,
                                     double offset) {
    auto out = log_class_conditional(mix, x);
    for (auto& v : out) v += offset;
    return out;
}

ConcentrationReport verify_prior_concentration(const GaussianMixture& mix, const ClassPrior& pi_u,
                                               std::size_t M, std::size_t trials, double nu,
                                               std::uint64_t seed) {
    if (M < 1 || trials < 1) throw std::invalid_argument("verify_prior_concentration: M and trials must be >= 1");
    if (nu <= 0.0 || nu >= 1.0) throw std::invalid_argument("verify_prior_concentration: nu outside (0,1)");
    const std::size_t C = pi_u.size();
    Rng rng(substream_seed(seed, "concentration"));

    auto draw_sample = [&](std::vector<double>& x) {
        double u = rng.uniform();
        double acc = 0.0;
        int y = mix.num_classes - 1;
        for (int c = 0; c < mix.num_classes; ++c) {
            acc += pi_u[static_cast<std::size_t>(c)];
            if (u < acc) { y = c; break; }
        }
        for (int i = 0; i < mix.dim; ++i)
            x[static_cast<std::size_t>(i)] = rng.normal(mix.means[y][i], std::sqrt(mix.diag_vars[y][i]));
    };
    auto prediction_mean = [&](std::size_t n) {
        std::vector<double> mean(C, 0.0);
        std::vector<double> x(static_cast<std::size_t>(mix.dim));
        for (std::size_t k = 0; k < n; ++k) {
            draw_sample(x);
            auto p = softmax(decoupled_logits(mix, x, 0.0));
            for (std::size_t c = 0; c < C; ++c) mean[c] += p[c];
        }
        for (auto& v : mean) v /= static_cast<double>(n);
        return mean;
    };

    // model-induced bias from one large-sample run
    auto pi_pred = prediction_mean(100000);
    double bias = 0.0;
    for (std::size_t c = 0; c < C; ++c) bias += std::fabs(pi_pred[c] - pi_u[c]);

    const double bound = bias + 2.0 * std::sqrt(static_cast<double>(C) / static_cast<double>(M)) +
                         std::sqrt(2.0 * std::log(1.0 / nu) / static_cast<double>(M));

    ConcentrationReport rep;
    rep.trials = trials;
    rep.bias = bias;
    rep.required_fraction = 1.0 - nu;
    for (std::size_t t = 0; t < trials; ++t) {
        auto pi_hat = prediction_mean(M);
        double dev = 0.0;
        for (std::size_t c = 0; c < C; ++c) dev += std::fabs(pi_hat[c] - pi_u[c]);
        if (dev <= bound) ++rep.within_bound;
    }
    rep.pass_fraction = static_cast<double>(rep.within_bound) / static_cast<double>(trials);
    rep.passed = rep.pass_fraction >= rep.required_fraction;
    return rep;
}

namespace {

std::vector<double> random_logits(Rng& rng, std::size_t C, double scale = 4.0) {
    std::vector<double> z(C);
    for (auto& v : z) v = rng.uniform(-scale, scale);
    return z;
}

ClassPrior random_prior(Rng& rng, std::size_t C) {
    return ClassPrior(rng.dirichlet(1.0, C));
}

std::size_t random_num_classes(Rng& rng) { return 2 + rng.index(7); }

// ---- individual lemma checks -------------------------------------------

LemmaResult check_ema_closed_form(Rng& rng) {
    LemmaResult res{"ema_closed_form",
                    "EMA value after t updates equals m^t * pi0 + (1-m) * sum_k m^(t-1-k) * mean_k",
                    0, 0, 0.0};
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t C = random_num_classes(rng);
        double m = 0.8 + 0.19 * rng.uniform();
        EmaPrior prior(C, m);
        ClassPrior pi0 = prior.value();
        int T = 50 + static_cast<int>(rng.index(150));
        std::vector<ClassPrior> drive;
        for (int t = 0; t < T; ++t) {
            drive.push_back(random_prior(rng, C));
            prior.update(drive.back());
        }
        std::vector<double> closed(C);
        for (std::size_t c = 0; c < C; ++c) closed[c] = std::pow(m, T) * pi0[c];
        for (int k = 0; k < T; ++k)
            for (std::size_t c = 0; c < C; ++c)
                closed[c] += (1.0 - m) * std::pow(m, T - 1 - k) * drive[static_cast<std::size_t>(k)][c];
        double err = 0.0;
        for (std::size_t c = 0; c < C; ++c) err += std::fabs(closed[c] - prior.value()[c]);
        ++res.trials;
        res.worst_violation = std::max(res.worst_violation, err);
        if (err > 1e-10) ++res.failures;
    }
    return res;
}

LemmaResult check_ema_step_bound(Rng& rng) {
    LemmaResult res{"ema_step_bound", "each EMA update moves the value by at most 2(1-m) in l1",
                    0, 0, 0.0};
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t C = random_num_classes(rng);
        double m = 0.5 + 0.49 * rng.uniform();
        EmaPrior prior(C, m);
        for (int t = 0; t < 100; ++t) {
            ClassPrior before = prior.value();
            prior.update(random_prior(rng, C));
            double step = before.l1_distance(prior.value());
            double excess = step - 2.0 * (1.0 - m);
            ++res.trials;
            res.worst_violation = std::max(res.worst_violation, excess);
            if (excess > 1e-12) ++res.failures;
        }
    }
    return res;
}

LemmaResult check_ema_tracking_bound(Rng& rng) {
    LemmaResult res{"ema_tracking_bound",
                    "||pi_t - mean_t||_1 <= m^t ||e0||_1 + sum_k m^(t-k) ||mean_k - mean_(k-1)||_1",
                    0, 0, 0.0};
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t C = random_num_classes(rng);
        double m = 0.8 + 0.19 * rng.uniform();
        EmaPrior prior(C, m);
        int T = 100;
        std::vector<ClassPrior> drive;
        std::vector<ClassPrior> values;
        for (int t = 0; t < T; ++t) {
            drive.push_back(random_prior(rng, C));
            prior.update(drive.back());
            values.push_back(prior.value());
        }
        // e_t with the update convention pi_{t+1} = m pi_t + (1-m) mean_t:
        // compare pi after t+1 updates against mean_t's successor.
        double e0 = 0.0;
        for (std::size_t c = 0; c < C; ++c) e0 += std::fabs(prior.initial()[c] - drive[0][c]);
        double drift_sum = 0.0;
        for (int t = 1; t < T; ++t) {
            drift_sum = m * drift_sum + drive[static_cast<std::size_t>(t)].l1_distance(drive[static_cast<std::size_t>(t - 1)]);
            double lhs = values[static_cast<std::size_t>(t - 1)].l1_distance(drive[static_cast<std::size_t>(t)]);
            double rhs = std::pow(m, t) * e0 + drift_sum;
            ++res.trials;
            double excess = lhs - rhs;
            res.worst_violation = std::max(res.worst_violation, excess);
            if (excess > 1e-10) ++res.failures;
        }
    }
    return res;
}

LemmaResult check_ema_convergent_drive(Rng& rng) {
    LemmaResult res{"ema_convergent_drive",
                    "with a convergent drive sequence the EMA value converges to its limit",
                    0, 0, 0.0};
    for (int rep = 0; rep < 5; ++rep) {
        std::size_t C = random_num_classes(rng);
        double m = 0.9;
        EmaPrior prior(C, m);
        ClassPrior limit = random_prior(rng, C);
        int T = 400;
        for (int t = 0; t < T; ++t) {
            std::vector<double> p(C);
            double decay = std::exp(-0.05 * t);
            for (std::size_t c = 0; c < C; ++c)
                p[c] = limit[c] + decay * 0.3 * (rng.uniform() - 0.5);
            for (auto& v : p) v = std::max(v, 1e-6);
            prior.update(ClassPrior(p));
            // simplex preservation on every step
            double sum = 0.0;
            bool positive = true;
            for (std::size_t c = 0; c < C; ++c) {
                sum += prior.value()[c];
                positive = positive && prior.value()[c] > 0.0;
            }
            if (std::fabs(sum - 1.0) > 1e-12 || !positive) ++res.failures;
        }
        double err = prior.value().l1_distance(limit);
        ++res.trials;
        res.worst_violation = std::max(res.worst_violation, err - 1e-3);
        if (err >= 1e-3) ++res.failures;
    }
    return res;
}

LemmaResult check_plc_argmax_equivalence(Rng& rng) {
    LemmaResult res{"plc_argmax_equivalence",
                    "argmax of the corrected probability form equals argmax of the corrected logits",
                    0, 0, 0.0};
    for (int rep = 0; rep < 1000; ++rep) {
        std::size_t C = random_num_classes(rng);
        auto logits = random_logits(rng, C);
        ClassPrior pi_s = random_prior(rng, C);
        double tau1 = 2.0 * rng.uniform();
        auto plc = plc_pseudo_label(logits, pi_s, tau1);
        // probability form: p_pre[c] * pi_s[c]^(-tau1), brute-force argmax
        auto p_pre = softmax(logits);
        std::vector<double> prob_form(C);
        for (std::size_t c = 0; c < C; ++c) prob_form[c] = p_pre[c] * std::pow(pi_s[c], -tau1);
        ++res.trials;
        if (argmax(prob_form) != plc.q_tilde) {
            ++res.failures;
            res.worst_violation = 1.0;
        }
    }
    return res;
}

double maybe_corrupt_eta(double eta, bool corrupt) { return corrupt ? eta + 0.25 : eta; }

LemmaResult check_eta_gating(Rng& rng, bool corrupt) {
    LemmaResult res{"eta_gating",
                    "eta <= max(p_pre) * max(p_plc), with equality when the unique argmaxes agree",
                    0, 0, 0.0};
    int agreements = 0;
    for (int rep = 0; rep < 1000 || agreements < 50; ++rep) {
        std::size_t C = random_num_classes(rng);
        auto logits = random_logits(rng, C);
        // every 4th case uses a uniform prior so the argmaxes must agree
        bool force_agree = rep % 4 == 0;
        ClassPrior pi_s = force_agree ? ClassPrior::uniform(C) : random_prior(rng, C);
        double tau1 = 2.0 * rng.uniform();
        auto p_pre = softmax(logits);
        auto plc = plc_pseudo_label(logits, pi_s, tau1);
        double eta = maybe_corrupt_eta(overlap_score(p_pre, plc.p_plc), corrupt);
        double a_pre = *std::max_element(p_pre.begin(), p_pre.end());
        double a_plc = *std::max_element(plc.p_plc.begin(), plc.p_plc.end());
        ++res.trials;
        double excess = eta - a_pre * a_plc;
        res.worst_violation = std::max(res.worst_violation, excess);
        if (excess > 1e-12) ++res.failures;
        if (argmax(p_pre) == plc.q_tilde) {
            ++agreements;
            double diff = std::fabs(eta - a_pre * a_plc);
            if (diff > 1e-12) {
                ++res.failures;
                res.worst_violation = std::max(res.worst_violation, diff);
            }
        }
        if (rep > 100000) break;  // mutation-corrupted runs must still terminate
    }
    return res;
}

LemmaResult check_eta_disagreement(Rng& rng) {
    LemmaResult res{"eta_disagreement",
                    "when the argmaxes differ, eta <= 1 - min(max(p_pre), max(p_plc))",
                    0, 0, 0.0};
    while (res.trials < 1000) {
        std::size_t C = random_num_classes(rng);
        auto logits = random_logits(rng, C, 2.0);
        // skewed prior with a large tau makes disagreement common
        ClassPrior pi_s = random_prior(rng, C);
        double tau1 = 0.5 + 2.5 * rng.uniform();
        auto p_pre = softmax(logits);
        auto plc = plc_pseudo_label(logits, pi_s, tau1);
        if (argmax(p_pre) == plc.q_tilde) continue;
        double eta = overlap_score(p_pre, plc.p_plc);
        double a_pre = *std::max_element(p_pre.begin(), p_pre.end());
        double a_plc = *std::max_element(plc.p_plc.begin(), plc.p_plc.end());
        ++res.trials;
        double excess = eta - (1.0 - std::min(a_pre, a_plc));
        res.worst_violation = std::max(res.worst_violation, excess);
        if (excess > 1e-12) ++res.failures;
    }
    return res;
}

LemmaResult check_posthoc_probability_form(Rng& rng) {
    LemmaResult res{"posthoc_probability_form",
                    "softmax of adjusted logits equals the prior-power-reweighted softmax",
                    0, 0, 0.0};
    for (int rep = 0; rep < 1000; ++rep) {
        std::size_t C = random_num_classes(rng);
        auto logits = random_logits(rng, C);
        ClassPrior pi_b = random_prior(rng, C);
        double tau3 = 2.0 * rng.uniform();
        auto path_a = adjusted_probs(logits, pi_b, tau3);
        auto p = softmax(logits);
        std::vector<double> path_b(C);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            path_b[c] = p[c] * std::pow(pi_b[c], -tau3);
            z += path_b[c];
        }
        for (auto& v : path_b) v /= z;
        double err = 0.0;
        for (std::size_t c = 0; c < C; ++c) err = std::max(err, std::fabs(path_a[c] - path_b[c]));
        ++res.trials;
        res.worst_violation = std::max(res.worst_violation, err);
        if (err > 1e-12) ++res.failures;
    }
    return res;
}

LemmaResult margin_fuzz(Rng& rng, const std::string& name, bool dda_variant) {
    LemmaResult res{name,
                    dda_variant
                        ? "margin > 2*tau2*||log prior gap||_inf implies the aligned argmax cannot flip"
                        : "margin > 2*tau3*||log prior gap||_inf implies the adjusted argmax cannot flip",
                    0, 0, 0.0};
    for (int rep = 0; rep < 10000; ++rep) {
        std::size_t C = random_num_classes(rng);
        auto logits = random_logits(rng, C);
        ClassPrior prior_a = random_prior(rng, C);
        ClassPrior prior_b = random_prior(rng, C);
        double tau = 2.0 * rng.uniform();
        if (dda_variant) {
            // aligned scores: log softmax(f) + tau2 * (log pi_l - log pi);
            // fold the pi_l term into the logits and reuse the margin check
            ClassPrior pi_l = random_prior(rng, C);
            auto p = softmax(logits);
            auto log_pi_l = pi_l.log();
            for (std::size_t c = 0; c < C; ++c) logits[c] = std::log(p[c]) + tau * log_pi_l[c];
        }
        auto rep_out = margin_robustness_check(logits, prior_a, prior_b, tau);
        ++res.trials;
        if (rep_out.premise_held && !rep_out.conclusion_held) {
            ++res.failures;
            res.worst_violation = std::max(res.worst_violation, rep_out.margin);
        }
    }
    return res;
}

}  // namespace

bool LemmaSuiteReport::all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const LemmaResult& r) { return r.passed(); });
}

std::string LemmaSuiteReport::to_json() const {
    json arr = json::array();
    for (const auto& r : results) {
        arr.push_back({{"lemma_name", r.name},
                       {"property", r.property},
                       {"trials", r.trials},
                       {"failures", r.failures},
                       {"worst_violation", r.worst_violation},
                       {"passed", r.passed()}});
    }
    json j;
    j["results"] = arr;
    j["all_passed"] = all_passed();
    return j.dump(2);
}

LemmaSuiteReport run_lemma_suite(const LemmaSuiteOptions& options) {
    Rng rng(substream_seed(options.seed, "lemma-suite"));
    LemmaSuiteReport report;
    report.results.push_back(check_ema_closed_form(rng));
    report.results.push_back(check_ema_step_bound(rng));
    report.results.push_back(check_ema_tracking_bound(rng));
    report.results.push_back(check_ema_convergent_drive(rng));
    report.results.push_back(check_plc_argmax_equivalence(rng));
    report.results.push_back(check_eta_gating(rng, options.corrupt_eta));
    report.results.push_back(check_eta_disagreement(rng));
    report.results.push_back(check_posthoc_probability_form(rng));
    report.results.push_back(margin_fuzz(rng, "posthoc_margin_robustness", false));
    report.results.push_back(margin_fuzz(rng, "alignment_margin_robustness", true));
    return report;
}

}  // namespace decon
