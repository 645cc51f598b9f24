#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include <cmath>

#include "decon/losses.hpp"
#include "decon/rng.hpp"

using namespace decon;

namespace {

// central finite differences on the logit gradient of a scalar loss
template <typename Fn>
void check_logit_gradient(const std::vector<double>& logits, const std::vector<double>& grad,
                          Fn value_at) {
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        auto lp = logits, lm = logits;
        lp[i] += h;
        lm[i] -= h;
        double fd = (value_at(lp) - value_at(lm)) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        CHECK(std::abs(fd - grad[i]) / denom < 1e-4);
    }
}

std::vector<double> random_logits(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& z : v) z = rng.normal(0.0, 2.0);
    return v;
}

}  // namespace

TEST_CASE("balanced softmax loss values") {
    // uniform prior collapses to plain cross-entropy
    std::vector<double> logits{1.0, -0.5, 0.3};
    auto uni = balanced_softmax_loss(logits, 0, ClassPrior::uniform(3));
    auto ref = -std::log(softmax(logits)[0]);
    CHECK(uni.value == doctest::Approx(ref).epsilon(1e-12));

    auto skew = balanced_softmax_loss({0.0, 0.0}, 1, ClassPrior({0.8, 0.2}));
    CHECK(skew.value == doctest::Approx(1.6094379124341003).epsilon(1e-9));
}

TEST_CASE("balanced softmax gradient") {
    Rng rng(17);
    for (int rep = 0; rep < 5; ++rep) {
        auto logits = random_logits(rng, 4);
        ClassPrior pi(rng.dirichlet(1.0, 4));
        std::size_t y = rng.index(4);
        auto res = balanced_softmax_loss(logits, y, pi);
        check_logit_gradient(logits, res.grad_logits, [&](const std::vector<double>& l) {
            return balanced_softmax_loss(l, y, pi).value;
        });
    }
}

TEST_CASE("aligned labeled loss values") {
    std::vector<double> logits{0.7, -0.2};
    ClassPrior pi({0.8, 0.2});
    // matching priors or tau2=0 reduce to plain cross-entropy
    auto same = aligned_labeled_loss(logits, 0, pi, pi, 2.0);
    auto zero_tau = aligned_labeled_loss(logits, 0, pi, ClassPrior({0.5, 0.5}), 0.0);
    auto plain = -std::log(softmax(logits)[0]);
    CHECK(same.value == doctest::Approx(plain).epsilon(1e-12));
    CHECK(zero_tau.value == doctest::Approx(plain).epsilon(1e-12));

    auto shifted = aligned_labeled_loss({0.0, 0.0}, 0, pi, ClassPrior({0.5, 0.5}), 1.0);
    CHECK(shifted.value == doctest::Approx(0.2231435513142097).epsilon(1e-9));
}

TEST_CASE("aligned labeled loss gradient") {
    Rng rng(23);
    for (int rep = 0; rep < 5; ++rep) {
        auto logits = random_logits(rng, 5);
        ClassPrior pi(rng.dirichlet(0.7, 5)), pi_b(rng.dirichlet(1.3, 5));
        std::size_t y = rng.index(5);
        double tau2 = rng.uniform(0.0, 3.0);
        auto res = aligned_labeled_loss(logits, y, pi, pi_b, tau2);
        check_logit_gradient(logits, res.grad_logits, [&](const std::vector<double>& l) {
            return aligned_labeled_loss(l, y, pi, pi_b, tau2).value;
        });
    }
}

TEST_CASE("standard consistency masking") {
    // confident weak view (softmax max > 0.95) passes the gate
    std::vector<double> confident{6.0, 0.0, 0.0};
    auto in = standard_consistency(confident, {0.5, 0.2, -0.1}, 0.95);
    CHECK(in.masked_in);
    CHECK(in.q == 0);
    CHECK(in.value > 0.0);

    std::vector<double> unsure{0.1, 0.0, -0.1};
    auto out = standard_consistency(unsure, {0.5, 0.2, -0.1}, 0.95);
    CHECK_FALSE(out.masked_in);
    CHECK(out.value == 0.0);
    for (double g : out.grad_logits_strong) CHECK(g == 0.0);

    // perfect agreement with near-one-hot strong logits drives the loss to ~0
    std::vector<double> sharp{30.0, 0.0, 0.0};
    auto agree = standard_consistency(sharp, sharp, 0.95);
    CHECK(agree.value < 1e-9);
}

TEST_CASE("standard consistency gradient (strong side only)") {
    Rng rng(31);
    int checked = 0;
    while (checked < 5) {
        auto weak = random_logits(rng, 4);
        for (auto& z : weak) z *= 3.0;  // sharpen so the mask passes sometimes
        auto strong = random_logits(rng, 4);
        auto res = standard_consistency(weak, strong, 0.95);
        if (!res.masked_in) continue;
        check_logit_gradient(strong, res.grad_logits_strong, [&](const std::vector<double>& l) {
            return standard_consistency(weak, l, 0.95).value;
        });
        ++checked;
    }
}

TEST_CASE("plc pseudo-label correction") {
    // tau1=0: no correction
    std::vector<double> logits{2.0, 1.0, 0.5};
    ClassPrior pi_s({0.6, 0.3, 0.1});
    auto raw = plc_pseudo_label(logits, pi_s, 0.0);
    CHECK(raw.q_tilde == 0);

    // uniform prior: constant shift, argmax unchanged
    auto uni = plc_pseudo_label(logits, ClassPrior::uniform(3), 1.7);
    CHECK(uni.q_tilde == 0);

    // worked example: p_pre = [0.6, 0.4], prior [0.8, 0.2], tau1 = 1
    std::vector<double> two{std::log(0.6), std::log(0.4)};
    auto res = plc_pseudo_label(two, ClassPrior({0.8, 0.2}), 1.0);
    CHECK(res.q_tilde == 1);
    CHECK(res.p_plc[0] == doctest::Approx(0.2727272727272727).epsilon(1e-9));
    CHECK(res.p_plc[1] == doctest::Approx(0.7272727272727273).epsilon(1e-9));
}

TEST_CASE("overlap score and weight") {
    CHECK(overlap_score({1.0, 0.0}, {1.0, 0.0}) == doctest::Approx(1.0));

    std::vector<double> p_pre{0.6, 0.4};
    std::vector<double> p_plc{0.2727272727272727, 0.7272727272727273};
    double eta = overlap_score(p_pre, p_plc);
    CHECK(eta == doctest::Approx(0.29090909090909095).epsilon(1e-9));
    // disagreeing argmaxes: eta bounded by 1 - min of the two max confidences
    CHECK(eta <= 1.0 - std::min(0.6, 0.7272727272727273) + 1e-12);

    WeightedPseudoLabel rec;
    rec.p_pre = p_pre;
    rec.p_plc = p_plc;
    overlap_weight(rec, 2.0);
    CHECK(rec.eta == doctest::Approx(eta));
    CHECK(rec.psi == doctest::Approx(2.0 * eta));
}

TEST_CASE("gamma scale") {
    auto unitary = gamma_scale({1.0, 1.0}, {1.0, 1.0});
    CHECK_FALSE(unitary.degenerate);
    CHECK(unitary.value == doctest::Approx(1.0));

    auto worked = gamma_scale({0.9, 0.8}, {0.5, 0.4});
    CHECK(worked.value == doctest::Approx(1.8888888888888888).epsilon(1e-12));

    auto degenerate = gamma_scale({0.9, 0.8}, {0.0, 0.0});
    CHECK(degenerate.degenerate);

    CHECK_THROWS_AS(gamma_scale({0.9}, {0.5, 0.4}), std::invalid_argument);
}

TEST_CASE("balanced consistency scaling and gradient") {
    std::vector<double> logits{0.4, -1.0, 0.2};
    auto zero = balanced_consistency(logits, 1, 0.0);
    CHECK(zero.value == 0.0);
    for (double g : zero.grad_logits) CHECK(g == 0.0);

    auto one = balanced_consistency(logits, 1, 1.0);
    CHECK(one.value == doctest::Approx(-std::log(softmax(logits)[1])).epsilon(1e-12));
    auto two = balanced_consistency(logits, 1, 2.0);
    CHECK(two.value == doctest::Approx(2.0 * one.value).epsilon(1e-12));

    Rng rng(41);
    for (int rep = 0; rep < 5; ++rep) {
        auto l = random_logits(rng, 4);
        std::size_t q = rng.index(4);
        double psi = rng.uniform(0.0, 3.0);
        auto res = balanced_consistency(l, q, psi);
        check_logit_gradient(l, res.grad_logits, [&](const std::vector<double>& v) {
            return balanced_consistency(v, q, psi).value;
        });
    }
}

TEST_CASE("total loss sums the four terms") {
    LossBreakdown parts;
    parts.l_labeled = 1.0;
    parts.l_con = 2.0;
    parts.l_b_labeled = 3.0;
    parts.l_b_con = 4.0;
    CHECK(total_loss(parts) == doctest::Approx(10.0));
    CHECK(parts.total == doctest::Approx(10.0));

    LossBreakdown zeros;
    CHECK(total_loss(zeros) == 0.0);

    LossBreakdown bad;
    bad.l_con = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(total_loss(bad), std::invalid_argument);
}

TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    CHECK_NOTHROW(hp.validate());
    hp.rho = 1.5;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.m = 1.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}
