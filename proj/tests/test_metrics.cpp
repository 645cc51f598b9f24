#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include <cmath>

#include "decon/metrics.hpp"

using namespace decon;

TEST_CASE("pseudo label accuracy") {
    CHECK(pseudo_label_accuracy({0, 1, 2}, {0, 1, 2}) == doctest::Approx(1.0));
    CHECK(pseudo_label_accuracy({0, 0}, {1, 1}) == doctest::Approx(0.0));
    CHECK(pseudo_label_accuracy({0, 1, 1, 0}, {0, 1, 0, 0}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(pseudo_label_accuracy({0}, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(pseudo_label_accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("kl divergence") {
    ClassPrior p({0.75, 0.25}), q({0.5, 0.5});
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.13081203594113697).epsilon(1e-9));
    CHECK(kl_divergence(p, q) != doctest::Approx(kl_divergence(q, p)));
    CHECK(kl_divergence(q, p) >= 0.0);
}

TEST_CASE("psi gap") {
    auto r = psi_gap({0.8, 0.6, 0.2}, {true, true, false});
    CHECK_FALSE(r.degenerate);
    CHECK(r.value == doctest::Approx(0.5));

    auto flat = psi_gap({0.4, 0.4, 0.4, 0.4}, {true, false, true, false});
    CHECK(flat.value == doctest::Approx(0.0));

    auto all_correct = psi_gap({0.3, 0.5}, {true, true});
    CHECK(all_correct.degenerate);
    CHECK(all_correct.value == doctest::Approx(0.4));

    CHECK_THROWS_AS(psi_gap({}, {}), std::invalid_argument);
}

TEST_CASE("classification report on a perfect classifier") {
    std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2};
    auto rep = classification_report(truth, truth, 3, {10, 5, 1});
    CHECK(rep.accuracy == doctest::Approx(1.0));
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(rep.per_class_f1[c] == doctest::Approx(1.0));
        CHECK(rep.per_class_recall[c] == doctest::Approx(1.0));
    }
    CHECK(rep.head_group.f1 == doctest::Approx(1.0));
    CHECK(rep.tail_group.f1 == doctest::Approx(1.0));
}

TEST_CASE("constant predictor on a balanced test set") {
    std::vector<std::size_t> truth{0, 1, 2, 3, 0, 1, 2, 3};
    std::vector<std::size_t> pred(truth.size(), 0);
    auto rep = classification_report(pred, truth, 4, {8, 6, 4, 2});
    CHECK(rep.accuracy == doctest::Approx(0.25));
    CHECK(rep.per_class_recall[0] == doctest::Approx(1.0));
    for (std::size_t c = 1; c < 4; ++c) CHECK(rep.per_class_recall[c] == doctest::Approx(0.0));
    CHECK(rep.per_class_precision[0] == doctest::Approx(0.25));
}

TEST_CASE("micro recall over a balanced test set equals accuracy") {
    std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2};
    std::vector<std::size_t> pred{0, 1, 1, 2, 2, 2};
    auto rep = classification_report(pred, truth, 3, {3, 2, 1});
    double mean_recall = 0.0;
    for (double r : rep.per_class_recall) mean_recall += r / 3.0;
    CHECK(mean_recall == doctest::Approx(rep.accuracy).epsilon(1e-12));
}

TEST_CASE("report is invariant to sample ordering") {
    std::vector<std::size_t> truth{0, 1, 2, 0, 1, 2};
    std::vector<std::size_t> pred{0, 2, 2, 1, 1, 0};
    auto a = classification_report(pred, truth, 3, {5, 3, 1});
    std::vector<std::size_t> truth2{2, 0, 1, 2, 1, 0};
    std::vector<std::size_t> pred2{2, 0, 1, 0, 2, 1};  // same (pred, truth) pairs shuffled
    auto b = classification_report(pred2, truth2, 3, {5, 3, 1});
    CHECK(a.accuracy == doctest::Approx(b.accuracy));
    for (std::size_t c = 0; c < 3; ++c) CHECK(a.per_class_f1[c] == doctest::Approx(b.per_class_f1[c]));
}

TEST_CASE("head and tail groups follow labeled counts") {
    // C=6 -> head = top 2 by labeled count, tail = bottom 2
    std::vector<std::size_t> truth, pred;
    for (std::size_t c = 0; c < 6; ++c)
        for (int i = 0; i < 4; ++i) {
            truth.push_back(c);
            pred.push_back(c < 3 ? c : 0);  // perfect on 0-2, wrong on 3-5
        }
    auto rep = classification_report(pred, truth, 6, {100, 60, 30, 10, 5, 2});
    CHECK(rep.head_group.recall == doctest::Approx(1.0));   // classes 0,1 predicted perfectly
    CHECK(rep.tail_group.recall == doctest::Approx(0.0));   // classes 4,5 never predicted
}

TEST_CASE("report serializes to JSON") {
    std::vector<std::size_t> truth{0, 1};
    auto rep = classification_report(truth, truth, 2, {2, 1});
    auto text = rep.to_json();
    CHECK(text.find("accuracy") != std::string::npos);
    CHECK(text.find("per_class_f1") != std::string::npos);
}
