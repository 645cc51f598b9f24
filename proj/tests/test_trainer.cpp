#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include <cmath>

#include "decon/trainer.hpp"

using namespace decon;

namespace {

RunConfig tiny_config(std::uint64_t seed = 0) {
    RunConfig cfg;
    cfg.epochs = 2;
    cfg.steps_per_epoch = 10;
    cfg.batch_b = 8;
    cfg.mu = 2.0;
    cfg.test_per_class = 50;
    cfg.seed = seed;
    cfg.hidden = {16};
    cfg.dataset.num_classes = 3;
    cfg.dataset.n1 = 30;
    cfg.dataset.m1 = 90;
    cfg.dataset.gamma_l = 5.0;
    cfg.dataset.gamma_u = 5.0;
    cfg.dataset.shape = Shape::Reversed;
    return cfg;
}

}  // namespace

TEST_CASE("learning rate schedules") {
    CHECK(cosine_lr(0, 100, 0.05) == doctest::Approx(0.05));
    CHECK(cosine_lr(50, 100, 1.0) == doctest::Approx(0.773010453362737).epsilon(1e-9));
    CHECK(cosine_lr(100, 100, 1.0) == doctest::Approx(0.19509032201612833).epsilon(1e-9));
    CHECK(cosine_lr(100, 100, 1.0) > 0.0);
    CHECK_THROWS_AS(cosine_lr(101, 100, 1.0), std::invalid_argument);

    CHECK(inverse_square_lr(0, 0.5) == doctest::Approx(0.5));
    CHECK(inverse_square_lr(1, 0.5) == doctest::Approx(0.125));
    CHECK(inverse_square_lr(3, 1.0) == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("sgd step arithmetic") {
    std::vector<double> theta{1.0}, v{0.0};
    sgd_step(theta, {0.0}, 0.1, 0.9, v);
    CHECK(theta[0] == doctest::Approx(1.0));

    // momentum 0: plain gradient step
    theta = {1.0};
    v = {0.0};
    sgd_step(theta, {2.0}, 0.1, 0.0, v);
    CHECK(theta[0] == doctest::Approx(0.8));

    // two steps with constant gradient g, momentum 0.9, lr 1: displacement g + 1.9g
    theta = {0.0};
    v = {0.0};
    sgd_step(theta, {1.0}, 1.0, 0.9, v);
    sgd_step(theta, {1.0}, 1.0, 0.9, v);
    CHECK(theta[0] == doctest::Approx(-2.9));

    CHECK_THROWS_AS(sgd_step(theta, {1.0, 2.0}, 0.1, 0.9, v), std::invalid_argument);
}

TEST_CASE("parameter ema update") {
    std::vector<double> shadow{0.0};
    param_ema_update(shadow, {2.0}, 0.5);
    CHECK(shadow[0] == doctest::Approx(1.0));
    param_ema_update(shadow, {2.0}, 0.0);
    CHECK(shadow[0] == doctest::Approx(2.0));
    std::vector<double> fixed{3.0};
    param_ema_update(fixed, {3.0}, 0.99);
    CHECK(fixed[0] == doctest::Approx(3.0));
}

TEST_CASE("config JSON round trip and overrides") {
    RunConfig cfg = tiny_config(42);
    cfg.algorithm = Algorithm::FixMatch;
    cfg.hyper.tau1 = 1.5;
    auto back = RunConfig::from_json(cfg.to_json());
    CHECK(back.seed == 42);
    CHECK(back.algorithm == Algorithm::FixMatch);
    CHECK(back.hyper.tau1 == doctest::Approx(1.5));
    CHECK(back.dataset.shape == Shape::Reversed);

    auto patched = RunConfig::with_overrides(
        cfg, {"epochs=7", "dataset.shape=middle", "hyper.tau3=2.5", "algorithm=decon"});
    CHECK(patched.epochs == 7);
    CHECK(patched.dataset.shape == Shape::Middle);
    CHECK(patched.hyper.tau3 == doctest::Approx(2.5));
    CHECK(patched.algorithm == Algorithm::Decon);

    CHECK_THROWS(RunConfig::with_overrides(cfg, {"no_equals_sign"}));
}

TEST_CASE("zero epochs returns the initialized net and header only") {
    RunConfig cfg = tiny_config();
    cfg.epochs = 0;
    auto result = run(cfg);
    CHECK(result.metrics_rows.empty());
    CHECK_FALSE(result.metrics_header.empty());
    CHECK(result.epochs.empty());
}

TEST_CASE("training is deterministic per seed") {
    RunConfig cfg = tiny_config(7);
    auto a = run(cfg);
    auto b = run(cfg);
    CHECK(a.net.flat_params() == b.net.flat_params());
    CHECK(a.ema_net.flat_params() == b.ema_net.flat_params());
    CHECK(a.metrics_rows == b.metrics_rows);
    CHECK(a.pi_b_final.probs() == b.pi_b_final.probs());

    RunConfig other = tiny_config(8);
    auto c = run(other);
    CHECK(a.net.flat_params() != c.net.flat_params());
}

TEST_CASE("zero learning rate leaves parameters unchanged but reports losses") {
    RunConfig cfg = tiny_config(3);
    const auto& ds = cfg.dataset;
    auto mixture = make_mixture(ds.num_classes, ds.feature_dim, ds.separation,
                                substream_seed(cfg.seed, "data"));
    auto counts = longtail_counts(ds.n1, ds.gamma_l, ds.num_classes);
    Dataset labeled = sample_labeled(mixture, counts, substream_seed(cfg.seed, "data"));
    DatasetSpec uspec = ds;
    uspec.seed = substream_seed(cfg.seed, "data");
    Dataset unlabeled =
        sample_unlabeled(mixture, unlabeled_counts(uspec), substream_seed(cfg.seed, "data") + 1);
    ClassPrior pi_labeled =
        ClassPrior::from_counts(std::vector<double>(counts.begin(), counts.end()));

    DualNet net(ds.feature_dim, cfg.hidden, ds.num_classes, substream_seed(cfg.seed, "init"));
    auto before = net.flat_params();
    TrainState state(static_cast<std::size_t>(ds.num_classes), net.num_params(), 10, cfg.hyper.m);
    state.param_ema = before;
    Rng batch_rng(substream_seed(cfg.seed, "batch"));
    Rng aug_rng(substream_seed(cfg.seed, "augment"));
    for (int t = 0; t < 10; ++t) {
        auto losses =
            train_step(state, net, cfg, labeled, unlabeled, pi_labeled, 0.0, batch_rng, aug_rng);
        CHECK(std::isfinite(losses.total));
    }
    CHECK(net.flat_params() == before);
}

TEST_CASE("loss decreases on an easy separable problem") {
    RunConfig cfg;
    cfg.epochs = 2;
    cfg.steps_per_epoch = 100;
    cfg.batch_b = 16;
    cfg.test_per_class = 50;
    cfg.seed = 1;
    cfg.hidden = {16};
    cfg.dataset.num_classes = 2;
    cfg.dataset.feature_dim = 2;
    cfg.dataset.n1 = 40;
    cfg.dataset.m1 = 120;
    cfg.dataset.gamma_l = 2.0;
    cfg.dataset.gamma_u = 2.0;
    cfg.dataset.separation = 6.0;
    cfg.dataset.shape = Shape::Consistent;

    const auto& ds = cfg.dataset;
    auto mixture = make_mixture(ds.num_classes, ds.feature_dim, ds.separation,
                                substream_seed(cfg.seed, "data"));
    Dataset labeled = sample_labeled(mixture, longtail_counts(ds.n1, ds.gamma_l, ds.num_classes),
                                     substream_seed(cfg.seed, "data"));
    DatasetSpec uspec = ds;
    uspec.seed = substream_seed(cfg.seed, "data");
    Dataset unlabeled =
        sample_unlabeled(mixture, unlabeled_counts(uspec), substream_seed(cfg.seed, "data") + 1);
    ClassPrior pi_labeled =
        ClassPrior::from_counts({static_cast<double>(ds.n1), ds.n1 / ds.gamma_l});

    DualNet net(ds.feature_dim, cfg.hidden, ds.num_classes, substream_seed(cfg.seed, "init"));
    long total = static_cast<long>(cfg.epochs) * cfg.steps_per_epoch;
    TrainState state(2, net.num_params(), total, cfg.hyper.m);
    state.param_ema = net.flat_params();
    Rng batch_rng(substream_seed(cfg.seed, "batch"));
    Rng aug_rng(substream_seed(cfg.seed, "augment"));

    double first = 0.0, last = 0.0;
    for (long t = 0; t < total; ++t) {
        double lr = cosine_lr(t, total, cfg.eta0);
        auto losses =
            train_step(state, net, cfg, labeled, unlabeled, pi_labeled, lr, batch_rng, aug_rng);
        if (t == 0) first = losses.total;
        last = losses.total;
    }
    CHECK(last < first);
}

TEST_CASE("fixmatch control runs under the same harness") {
    RunConfig cfg = tiny_config(5);
    cfg.algorithm = Algorithm::FixMatch;
    auto result = run(cfg);
    CHECK(result.metrics_rows.size() == 20);
    CHECK(result.epochs.size() == 2);
    auto report = evaluate_on_test(result, 0.0);
    CHECK(report.accuracy >= 0.0);
    CHECK(report.accuracy <= 1.0);
}

TEST_CASE("evaluate_on_test is reproducible and tau3 changes only the adjustment") {
    RunConfig cfg = tiny_config(11);
    auto result = run(cfg);
    auto a = evaluate_on_test(result, 1.0);
    auto b = evaluate_on_test(result, 1.0);
    CHECK(a.accuracy == doctest::Approx(b.accuracy));
    auto raw = evaluate_on_test(result, 0.0);
    CHECK(raw.accuracy >= 0.0);
}

TEST_CASE("metrics header matches the documented schema prefix") {
    RunConfig cfg = tiny_config();
    cfg.epochs = 0;
    auto result = run(cfg);
    CHECK(result.metrics_header.rfind("step,epoch,lr,l_labeled,l_con,l_b_labeled,l_b_con,total,"
                                      "gamma_t",
                                      0) == 0);
}

TEST_CASE("stationarity probe reports and finds no late flips on a small run") {
    RunConfig cfg = tiny_config(2);
    cfg.epochs = 4;
    cfg.steps_per_epoch = 50;
    auto report = stationarity_probe(cfg, 32);
    CHECK(report.total_steps == 200);
    CHECK(report.probe_size + report.ties_excluded >= 1);
    CHECK(report.flips_final_quarter == 0);
}
