#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decon/datagen.hpp"
#include "decon/prior.hpp"

namespace decon {

struct BayesOracle {
    GaussianMixture mixture;
    ClassPrior prior;
};

// exact diagonal-Gaussian log-density per class
std::vector<double> log_class_conditional(const GaussianMixture& mix, const std::vector<double>& x);

// argmax_c [ log p(x|c) + log prior_c ]
std::size_t bayes_predict(const BayesOracle& oracle, const std::vector<double>& x);

// Monte Carlo estimate of the Bayes accuracy when data are drawn with
// `sampling_prior` and classified with the oracle's prior.
double bayes_accuracy_mc(const BayesOracle& oracle, const ClassPrior& sampling_prior,
                         std::size_t num_samples, std::uint64_t seed);

// exactly decoupled scores: log p(x|c) plus a shared offset
std::vector<double> decoupled_logits(const GaussianMixture& mix, const std::vector<double>& x,
                                     double offset);

struct ConcentrationReport {
    std::size_t trials = 0;
    std::size_t within_bound = 0;
    double pass_fraction = 0.0;
    double required_fraction = 0.0;
    double bias = 0.0;  // ||pi_pred - pi_u||_1, large-sample estimate
    bool passed = false;
};

// Prediction-marginal concentration: with the exactly decoupled model as the
// fixed predictor, check how often || pi_hat - pi_u ||_1 stays within
// bias + 2*sqrt(C/M) + sqrt(2*log(1/nu)/M) over repeated draws of size M.
ConcentrationReport verify_prior_concentration(const GaussianMixture& mix, const ClassPrior& pi_u,
                                               std::size_t M, std::size_t trials, double nu,
                                               std::uint64_t seed);

struct LemmaResult {
    std::string name;
    std::string property;  // one-line statement of what was checked
    std::size_t trials = 0;
    std::size_t failures = 0;
    double worst_violation = 0.0;
    bool passed() const { return failures == 0; }
};

struct LemmaSuiteOptions {
    std::uint64_t seed = 0;
    // test-only mutation hook: deliberately corrupts the overlap score so the
    // gating check must fail
    bool corrupt_eta = false;
};

struct LemmaSuiteReport {
    std::vector<LemmaResult> results;
    bool all_passed() const;
    std::string to_json() const;
};

LemmaSuiteReport run_lemma_suite(const LemmaSuiteOptions& options);

}  // namespace decon
