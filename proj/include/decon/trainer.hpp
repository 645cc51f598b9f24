#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decon/datagen.hpp"
#include "decon/losses.hpp"
#include "decon/metrics.hpp"
#include "decon/net.hpp"
#include "decon/priorest.hpp"

namespace decon {

enum class Algorithm { Decon, FixMatch };
enum class LrSchedule { Cosine, InverseSquare };

struct RunConfig {
    int epochs = 30;
    int steps_per_epoch = 100;
    int batch_b = 32;
    double mu = 2.0;             // unlabeled batch = round(mu * batch_b)
    double eta0 = 0.05;
    double momentum = 0.9;
    double rho_ema = 0.999;      // parameter-EMA decay
    int eval_every = 1;          // epochs between test evaluations
    int test_per_class = 300;
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::Decon;
    LrSchedule lr_schedule = LrSchedule::Cosine;
    std::vector<int> hidden = {32, 32};
    DatasetSpec dataset;
    AugmentConfig augment;
    Hyperparams hyper;

    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& json_text);
    // key=value overrides onto the JSON representation
    static RunConfig with_overrides(const RunConfig& base, const std::vector<std::string>& overrides);
};

// eta0 * cos(7*pi*t / (16*T))
double cosine_lr(long t, long total, double eta0);
// eta0 / (1+t)^2, the summable schedule used by the stationarity probe
double inverse_square_lr(long t, double eta0);

void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr,
              double momentum_coef, std::vector<double>& velocity);

void param_ema_update(std::vector<double>& shadow, const std::vector<double>& params, double rho_ema);

struct TrainState {
    long step = 0;
    long total_steps = 0;
    double gamma_t = 1.0;
    std::vector<double> velocity;
    std::vector<double> param_ema;
    EmaPrior pi_b;
    EmaPrior pi_s;

    TrainState(std::size_t num_classes, std::size_t num_params, long total, double momentum_m)
        : total_steps(total),
          velocity(num_params, 0.0),
          param_ema(num_params, 0.0),
          pi_b(num_classes, momentum_m),
          pi_s(num_classes, momentum_m) {}
};

// per-step observations used for training diagnostics
struct StepDiagnostics {
    std::vector<std::size_t> q_tilde;
    std::vector<std::size_t> unlabeled_truth;
    std::vector<double> psi;
    std::vector<double> mean_softmax_std;  // over the unlabeled weak views
    std::vector<double> mean_softmax_bal;
};

LossBreakdown train_step(TrainState& state, DualNet& net, const RunConfig& cfg,
                         const Dataset& labeled_pool, const Dataset& unlabeled_pool,
                         const ClassPrior& pi_labeled, double lr, Rng& batch_rng, Rng& aug_rng,
                         StepDiagnostics* diag = nullptr);

struct EpochDiag {
    int epoch = 0;
    double branch_kl = 0.0;
    double pseudo_acc = 0.0;
    double psi_gap_value = 0.0;
    bool psi_gap_degenerate = false;
    double prior_kl = 0.0;
    bool has_eval = false;
    EvalReport eval;
};

struct RunResult {
    RunConfig config;
    GaussianMixture mixture;
    std::vector<int> labeled_counts;
    std::vector<int> unlabeled_counts_vec;
    DualNet net;       // live model
    DualNet ema_net;   // parameter-EMA model used for reported evaluation
    ClassPrior pi_b_final;  // training-time EMA snapshot for post-hoc adjustment
    ClassPrior pi_labeled;
    std::vector<EpochDiag> epochs;
    std::string metrics_header;
    std::vector<std::string> metrics_rows;
};

RunResult run(const RunConfig& cfg);

// Evaluate a model branch (balanced for Decon, standard for FixMatch) on a
// freshly drawn balanced test set, with post-hoc adjustment intensity tau3.
EvalReport evaluate_on_test(const RunResult& result, double tau3, bool use_ema = true);

struct StationarityReport {
    long total_steps = 0;
    long stable_from = 0;     // last step at which any probe label flipped
    long flips_final_quarter = 0;
    std::size_t probe_size = 0;
    std::size_t ties_excluded = 0;
};

// Summable-step-size run on a fixed mini-pool; tracks corrected pseudo-label
// flips on a fixed probe set.
StationarityReport stationarity_probe(const RunConfig& cfg, std::size_t probe_size = 64);

}  // namespace decon
