// Command-line surface: dataset generation, training (decon or the fixmatch
// control), evaluation with post-hoc adjustment, the lemma verification suite,
// and sweeps over unlabeled-distribution shapes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "decon/inference.hpp"
#include "decon/oracle.hpp"
#include "decon/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace decon;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerification = 3;

std::string read_file(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path().empty() ? "." : p.parent_path());
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::from_json(read_file(path));
    if (!overrides.empty()) cfg = RunConfig::with_overrides(cfg, overrides);
    if (const char* env = std::getenv("DECON_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
    return cfg;
}

void dump_resolved(const RunConfig& cfg, const fs::path& out_dir,
                   const std::vector<std::string>& overrides) {
    json j = json::parse(cfg.to_json());
    j["applied_overrides"] = overrides;
    write_file(out_dir / "resolved-config.json", j.dump(2));
}

int cmd_gen(const RunConfig& cfg, const fs::path& out_dir) {
    const auto& ds = cfg.dataset;
    auto mixture = make_mixture(ds.num_classes, ds.feature_dim, ds.separation,
                                substream_seed(cfg.seed, "data"));
    auto lab_counts = longtail_counts(ds.n1, ds.gamma_l, ds.num_classes);
    DatasetSpec uspec = ds;
    uspec.seed = substream_seed(cfg.seed, "data");
    auto unl_counts = unlabeled_counts(uspec);
    Dataset labeled = sample_labeled(mixture, lab_counts, substream_seed(cfg.seed, "data"));
    Dataset unlabeled = sample_unlabeled(mixture, unl_counts, substream_seed(cfg.seed, "data") + 1);

    fs::create_directories(out_dir);
    {
        std::ofstream f(out_dir / "labeled.csv");
        write_dataset_csv(f, labeled, "labeled");
    }
    {
        std::ofstream f(out_dir / "unlabeled.csv");
        write_dataset_csv(f, unlabeled, "unlabeled");
    }
    {
        std::ofstream f(out_dir / "sidecar.csv");
        f << "index,true_label\n";
        for (std::size_t i = 0; i < unlabeled.sidecar.size(); ++i)
            f << i << "," << unlabeled.sidecar[i] << "\n";
    }
    write_file(out_dir / "mixture.json", mixture_to_json(mixture));
    std::cout << "wrote " << labeled.samples.size() << " labeled and " << unlabeled.samples.size()
              << " unlabeled samples to " << out_dir << "\n";
    return 0;
}

void write_checkpoint(const RunResult& result, const fs::path& path) {
    json j;
    j["config"] = json::parse(result.config.to_json());
    j["net"] = json::parse(result.net.to_json());
    j["ema_net"] = json::parse(result.ema_net.to_json());
    j["pi_b"] = result.pi_b_final.probs();
    j["labeled_counts"] = result.labeled_counts;
    j["mixture"] = json::parse(mixture_to_json(result.mixture));
    write_file(path, j.dump());
}

struct Checkpoint {
    RunResult result;  // enough state for evaluate_on_test
};

Checkpoint load_checkpoint(const fs::path& path) {
    json j = json::parse(read_file(path));
    Checkpoint ck;
    ck.result.config = RunConfig::from_json(j.at("config").dump());
    ck.result.net = DualNet::from_json(j.at("net").dump());
    ck.result.ema_net = DualNet::from_json(j.at("ema_net").dump());
    ck.result.pi_b_final = ClassPrior(j.at("pi_b").get<std::vector<double>>());
    ck.result.labeled_counts = j.at("labeled_counts").get<std::vector<int>>();
    ck.result.mixture = mixture_from_json(j.at("mixture").dump());
    return ck;
}

int cmd_train(const RunConfig& cfg, const fs::path& out_dir,
              const std::vector<std::string>& overrides) {
    fs::create_directories(out_dir);
    dump_resolved(cfg, out_dir, overrides);
    RunResult result = run(cfg);
    {
        std::ofstream f(out_dir / "metrics.csv");
        f << result.metrics_header << "\n";
        for (const auto& row : result.metrics_rows) f << row << "\n";
    }
    write_checkpoint(result, out_dir / "checkpoint.json");
    if (cfg.epochs > 0) {
        auto report = evaluate_on_test(result, 0.0);
        write_file(out_dir / "final_eval.json", report.to_json());
        std::cout << "final accuracy (tau3=0): " << report.accuracy << "\n";
    }
    return 0;
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& out_dir, double tau3) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    const auto& cfg = ck.result.config;
    auto report = evaluate_on_test(ck.result, tau3);
    fs::create_directories(out_dir);
    std::ostringstream tag;
    tag << "tau3_" << tau3;
    write_file(out_dir / ("eval_" + tag.str() + ".json"), report.to_json());

    // prediction dump over the test set
    Dataset test = sample_labeled(ck.result.mixture,
                                  std::vector<int>(static_cast<std::size_t>(cfg.dataset.num_classes),
                                                   cfg.test_per_class),
                                  substream_seed(cfg.seed, "test"));
    std::ofstream f(out_dir / ("predictions_" + tag.str() + ".csv"));
    f << "id,true_label,raw_argmax,adjusted_argmax,margin\n";
    bool balanced = cfg.algorithm == Algorithm::Decon;
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        auto out = ck.result.ema_net.forward(test.samples[i].x);
        const auto& logits = balanced ? out.logits_bal : out.logits_std;
        auto pred = post_hoc_predict(logits, ck.result.pi_b_final, tau3);
        f << i << "," << *test.samples[i].label << "," << argmax(logits) << "," << pred.label
          << "," << pred.margin << "\n";
    }
    std::cout << "accuracy (tau3=" << tau3 << "): " << report.accuracy << "\n";
    return 0;
}

int cmd_verify(std::uint64_t seed, const fs::path& out_dir) {
    LemmaSuiteOptions options;
    options.seed = seed;
    auto report = run_lemma_suite(options);
    fs::create_directories(out_dir);
    write_file(out_dir / "lemma_report.json", report.to_json());
    for (const auto& r : report.results)
        std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " (" << r.trials << " trials, "
                  << r.failures << " failures)\n";
    return report.all_passed() ? 0 : kExitVerification;
}

int cmd_sweep(const RunConfig& base, const fs::path& out_dir,
              const std::vector<std::string>& shape_names, int num_seeds) {
    fs::create_directories(out_dir);
    std::ofstream summary(out_dir / "summary.csv");
    summary << "shape,seed,accuracy,accuracy_tau3,pseudo_acc,branch_kl_first,branch_kl_last\n";
    std::map<std::string, std::vector<double>> acc_by_shape;
    for (const auto& shape_name : shape_names) {
        for (int s = 0; s < num_seeds; ++s) {
            RunConfig cfg = base;
            cfg.dataset.shape = shape_from_string(shape_name);
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            try {
                RunResult result = run(cfg);
                auto plain = evaluate_on_test(result, 0.0);
                auto adjusted = evaluate_on_test(result, cfg.hyper.tau3);
                double pseudo = result.epochs.empty() ? 0.0 : result.epochs.back().pseudo_acc;
                double kl_first = result.epochs.empty() ? 0.0 : result.epochs.front().branch_kl;
                double kl_last = result.epochs.empty() ? 0.0 : result.epochs.back().branch_kl;
                summary << shape_name << "," << cfg.seed << "," << plain.accuracy << ","
                        << adjusted.accuracy << "," << pseudo << "," << kl_first << "," << kl_last
                        << "\n";
                summary.flush();  // partial results survive a failing cell
                acc_by_shape[shape_name].push_back(adjusted.accuracy);
            } catch (const std::exception& e) {
                std::cerr << "sweep cell failed (" << shape_name << ", seed " << cfg.seed
                          << "): " << e.what() << "\n";
            }
        }
    }
    std::ofstream agg(out_dir / "summary_by_shape.csv");
    agg << "shape,n,mean_accuracy_tau3,std_accuracy_tau3\n";
    for (const auto& [shape_name, accs] : acc_by_shape) {
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        double sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
        agg << shape_name << "," << accs.size() << "," << mean << "," << sd << "\n";
    }
    std::cout << "sweep summary written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decon: dual-branch long-tailed semi-supervised learning on synthetic data"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir = "out";
    std::vector<std::string> overrides;
    double tau3 = 1.0;
    std::string checkpoint_path;
    std::uint64_t verify_seed = 0;
    std::vector<std::string> sweep_shapes = {"consistent", "uniform", "reversed",
                                             "middle",     "headtail", "dirichlet"};
    int sweep_seeds = 3;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON config file");
        sub->add_option("-o,--output", output_dir, "output directory");
        sub->add_option("--override", overrides, "key=value config overrides (dotted keys allowed)");
    };

    auto* gen = app.add_subcommand("gen", "generate dataset files");
    add_common(gen);
    auto* train = app.add_subcommand("train", "train decon or the fixmatch control");
    add_common(train);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with post-hoc adjustment");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint.json from a train run")->required();
    eval->add_option("-o,--output", output_dir, "output directory");
    eval->add_option("--tau3", tau3, "post-hoc adjustment intensity (0 disables)");
    auto* verify = app.add_subcommand("verify", "run the lemma verification suite");
    verify->add_option("--seed", verify_seed, "suite seed");
    verify->add_option("-o,--output", output_dir, "output directory");
    auto* sweep = app.add_subcommand("sweep", "train+eval across unlabeled shapes and seeds");
    add_common(sweep);
    sweep->add_option("--shapes", sweep_shapes, "shapes to sweep");
    sweep->add_option("--seeds", sweep_seeds, "seeds per shape");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(load_config(config_path, overrides), output_dir);
        if (train->parsed()) {
            auto cfg = load_config(config_path, overrides);
            return cmd_train(cfg, output_dir, overrides);
        }
        if (eval->parsed()) return cmd_eval(checkpoint_path, output_dir, tau3);
        if (verify->parsed()) return cmd_verify(verify_seed, output_dir);
        if (sweep->parsed())
            return cmd_sweep(load_config(config_path, overrides), output_dir, sweep_shapes, sweep_seeds);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
