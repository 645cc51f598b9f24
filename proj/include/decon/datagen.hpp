#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "decon/prior.hpp"

namespace decon {

enum class Shape { Consistent, Uniform, Reversed, Middle, HeadTail, DirichletRandom };

Shape shape_from_string(const std::string& s);
std::string shape_to_string(Shape s);

struct DatasetSpec {
    int num_classes = 6;
    int feature_dim = 2;
    int n1 = 60;           // largest labeled class count
    int m1 = 600;          // largest / reference unlabeled class count
    double gamma_l = 20.0; // labeled imbalance ratio, >= 1
    double gamma_u = 20.0; // imbalance ratio for shapes that define one
    Shape shape = Shape::Reversed;
    double dirichlet_alpha = 1.0;
    double separation = 2.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GaussianMixture {
    int num_classes = 0;
    int dim = 0;
    std::vector<std::vector<double>> means;     // C x d
    std::vector<std::vector<double>> diag_vars; // C x d, all > 0
};

struct Sample {
    std::vector<double> x;
    std::optional<int> label;  // absent for unlabeled samples
};

struct Dataset {
    std::vector<Sample> samples;
    // ground truth for unlabeled samples, evaluation only; empty for labeled sets
    std::vector<int> sidecar;
};

// N_c = n1 * gamma^{-c/(C-1)}, round half up, clamp to >= 1; nonincreasing
std::vector<int> longtail_counts(int n1, double gamma, int num_classes);

std::vector<int> unlabeled_counts(const DatasetSpec& spec);

// Means on a sphere around the origin with min pairwise distance >= separation,
// unit diagonal variances; deterministic given seed.
GaussianMixture make_mixture(int num_classes, int dim, double separation, std::uint64_t seed);

Dataset sample_labeled(const GaussianMixture& mix, const std::vector<int>& counts, std::uint64_t seed);
Dataset sample_unlabeled(const GaussianMixture& mix, const std::vector<int>& counts, std::uint64_t seed);

// JSON (de)serialization of the dataset description and mixture, CSV export
std::string spec_to_json(const DatasetSpec& spec);
DatasetSpec spec_from_json(const std::string& json_text);
std::string mixture_to_json(const GaussianMixture& mix);
GaussianMixture mixture_from_json(const std::string& json_text);

void write_dataset_csv(std::ostream& os, const Dataset& ds, const std::string& split);
Dataset read_dataset_csv(std::istream& is);

}  // namespace decon
