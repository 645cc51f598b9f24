#include "decon/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "decon/rng.hpp"

namespace decon {

using nlohmann::json;

Shape shape_from_string(const std::string& s) {
    if (s == "consistent") return Shape::Consistent;
    if (s == "uniform") return Shape::Uniform;
    if (s == "reversed") return Shape::Reversed;
    if (s == "middle") return Shape::Middle;
    if (s == "headtail") return Shape::HeadTail;
    if (s == "dirichlet") return Shape::DirichletRandom;
    throw std::invalid_argument("unknown shape: " + s);
}

std::string shape_to_string(Shape s) {
    switch (s) {
        case Shape::Consistent: return "consistent";
        case Shape::Uniform: return "uniform";
        case Shape::Reversed: return "reversed";
        case Shape::Middle: return "middle";
        case Shape::HeadTail: return "headtail";
        case Shape::DirichletRandom: return "dirichlet";
    }
    throw std::invalid_argument("unknown shape enum");
}

void DatasetSpec::validate() const {
    if (num_classes < 2) throw std::invalid_argument("DatasetSpec: num_classes < 2");
    if (feature_dim < 1) throw std::invalid_argument("DatasetSpec: feature_dim < 1");
    if (n1 < 1 || m1 < 1) throw std::invalid_argument("DatasetSpec: n1 and m1 must be >= 1");
    if (gamma_l < 1.0) throw std::invalid_argument("DatasetSpec: gamma_l < 1");
    if (gamma_u <= 0.0) throw std::invalid_argument("DatasetSpec: gamma_u <= 0");
    if (separation <= 0.0) throw std::invalid_argument("DatasetSpec: separation <= 0");
}

namespace {
int round_half_up_clamped(double v) {
    return std::max(1, static_cast<int>(std::floor(v + 0.5)));
}
}  // namespace

std::vector<int> longtail_counts(int n1, double gamma, int num_classes) {
    if (n1 < 1) throw std::invalid_argument("longtail_counts: n1 < 1");
    if (gamma < 1.0) throw std::invalid_argument("longtail_counts: gamma < 1");
    if (num_classes < 2) throw std::invalid_argument("longtail_counts: C < 2");
    std::vector<int> counts(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        double expo = -static_cast<double>(c) / static_cast<double>(num_classes - 1);
        counts[c] = round_half_up_clamped(n1 * std::pow(gamma, expo));
    }
    return counts;
}

std::vector<int> unlabeled_counts(const DatasetSpec& spec) {
    spec.validate();
    const int C = spec.num_classes;
    switch (spec.shape) {
        case Shape::Consistent:
            return longtail_counts(spec.m1, spec.gamma_l, C);
        case Shape::Uniform:
            return std::vector<int>(C, spec.m1);
        case Shape::Reversed: {
            auto counts = longtail_counts(spec.m1, spec.gamma_l, C);
            std::reverse(counts.begin(), counts.end());
            return counts;
        }
        case Shape::Middle: {
            // peak at floor(C/2), geometric decay toward both ends with
            // overall max/min ratio gamma_u
            const int peak = C / 2;
            const int max_dist = std::max(peak, C - 1 - peak);
            std::vector<int> counts(C);
            for (int c = 0; c < C; ++c) {
                double frac = static_cast<double>(std::abs(c - peak)) / max_dist;
                counts[c] = round_half_up_clamped(spec.m1 * std::pow(spec.gamma_u, -frac));
            }
            return counts;
        }
        case Shape::HeadTail: {
            // peaks at both ends, geometric dip in the middle
            std::vector<int> counts(C);
            int deepest = 0;
            for (int c = 0; c < C; ++c) deepest = std::max(deepest, std::min(c, C - 1 - c));
            for (int c = 0; c < C; ++c) {
                double frac = static_cast<double>(std::min(c, C - 1 - c)) / deepest;
                counts[c] = round_half_up_clamped(spec.m1 * std::pow(spec.gamma_u, -frac));
            }
            return counts;
        }
        case Shape::DirichletRandom: {
            // total budget m1*C split multinomially by a Dirichlet draw
            Rng rng(substream_seed(spec.seed, "dirichlet"));
            auto p = rng.dirichlet(spec.dirichlet_alpha, static_cast<std::size_t>(C));
            const int total = spec.m1 * C;
            std::vector<int> counts(C, 0);
            for (int i = 0; i < total; ++i) {
                double u = rng.uniform();
                double acc = 0.0;
                int c = C - 1;
                for (int k = 0; k < C; ++k) {
                    acc += p[static_cast<std::size_t>(k)];
                    if (u < acc) { c = k; break; }
                }
                counts[c]++;
            }
            for (int& v : counts) v = std::max(v, 1);
            return counts;
        }
    }
    throw std::invalid_argument("unlabeled_counts: unknown shape");
}

GaussianMixture make_mixture(int num_classes, int dim, double separation, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("make_mixture: C < 2");
    if (dim < 2) throw std::invalid_argument("make_mixture: d < 2");
    if (separation <= 0.0) throw std::invalid_argument("make_mixture: separation <= 0");

    // Regular polygon in a seeded random 2-plane.  `separation` is a lower
    // bound on pairwise distances; adjacent means are placed at 1.15x that
    // bound so the desk-default task difficulty sits comfortably inside the
    // intended accuracy band rather than on its edge.
    Rng rng(substream_seed(seed, "mixture"));
    std::vector<double> u(dim), v(dim);
    for (auto& e : u) e = rng.normal();
    auto norm = [](const std::vector<double>& a) {
        double s = 0.0;
        for (double e : a) s += e * e;
        return std::sqrt(s);
    };
    double nu = norm(u);
    for (auto& e : u) e /= nu;
    // Gram-Schmidt second basis vector
    for (;;) {
        for (auto& e : v) e = rng.normal();
        double dot = 0.0;
        for (int i = 0; i < dim; ++i) dot += u[i] * v[i];
        for (int i = 0; i < dim; ++i) v[i] -= dot * u[i];
        double nv = norm(v);
        if (nv > 1e-8) {
            for (auto& e : v) e /= nv;
            break;
        }
    }

    const double radius = 1.15 * separation / (2.0 * std::sin(M_PI / num_classes));
    const double phase = rng.uniform(0.0, 2.0 * M_PI);

    GaussianMixture mix;
    mix.num_classes = num_classes;
    mix.dim = dim;
    mix.means.assign(num_classes, std::vector<double>(dim, 0.0));
    mix.diag_vars.assign(num_classes, std::vector<double>(dim, 1.0));
    for (int c = 0; c < num_classes; ++c) {
        double a = phase + 2.0 * M_PI * c / num_classes;
        double cu = radius * std::cos(a), cv = radius * std::sin(a);
        for (int i = 0; i < dim; ++i) mix.means[c][i] = cu * u[i] + cv * v[i];
    }
    return mix;
}

namespace {
Dataset sample_impl(const GaussianMixture& mix, const std::vector<int>& counts,
                    std::uint64_t seed, bool labeled) {
    if (static_cast<int>(counts.size()) != mix.num_classes)
        throw std::invalid_argument("sample_dataset: counts length != C");
    Rng rng(substream_seed(seed, labeled ? "labeled" : "unlabeled"));
    Dataset ds;
    for (int c = 0; c < mix.num_classes; ++c) {
        for (int k = 0; k < counts[c]; ++k) {
            Sample s;
            s.x.resize(mix.dim);
            for (int i = 0; i < mix.dim; ++i)
                s.x[i] = rng.normal(mix.means[c][i], std::sqrt(mix.diag_vars[c][i]));
            if (labeled) {
                s.label = c;
            } else {
                ds.sidecar.push_back(c);
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}
}  // namespace

Dataset sample_labeled(const GaussianMixture& mix, const std::vector<int>& counts, std::uint64_t seed) {
    return sample_impl(mix, counts, seed, true);
}

Dataset sample_unlabeled(const GaussianMixture& mix, const std::vector<int>& counts, std::uint64_t seed) {
    return sample_impl(mix, counts, seed, false);
}

std::string spec_to_json(const DatasetSpec& spec) {
    json j;
    j["num_classes"] = spec.num_classes;
    j["feature_dim"] = spec.feature_dim;
    j["n1"] = spec.n1;
    j["m1"] = spec.m1;
    j["gamma_l"] = spec.gamma_l;
    j["gamma_u"] = spec.gamma_u;
    j["shape"] = shape_to_string(spec.shape);
    j["dirichlet_alpha"] = spec.dirichlet_alpha;
    j["separation"] = spec.separation;
    j["seed"] = spec.seed;
    return j.dump(2);
}

DatasetSpec spec_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    DatasetSpec spec;
    spec.num_classes = j.value("num_classes", spec.num_classes);
    spec.feature_dim = j.value("feature_dim", spec.feature_dim);
    spec.n1 = j.value("n1", spec.n1);
    spec.m1 = j.value("m1", spec.m1);
    spec.gamma_l = j.value("gamma_l", spec.gamma_l);
    spec.gamma_u = j.value("gamma_u", spec.gamma_u);
    if (j.contains("shape")) spec.shape = shape_from_string(j["shape"].get<std::string>());
    spec.dirichlet_alpha = j.value("dirichlet_alpha", spec.dirichlet_alpha);
    spec.separation = j.value("separation", spec.separation);
    spec.seed = j.value("seed", spec.seed);
    spec.validate();
    return spec;
}

std::string mixture_to_json(const GaussianMixture& mix) {
    json j;
    j["num_classes"] = mix.num_classes;
    j["dim"] = mix.dim;
    j["means"] = mix.means;
    j["diag_vars"] = mix.diag_vars;
    return j.dump(2);
}

GaussianMixture mixture_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    GaussianMixture mix;
    mix.num_classes = j.at("num_classes").get<int>();
    mix.dim = j.at("dim").get<int>();
    mix.means = j.at("means").get<std::vector<std::vector<double>>>();
    mix.diag_vars = j.at("diag_vars").get<std::vector<std::vector<double>>>();
    return mix;
}

void write_dataset_csv(std::ostream& os, const Dataset& ds, const std::string& split) {
    if (ds.samples.empty()) return;
    const std::size_t dim = ds.samples.front().x.size();
    for (std::size_t i = 0; i < dim; ++i) os << "x" << i << ",";
    os << "label,split\n";
    os.precision(17);
    for (const auto& s : ds.samples) {
        for (double v : s.x) os << v << ",";
        if (s.label) os << *s.label;
        os << "," << split << "\n";
    }
}

Dataset read_dataset_csv(std::istream& is) {
    Dataset ds;
    std::string line;
    if (!std::getline(is, line)) return ds;  // header
    std::size_t columns = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        Sample s;
        for (std::size_t i = 0; i + 2 < columns; ++i) {
            std::getline(ss, field, ',');
            s.x.push_back(std::stod(field));
        }
        std::getline(ss, field, ',');
        if (!field.empty()) s.label = std::stoi(field);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace decon
