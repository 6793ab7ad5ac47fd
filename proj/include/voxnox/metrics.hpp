#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voxnox/autoencoder.hpp"
#include "voxnox/lattice.hpp"

namespace voxnox {

inline constexpr double kPatternEpsilon = 1e-6;

// Raw counts of every window x window x window material pattern (stride 1),
// keyed by the 3-bit material ids packed x-fastest. Sorted by key.
struct PatternCounts {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;
    std::uint64_t total = 0;
};

// Window sizes 1 and 2 are supported (the key must fit in 64 bits).
PatternCounts pattern_counts(const MaterialLattice& lattice, int window = 2);

// Smoothed probabilities over a shared, sorted support.
struct PatternDistribution {
    std::vector<std::uint64_t> support;
    std::vector<double> probabilities;
};

PatternDistribution smoothed_distribution(const PatternCounts& counts, std::span<const std::uint64_t> support,
                                          double epsilon = kPatternEpsilon);

// Both distributions built over the union of the pair's observed patterns.
std::pair<PatternDistribution, PatternDistribution> pair_distributions(const PatternCounts& a, const PatternCounts& b,
                                                                       double epsilon = kPatternEpsilon);

// sum p ln(p / q); both must share a support.
double kl_divergence(const PatternDistribution& p, const PatternDistribution& q);

// KL(a || b) with pair-support smoothing.
double pattern_kl(const PatternCounts& a, const PatternCounts& b, double epsilon = kPatternEpsilon);
double pattern_kl(const MaterialLattice& a, const MaterialLattice& b, double epsilon = kPatternEpsilon);

// d(i) = mean over j != i of KL(i || j).
std::vector<double> population_diversity(std::span<const MaterialLattice> population,
                                         double epsilon = kPatternEpsilon);

// d(i) = mean over seed members s of KL(i || s).
std::vector<double> divergence_from_seed(std::span<const MaterialLattice> population,
                                         std::span<const MaterialLattice> seed, double epsilon = kPatternEpsilon);

// Empty when either series has zero variance or fewer than two points.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct CorrelationReport {
    std::vector<double> latent_distances;
    std::vector<double> divergences;
    std::optional<double> r;
};

// One point per ordered pair (i, j), i != j: (latent distance, KL(i || j)).
CorrelationReport latent_phenotype_correlation(std::span<const MaterialLattice> population,
                                               const AutoencoderModel& model, double epsilon = kPatternEpsilon);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

// 95% normal-approximation half-width of the mean.
double ci95(std::span<const double> values);

struct NamedModel {
    std::string name;
    const AutoencoderModel* model = nullptr;
};

struct NamedPopulations {
    std::string name;
    std::vector<std::vector<MaterialLattice>> populations;
};

struct ReconstructionMatrix {
    std::vector<std::string> models;
    std::vector<std::string> groups;
    std::vector<std::vector<MeanStd>> cells; // [model][group], over that group's populations
    std::vector<MeanStd> overall;            // [model], over every group's populations pooled
};

ReconstructionMatrix reconstruction_matrix(std::span<const NamedModel> models,
                                           std::span<const NamedPopulations> groups);

// Columns: model,<group>_mean,<group>_std...,overall_mean,overall_std
std::string reconstruction_matrix_csv(const ReconstructionMatrix& m);

} // namespace voxnox
