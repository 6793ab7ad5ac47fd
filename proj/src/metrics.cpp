#include "voxnox/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "voxnox/novelty.hpp"

namespace voxnox {

PatternCounts pattern_counts(const MaterialLattice& lattice, int window) {
    const Dims d = lattice.dims();
    if (window < 1 || window > 2)
        throw Error(ErrorCode::invalid_argument, "pattern window must be 1 or 2, got " + std::to_string(window));
    if (window > d.x || window > d.y || window > d.z)
        throw Error(ErrorCode::dimension_mismatch, "pattern window larger than the lattice");
    std::unordered_map<std::uint64_t, std::uint64_t> map;
    PatternCounts out;
    for (int j = 0; j + window <= d.y; ++j)
        for (int k = 0; k + window <= d.z; ++k)
            for (int i = 0; i + window <= d.x; ++i) {
                std::uint64_t key = 0;
                int shift = 0;
                for (int dj = 0; dj < window; ++dj)
                    for (int dk = 0; dk < window; ++dk)
                        for (int di = 0; di < window; ++di, shift += 3)
                            key |= std::uint64_t(lattice.at(i + di, j + dj, k + dk)) << shift;
                ++map[key];
                ++out.total;
            }
    out.counts.assign(map.begin(), map.end());
    std::sort(out.counts.begin(), out.counts.end());
    return out;
}

PatternDistribution smoothed_distribution(const PatternCounts& counts, std::span<const std::uint64_t> support,
                                          double epsilon) {
    PatternDistribution p;
    p.support.assign(support.begin(), support.end());
    p.probabilities.resize(support.size());
    const double denom = double(counts.total) + epsilon * double(support.size());
    std::size_t c = 0;
    for (std::size_t s = 0; s < support.size(); ++s) {
        while (c < counts.counts.size() && counts.counts[c].first < support[s])
            ++c;
        const double n = (c < counts.counts.size() && counts.counts[c].first == support[s]) ? double(counts.counts[c].second) : 0.0;
        p.probabilities[s] = (n + epsilon) / denom;
    }
    return p;
}

namespace {

std::vector<std::uint64_t> union_support(const PatternCounts& a, const PatternCounts& b) {
    std::vector<std::uint64_t> support;
    support.reserve(a.counts.size() + b.counts.size());
    std::size_t i = 0, j = 0;
    while (i < a.counts.size() || j < b.counts.size()) {
        if (j == b.counts.size() || (i < a.counts.size() && a.counts[i].first < b.counts[j].first))
            support.push_back(a.counts[i++].first);
        else if (i == a.counts.size() || b.counts[j].first < a.counts[i].first)
            support.push_back(b.counts[j++].first);
        else {
            support.push_back(a.counts[i].first);
            ++i;
            ++j;
        }
    }
    return support;
}

} // namespace

std::pair<PatternDistribution, PatternDistribution> pair_distributions(const PatternCounts& a, const PatternCounts& b,
                                                                       double epsilon) {
    const auto support = union_support(a, b);
    return {smoothed_distribution(a, support, epsilon), smoothed_distribution(b, support, epsilon)};
}

double kl_divergence(const PatternDistribution& p, const PatternDistribution& q) {
    if (p.support != q.support)
        throw Error(ErrorCode::dimension_mismatch, "distributions are over different supports");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.probabilities.size(); ++i)
        if (p.probabilities[i] > 0.0)
            kl += p.probabilities[i] * std::log(p.probabilities[i] / q.probabilities[i]);
    return std::max(0.0, kl);
}

double pattern_kl(const PatternCounts& a, const PatternCounts& b, double epsilon) {
    const auto [p, q] = pair_distributions(a, b, epsilon);
    return kl_divergence(p, q);
}

double pattern_kl(const MaterialLattice& a, const MaterialLattice& b, double epsilon) {
    return pattern_kl(pattern_counts(a), pattern_counts(b), epsilon);
}

namespace {

std::vector<PatternCounts> all_counts(std::span<const MaterialLattice> lattices) {
    std::vector<PatternCounts> out;
    out.reserve(lattices.size());
    for (const auto& l : lattices)
        out.push_back(pattern_counts(l));
    return out;
}

} // namespace

std::vector<double> population_diversity(std::span<const MaterialLattice> population, double epsilon) {
    if (population.size() < 2)
        throw Error(ErrorCode::empty_input, "diversity needs at least 2 lattices, got " +
                                                std::to_string(population.size()));
    const auto counts = all_counts(population);
    std::vector<double> out(population.size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::size_t j = 0; j < counts.size(); ++j)
            if (i != j)
                out[i] += pattern_kl(counts[i], counts[j], epsilon);
        out[i] /= double(counts.size() - 1);
    }
    return out;
}

std::vector<double> divergence_from_seed(std::span<const MaterialLattice> population,
                                         std::span<const MaterialLattice> seed, double epsilon) {
    if (seed.empty())
        throw Error(ErrorCode::empty_input, "seed population is empty");
    if (population.empty())
        throw Error(ErrorCode::empty_input, "population is empty");
    const auto pc = all_counts(population);
    const auto sc = all_counts(seed);
    std::vector<double> out(pc.size(), 0.0);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        for (const auto& s : sc)
            out[i] += pattern_kl(pc[i], s, epsilon);
        out[i] /= double(sc.size());
    }
    return out;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw Error(ErrorCode::dimension_mismatch, "pearson series differ in length");
    const std::size_t n = xs.size();
    if (n < 2)
        return std::nullopt;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(n);
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport latent_phenotype_correlation(std::span<const MaterialLattice> population,
                                               const AutoencoderModel& model, double epsilon) {
    if (population.size() < 3)
        throw Error(ErrorCode::empty_input, "correlation needs at least 3 lattices, got " +
                                                std::to_string(population.size()));
    const auto latents = model.encode_batch(population);
    const auto counts = all_counts(population);
    CorrelationReport report;
    for (std::size_t i = 0; i < population.size(); ++i)
        for (std::size_t j = 0; j < population.size(); ++j) {
            if (i == j)
                continue;
            report.latent_distances.push_back(euclidean_distance(latents[i], latents[j]));
            report.divergences.push_back(pattern_kl(counts[i], counts[j], epsilon));
        }
    report.r = pearson(report.latent_distances, report.divergences);
    return report;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty())
        return {};
    const double n = double(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1)
        return {mean, 0.0};
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

double ci95(std::span<const double> values) {
    if (values.size() < 2)
        return 0.0;
    return 1.96 * mean_std(values).std / std::sqrt(double(values.size()));
}

ReconstructionMatrix reconstruction_matrix(std::span<const NamedModel> models,
                                           std::span<const NamedPopulations> groups) {
    ReconstructionMatrix m;
    for (const auto& g : groups)
        m.groups.push_back(g.name);
    for (const auto& nm : models) {
        if (!nm.model)
            throw Error(ErrorCode::invalid_argument, "model '" + nm.name + "' is missing");
        m.models.push_back(nm.name);
        std::vector<MeanStd> row;
        std::vector<double> pooled;
        for (const auto& g : groups) {
            std::vector<double> errors;
            for (const auto& pop : g.populations)
                errors.push_back(reconstruction_error(*nm.model, pop));
            row.push_back(mean_std(errors));
            pooled.insert(pooled.end(), errors.begin(), errors.end());
        }
        m.cells.push_back(std::move(row));
        m.overall.push_back(mean_std(pooled));
    }
    return m;
}

std::string reconstruction_matrix_csv(const ReconstructionMatrix& m) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "model";
    for (const auto& g : m.groups)
        os << ',' << g << "_mean," << g << "_std";
    os << ",overall_mean,overall_std\n";
    for (std::size_t r = 0; r < m.models.size(); ++r) {
        os << m.models[r];
        for (const auto& c : m.cells[r])
            os << ',' << c.mean << ',' << c.std;
        os << ',' << m.overall[r].mean << ',' << m.overall[r].std << '\n';
    }
    return os.str();
}

} // namespace voxnox
