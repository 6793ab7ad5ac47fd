#include "voxnox/novelty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxnox {

double euclidean_distance(const LatentVector& a, const LatentVector& b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::dimension_mismatch, "latent vectors of length " + std::to_string(a.size()) + " and " +
                                                       std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

double mean_of_smallest(std::vector<double>& distances, std::size_t k) {
    if (distances.empty() || k == 0)
        return 0.0;
    const std::size_t take = std::min(k, distances.size());
    std::stable_sort(distances.begin(), distances.end());
    return std::accumulate(distances.begin(), distances.begin() + long(take), 0.0) / double(take);
}

} // namespace

double novelty_score(const LatentVector& subject, std::span<const LatentVector> pool, std::size_t k) {
    std::vector<double> distances;
    distances.reserve(pool.size());
    for (const auto& v : pool)
        distances.push_back(euclidean_distance(subject, v));
    return mean_of_smallest(distances, k);
}

std::vector<double> population_novelty(std::span<const LatentVector> population, const NoveltyArchive& archive,
                                       std::size_t k) {
    std::vector<double> scores(population.size());
    std::vector<double> distances;
    for (std::size_t i = 0; i < population.size(); ++i) {
        distances.clear();
        for (std::size_t j = 0; j < population.size(); ++j)
            if (j != i)
                distances.push_back(euclidean_distance(population[i], population[j]));
        for (const auto& e : archive.entries())
            distances.push_back(euclidean_distance(population[i], e.latent));
        scores[i] = mean_of_smallest(distances, k);
    }
    return scores;
}

bool NoveltyArchive::contains(const MaterialLattice& lattice) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const ArchiveEntry& e) { return e.lattice == lattice; });
}

bool NoveltyArchive::insert(ArchiveEntry entry) {
    if (contains(entry.lattice))
        return false;
    entries_.push_back(std::move(entry));
    return true;
}

std::vector<LatentVector> NoveltyArchive::latents() const {
    std::vector<LatentVector> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_)
        out.push_back(e.latent);
    return out;
}

std::vector<MaterialLattice> NoveltyArchive::lattices() const {
    std::vector<MaterialLattice> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_)
        out.push_back(e.lattice);
    return out;
}

void NoveltyArchive::set_latent(std::size_t i, LatentVector latent) { entries_.at(i).latent = std::move(latent); }

std::size_t update_archive(NoveltyArchive& archive, std::span<const ArchiveCandidate> candidates, int phase,
                           int generation, std::size_t max_inserts) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });
    std::size_t inserted = 0;
    for (std::size_t i = 0; i < std::min(order.size(), max_inserts); ++i) {
        const auto& c = candidates[order[i]];
        if (archive.insert({*c.lattice, c.latent, phase, generation}))
            ++inserted;
    }
    return inserted;
}

void reencode_archive(NoveltyArchive& archive, const AutoencoderModel& model) {
    const auto lattices = archive.lattices();
    auto latents = model.encode_batch(lattices);
    for (std::size_t i = 0; i < latents.size(); ++i)
        archive.set_latent(i, std::move(latents[i]));
}

nlohmann::json archive_to_json(const NoveltyArchive& archive) {
    auto entries = nlohmann::json::array();
    for (const auto& e : archive.entries())
        entries.push_back({{"phase", e.phase},
                           {"generation", e.generation},
                           {"latent", e.latent},
                           {"lattice", lattice_to_json(e.lattice)}});
    return {{"entries", entries}};
}

NoveltyArchive archive_from_json(const nlohmann::json& j) {
    NoveltyArchive archive;
    try {
        for (const auto& e : j.at("entries")) {
            ArchiveEntry entry{lattice_from_json(e.at("lattice")), e.at("latent").get<LatentVector>(),
                               e.at("phase").get<int>(), e.at("generation").get<int>()};
            if (!archive.insert(std::move(entry)))
                throw Error(ErrorCode::format, "archive holds a duplicate lattice");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, std::string("archive: ") + e.what());
    }
    return archive;
}

} // namespace voxnox
