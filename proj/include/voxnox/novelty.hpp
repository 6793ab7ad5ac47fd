#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxnox/autoencoder.hpp"
#include "voxnox/lattice.hpp"

namespace voxnox {

double euclidean_distance(const LatentVector& a, const LatentVector& b);

// Mean distance from `subject` to its k nearest vectors in `pool` (all of them
// when the pool is smaller than k, 0 when it is empty).
double novelty_score(const LatentVector& subject, std::span<const LatentVector> pool, std::size_t k = 15);

struct ArchiveEntry {
    MaterialLattice lattice;
    LatentVector latent;
    int phase = 0;
    int generation = 0;
};

class NoveltyArchive {
public:
    const std::vector<ArchiveEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    bool contains(const MaterialLattice& lattice) const;
    // Returns false (and leaves the archive alone) for a duplicate lattice.
    bool insert(ArchiveEntry entry);
    std::vector<LatentVector> latents() const;
    std::vector<MaterialLattice> lattices() const;
    void set_latent(std::size_t i, LatentVector latent);

private:
    std::vector<ArchiveEntry> entries_;
};

struct ArchiveCandidate {
    const MaterialLattice* lattice = nullptr;
    LatentVector latent;
    double score = 0.0;
};

// Scores every member of `population` against the other members plus the archive.
std::vector<double> population_novelty(std::span<const LatentVector> population, const NoveltyArchive& archive,
                                       std::size_t k = 15);

// Considers the `max_inserts` highest-scoring candidates and inserts those not
// already archived. Returns the number inserted.
std::size_t update_archive(NoveltyArchive& archive, std::span<const ArchiveCandidate> candidates, int phase,
                           int generation, std::size_t max_inserts = 3);

void reencode_archive(NoveltyArchive& archive, const AutoencoderModel& model);

nlohmann::json archive_to_json(const NoveltyArchive& archive);
NoveltyArchive archive_from_json(const nlohmann::json& j);

} // namespace voxnox
