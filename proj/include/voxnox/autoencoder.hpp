#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxnox/lattice.hpp"
#include "voxnox/nn/layers.hpp"
#include "voxnox/nn/weights.hpp"

namespace voxnox {

using LatentVector = std::vector<double>;

struct AutoencoderConfig {
    int lattice_size = 20;
    int latent_dim = 256;
    std::array<int, 3> widths{32, 64, 128}; // encoder conv widths; the decoder mirrors them
    int head_width = 16;                    // last decoder block before the 1x1 projection
    int epochs = 100;
    int batch_size = 64;
    nn::AdamOptions adam;

    void validate() const;
};

nlohmann::json autoencoder_config_to_json(const AutoencoderConfig& cfg);
AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j);

struct TrainingRecord {
    std::vector<double> loss_history; // mean loss per epoch
    std::size_t samples = 0;
    std::uint64_t data_fingerprint = 0;
    std::uint64_t shuffle_seed = 0;
};

class AutoencoderModel {
public:
    explicit AutoencoderModel(AutoencoderConfig cfg = {}, std::uint64_t init_seed = 0);

    const AutoencoderConfig& config() const { return cfg_; }
    std::uint64_t init_seed() const { return init_seed_; }
    const TrainingRecord& record() const { return record_; }

    // Fresh Glorot weights from the init seed, Adam state cleared.
    void reinitialize();

    // Thread-safe: inference never touches layer caches.
    LatentVector encode(const MaterialLattice& lattice) const;
    std::vector<LatentVector> encode_batch(std::span<const MaterialLattice> lattices) const;
    MaterialLattice reconstruct(const MaterialLattice& lattice) const;
    std::vector<MaterialLattice> reconstruct_batch(std::span<const MaterialLattice> lattices) const;

    // Re-initializes, then runs minibatch Adam on softmax cross-entropy with a
    // per-epoch shuffle drawn from `shuffle_seed`. Epochs/batch from the config.
    const TrainingRecord& train(std::span<const MaterialLattice> lattices, std::uint64_t shuffle_seed);

    std::vector<nn::NamedTensor> weights() const;
    void set_weights(std::span<const nn::NamedTensor> tensors);

    nlohmann::json manifest() const;
    // Writes <dir>/model.bin, then <dir>/model.json.
    void save(const std::filesystem::path& dir) const;
    static AutoencoderModel load(const std::filesystem::path& dir);

private:
    nn::Tensor<float> batch_input(std::span<const MaterialLattice> lattices) const;
    void check_lattice(const MaterialLattice& lattice) const;

    AutoencoderConfig cfg_;
    std::uint64_t init_seed_;
    nn::Sequential<float> encoder_;
    nn::Sequential<float> decoder_;
    TrainingRecord record_;
};

// Percentage of misclassified voxels, averaged per lattice.
double reconstruction_error(const AutoencoderModel& model, std::span<const MaterialLattice> lattices);

double reconstruction_error(const MaterialLattice& original, const MaterialLattice& reconstructed);

std::uint64_t data_fingerprint(std::span<const MaterialLattice> lattices);

} // namespace voxnox
