#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxnox/autoencoder.hpp"
#include "voxnox/lattice.hpp"
#include "voxnox/neat.hpp"
#include "voxnox/novelty.hpp"

namespace voxnox {

enum class Strategy { static_model, random, latest_set, full_history, novelty_archive };

std::string_view strategy_name(Strategy s);
// Throws Error(invalid_argument) naming the valid strategies.
Strategy parse_strategy(std::string_view name);
std::string valid_strategies();

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
    Strategy strategy = Strategy::novelty_archive;
    int iterations = 10;
    int populations = 10;
    int generations_per_phase = 100;
    int neighbors = 15;           // k nearest neighbours for novelty
    int archive_inserts = 3;      // per population per generation
    int latest_set_size = 100;    // most novel finals taken per population
    int lattice_size = 20;
    std::uint64_t seed = 42;
    NeatParams neat;              // population_size lives here
    AutoencoderConfig autoencoder;

    void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing fields keep their defaults; unknown fields and bad values are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Everything one population carries between generations.
struct PopulationState {
    NeatPopulation neat;
    Rng rng;
    NoveltyArchive archive;
    // Last evaluated generation: lattices (empty when infeasible) and scores.
    std::vector<MaterialLattice> lattices;
    std::vector<std::uint8_t> feasible;
    std::vector<double> novelty;
};

struct Evaluation {
    std::vector<MaterialLattice> lattices;
    std::vector<std::uint8_t> feasible;
};

Evaluation evaluate_genomes(std::span<const CppnGenome> genomes, Dims dims);

struct RunState {
    ExperimentConfig config;
    int completed_phases = 0;
    std::vector<PopulationState> populations;
    AutoencoderModel model;
    // latest_set selection of every completed exploration phase, oldest first.
    std::vector<std::vector<MaterialLattice>> phase_selections;
};

RunState bootstrap(const ExperimentConfig& cfg);

struct GenerationStats {
    int phase = 0;
    int generation = 0;
    int population = 0;
    int feasible = 0;
    int archive_size = 0;
    int species = 0;
    bool reseeded = false;
    double mean_novelty = 0.0;
    double max_novelty = 0.0;
    double mean_kl = 0.0; // NaN when fewer than two feasible lattices
    double kl_ci95 = 0.0;
    double bbox_w = 0.0, bbox_h = 0.0, bbox_d = 0.0;
    double symmetry = 0.0;
    double instability = 0.0;
    double surface_area = 0.0;
};

using StatsSink = std::function<void(const GenerationStats&)>;
using LogSink = std::function<void(const std::string&)>;

// Runs one population for the configured generations under `model`. The last
// generation is evaluated but not reproduced.
void explore_population(PopulationState& pop, int population_index, int phase, const ExperimentConfig& cfg,
                        const AutoencoderModel& model, const StatsSink& stats, const LogSink& log);

void exploration_phase(RunState& state, int phase, const StatsSink& stats, const LogSink& log);

// The most novel feasible finals of one population, highest first.
std::vector<MaterialLattice> latest_selection(const PopulationState& pop, int count, const LogSink& log = {});

std::vector<MaterialLattice> assemble_training_set(const RunState& state, Strategy strategy);

void transformation_phase(RunState& state, int phase, const LogSink& log);

struct RunOptions {
    // Stop (as if killed) once this many checkpoints have been written in this call.
    std::optional<int> stop_after_checkpoints;
    // Reuse the bootstrap/ directory of another run with a compatible config.
    std::optional<std::filesystem::path> bootstrap_from;
};

enum class RunStatus { completed, interrupted };

RunStatus run(const ExperimentConfig& cfg, const std::filesystem::path& dir, const RunOptions& options = {});
RunStatus resume(const std::filesystem::path& dir, const RunOptions& options = {});

// Loads the state as of the last completed transformation (phase 0 = bootstrap).
RunState load_checkpoint(const std::filesystem::path& dir, std::optional<int> phase = std::nullopt);

std::filesystem::path phase_dir(const std::filesystem::path& run, int phase);
std::filesystem::path population_file(const std::filesystem::path& phase_dir, int population);
std::filesystem::path archive_file(const std::filesystem::path& phase_dir, int population);

nlohmann::json population_to_json(const PopulationState& pop);
PopulationState population_from_json(const nlohmann::json& j, Dims dims);

// Worker count: VOXNOX_THREADS if set, otherwise the hardware concurrency.
int worker_threads();
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace voxnox
