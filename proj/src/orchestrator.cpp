#include "voxnox/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "voxnox/cppn.hpp"
#include "voxnox/io.hpp"
#include "voxnox/metrics.hpp"

namespace voxnox {

namespace fs = std::filesystem;

namespace {

constexpr Strategy kStrategies[] = {Strategy::static_model, Strategy::random, Strategy::latest_set,
                                    Strategy::full_history, Strategy::novelty_archive};

void reject_unknown(const nlohmann::json& obj, const std::string& where,
                    std::initializer_list<std::string_view> known) {
    for (const auto& item : obj.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw Error(ErrorCode::format, where + ": unknown field '" + item.key() + "'");
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
    if (!j.contains(key))
        return;
    try {
        field = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::format, std::string("config.") + key + ": unexpected value " + j.at(key).dump());
    }
}

std::uint64_t ae_init_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, "ae-init"); }

std::string format_number(double v) {
    if (std::isnan(v))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string two_digits(int v) {
    std::ostringstream os;
    os << std::setw(2) << std::setfill('0') << v;
    return os.str();
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path.string(), j.dump(1) + "\n"); }

} // namespace

std::string_view strategy_name(Strategy s) {
    switch (s) {
    case Strategy::static_model: return "static";
    case Strategy::random: return "random";
    case Strategy::latest_set: return "latest_set";
    case Strategy::full_history: return "full_history";
    case Strategy::novelty_archive: return "novelty_archive";
    }
    return "?";
}

std::string valid_strategies() {
    std::string out;
    for (Strategy s : kStrategies)
        out += (out.empty() ? "" : ", ") + std::string(strategy_name(s));
    return out;
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : kStrategies)
        if (strategy_name(s) == name)
            return s;
    throw Error(ErrorCode::invalid_argument,
                "unknown strategy '" + std::string(name) + "' (valid: " + valid_strategies() + ")");
}

void ExperimentConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1)
            throw Error(ErrorCode::invalid_argument, std::string("config.") + name + " must be >= 1");
    };
    positive(iterations, "iterations");
    positive(populations, "populations");
    positive(generations_per_phase, "generations_per_phase");
    positive(neighbors, "neighbors");
    positive(latest_set_size, "latest_set_size");
    if (archive_inserts < 0)
        throw Error(ErrorCode::invalid_argument, "config.archive_inserts must be >= 0");
    if (lattice_size < 2)
        throw Error(ErrorCode::invalid_argument, "config.lattice_size must be >= 2");
    if (autoencoder.lattice_size != lattice_size)
        throw Error(ErrorCode::invalid_argument, "config.autoencoder.lattice_size must equal config.lattice_size");
    neat.validate();
    autoencoder.validate();
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return {
        {"schema_version", kConfigSchemaVersion},
        {"strategy", strategy_name(cfg.strategy)},
        {"iterations", cfg.iterations},
        {"populations", cfg.populations},
        {"generations_per_phase", cfg.generations_per_phase},
        {"neighbors", cfg.neighbors},
        {"archive_inserts", cfg.archive_inserts},
        {"latest_set_size", cfg.latest_set_size},
        {"lattice_size", cfg.lattice_size},
        {"seed", cfg.seed},
        {"neat", neat_params_to_json(cfg.neat)},
        {"autoencoder", autoencoder_config_to_json(cfg.autoencoder)},
    };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw Error(ErrorCode::format, "config: expected a JSON object");
    reject_unknown(j, "config",
                   {"schema_version", "strategy", "iterations", "populations", "generations_per_phase", "neighbors",
                    "archive_inserts", "latest_set_size", "lattice_size", "seed", "neat", "autoencoder"});
    int version = kConfigSchemaVersion;
    read_field(j, "schema_version", version);
    if (version != kConfigSchemaVersion)
        throw Error(ErrorCode::format, "config.schema_version: unsupported version " + std::to_string(version));
    ExperimentConfig cfg;
    std::string strategy(strategy_name(cfg.strategy));
    read_field(j, "strategy", strategy);
    cfg.strategy = parse_strategy(strategy);
    read_field(j, "iterations", cfg.iterations);
    read_field(j, "populations", cfg.populations);
    read_field(j, "generations_per_phase", cfg.generations_per_phase);
    read_field(j, "neighbors", cfg.neighbors);
    read_field(j, "archive_inserts", cfg.archive_inserts);
    read_field(j, "latest_set_size", cfg.latest_set_size);
    read_field(j, "lattice_size", cfg.lattice_size);
    read_field(j, "seed", cfg.seed);
    if (j.contains("neat"))
        cfg.neat = neat_params_from_json(j.at("neat"));
    nlohmann::json ae = j.value("autoencoder", nlohmann::json::object());
    if (!ae.is_object())
        throw Error(ErrorCode::format, "config.autoencoder: expected a JSON object");
    if (!ae.contains("lattice_size"))
        ae["lattice_size"] = cfg.lattice_size;
    cfg.autoencoder = autoencoder_config_from_json(ae);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    try {
        return config_from_json(read_json(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.detail());
    }
}

int worker_threads() {
    if (const char* env = std::getenv("VOXNOX_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1)
            return n;
    }
    return std::max(1, int(std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(count, std::size_t(worker_threads()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::mutex mutex;
    std::size_t next = 0;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mutex);
                if (next >= count || error)
                    return;
                i = next++;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < workers; ++t)
        threads.emplace_back(worker);
    for (auto& t : threads)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

Evaluation evaluate_genomes(std::span<const CppnGenome> genomes, Dims dims) {
    Evaluation e;
    e.lattices.reserve(genomes.size());
    for (const auto& g : genomes) {
        auto r = repair_pipeline(generate_hull(g, dims));
        e.feasible.push_back(r.feasible ? 1 : 0);
        e.lattices.push_back(r.feasible ? std::move(r.lattice) : MaterialLattice());
    }
    return e;
}

namespace {

Dims lattice_dims(const ExperimentConfig& cfg) { return Dims{cfg.lattice_size, cfg.lattice_size, cfg.lattice_size}; }

std::vector<MaterialLattice> feasible_lattices(const PopulationState& pop) {
    std::vector<MaterialLattice> out;
    for (std::size_t i = 0; i < pop.lattices.size(); ++i)
        if (pop.feasible[i])
            out.push_back(pop.lattices[i]);
    return out;
}

void fill_evaluation(PopulationState& pop, Dims dims) {
    auto e = evaluate_genomes(pop.neat.genomes, dims);
    pop.lattices = std::move(e.lattices);
    pop.feasible = std::move(e.feasible);
}

} // namespace

RunState bootstrap(const ExperimentConfig& cfg) {
    cfg.validate();
    RunState state{cfg, 0, {}, AutoencoderModel(cfg.autoencoder, ae_init_seed(cfg)), {}};
    state.populations.resize(std::size_t(cfg.populations));
    const Dims dims = lattice_dims(cfg);
    parallel_for(state.populations.size(), [&](std::size_t p) {
        auto& pop = state.populations[p];
        pop.rng = Rng(derive_seed(cfg.seed, "population", {p}));
        pop.neat = seed_population(cfg.neat, pop.rng);
        fill_evaluation(pop, dims);
        pop.novelty.assign(pop.neat.genomes.size(), 0.0);
    });
    std::vector<MaterialLattice> seeds;
    for (const auto& pop : state.populations)
        for (auto& l : feasible_lattices(pop))
            seeds.push_back(std::move(l));
    if (seeds.size() < 2)
        throw Error(ErrorCode::degenerate, "bootstrap produced " + std::to_string(seeds.size()) +
                                               " feasible seed lattices; at least 2 are needed");
    state.model.train(seeds, derive_seed(cfg.seed, "ae-shuffle", {0}));
    return state;
}

void explore_population(PopulationState& pop, int population_index, int phase, const ExperimentConfig& cfg,
                        const AutoencoderModel& model, const StatsSink& stats, const LogSink& log) {
    const Dims dims = lattice_dims(cfg);
    for (int g = 0; g < cfg.generations_per_phase; ++g) {
        fill_evaluation(pop, dims);
        const std::size_t n = pop.neat.genomes.size();
        std::vector<std::size_t> feasible_idx;
        std::vector<MaterialLattice> feasible;
        for (std::size_t i = 0; i < n; ++i)
            if (pop.feasible[i]) {
                feasible_idx.push_back(i);
                feasible.push_back(pop.lattices[i]);
            }
        const auto latents = model.encode_batch(feasible);
        const auto scores = population_novelty(latents, pop.archive, std::size_t(cfg.neighbors));
        pop.novelty.assign(n, 0.0);
        std::vector<ArchiveCandidate> candidates;
        for (std::size_t f = 0; f < feasible_idx.size(); ++f) {
            pop.novelty[feasible_idx[f]] = scores[f];
            candidates.push_back({&pop.lattices[feasible_idx[f]], latents[f], scores[f]});
        }
        for (std::size_t i = 0; i < n; ++i)
            pop.neat.genomes[i].fitness = pop.novelty[i];
        update_archive(pop.archive, candidates, phase, g, std::size_t(cfg.archive_inserts));

        GenerationStats s;
        s.phase = phase;
        s.generation = g;
        s.population = population_index;
        s.feasible = int(feasible.size());
        s.archive_size = int(pop.archive.size());
        s.species = int(pop.neat.species.species.size());
        s.reseeded = feasible.empty();
        if (!scores.empty()) {
            s.mean_novelty = std::accumulate(scores.begin(), scores.end(), 0.0) / double(scores.size());
            s.max_novelty = *std::max_element(scores.begin(), scores.end());
        }
        if (feasible.size() >= 2) {
            const auto kl = population_diversity(feasible);
            s.mean_kl = mean_std(kl).mean;
            s.kl_ci95 = ci95(kl);
        } else {
            s.mean_kl = std::nan("");
        }
        for (const auto& l : feasible) {
            const auto st = structural_stats(l);
            s.bbox_w += st.bounding_box[0];
            s.bbox_h += st.bounding_box[1];
            s.bbox_d += st.bounding_box[2];
            s.symmetry += st.symmetry;
            s.instability += st.instability;
            s.surface_area += st.surface_area;
        }
        if (!feasible.empty()) {
            const double m = double(feasible.size());
            for (double* v : {&s.bbox_w, &s.bbox_h, &s.bbox_d, &s.symmetry, &s.instability, &s.surface_area})
                *v /= m;
        }
        if (stats)
            stats(s);

        if (g + 1 < cfg.generations_per_phase) {
            const auto report = next_generation(pop.neat, pop.novelty, pop.feasible, cfg.neat, pop.rng);
            if (report.reseeded && log)
                log("phase " + std::to_string(phase) + " population " + std::to_string(population_index) +
                    " generation " + std::to_string(g) + ": no feasible individuals, population reseeded");
        }
    }
}

std::vector<MaterialLattice> latest_selection(const PopulationState& pop, int count, const LogSink& log) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < pop.feasible.size(); ++i)
        if (pop.feasible[i])
            order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pop.novelty[a] > pop.novelty[b]; });
    if (order.size() < std::size_t(count) && log)
        log("only " + std::to_string(order.size()) + " feasible finals, wanted " + std::to_string(count));
    order.resize(std::min(order.size(), std::size_t(count)));
    std::vector<MaterialLattice> out;
    for (std::size_t i : order)
        out.push_back(pop.lattices[i]);
    return out;
}

namespace {

std::vector<MaterialLattice> phase_selection(const RunState& state, const LogSink& log) {
    std::vector<MaterialLattice> out;
    for (std::size_t p = 0; p < state.populations.size(); ++p) {
        LogSink tagged;
        if (log)
            tagged = [&](const std::string& msg) { log("population " + std::to_string(p) + ": " + msg); };
        for (auto& l : latest_selection(state.populations[p], state.config.latest_set_size, tagged))
            out.push_back(std::move(l));
    }
    return out;
}

} // namespace

void exploration_phase(RunState& state, int phase, const StatsSink& stats, const LogSink& log) {
    const std::size_t count = state.populations.size();
    std::vector<std::vector<GenerationStats>> rows(count);
    std::vector<std::vector<std::string>> messages(count);
    parallel_for(count, [&](std::size_t p) {
        explore_population(
            state.populations[p], int(p), phase, state.config, state.model,
            [&rows, p](const GenerationStats& s) { rows[p].push_back(s); },
            [&messages, p](const std::string& m) { messages[p].push_back(m); });
    });
    for (std::size_t p = 0; p < count; ++p) {
        if (stats)
            for (const auto& s : rows[p])
                stats(s);
        if (log)
            for (const auto& m : messages[p])
                log(m);
    }
    const bool uses_selection =
        state.config.strategy == Strategy::latest_set || state.config.strategy == Strategy::full_history;
    state.phase_selections.push_back(phase_selection(state, uses_selection ? log : LogSink{}));
}

std::vector<MaterialLattice> assemble_training_set(const RunState& state, Strategy strategy) {
    std::vector<MaterialLattice> out;
    switch (strategy) {
    case Strategy::static_model:
    case Strategy::random:
        break;
    case Strategy::latest_set:
        if (!state.phase_selections.empty())
            out = state.phase_selections.back();
        break;
    case Strategy::full_history:
        for (const auto& sel : state.phase_selections)
            out.insert(out.end(), sel.begin(), sel.end());
        break;
    case Strategy::novelty_archive: {
        std::unordered_set<std::uint64_t> seen_hashes;
        for (const auto& pop : state.populations)
            for (const auto& e : pop.archive.entries()) {
                const auto h = fingerprint(e.lattice);
                if (seen_hashes.count(h) &&
                    std::any_of(out.begin(), out.end(), [&](const MaterialLattice& l) { return l == e.lattice; }))
                    continue;
                seen_hashes.insert(h);
                out.push_back(e.lattice);
            }
        break;
    }
    }
    return out;
}

void transformation_phase(RunState& state, int phase, const LogSink& log) {
    const auto& cfg = state.config;
    switch (cfg.strategy) {
    case Strategy::static_model:
        break;
    case Strategy::random:
        state.model = AutoencoderModel(cfg.autoencoder, derive_seed(cfg.seed, "ae-random", {std::uint64_t(phase)}));
        break;
    default: {
        const auto set = assemble_training_set(state, cfg.strategy);
        if (set.empty())
            throw Error(ErrorCode::empty_input, "phase " + std::to_string(phase) + ": " +
                                                    std::string(strategy_name(cfg.strategy)) +
                                                    " training set is empty");
        if (log)
            log("phase " + std::to_string(phase) + ": training on " + std::to_string(set.size()) + " lattices");
        AutoencoderModel model(cfg.autoencoder, ae_init_seed(cfg));
        model.train(set, derive_seed(cfg.seed, "ae-shuffle", {std::uint64_t(phase)}));
        state.model = std::move(model);
        break;
    }
    }
    parallel_for(state.populations.size(),
                 [&](std::size_t p) { reencode_archive(state.populations[p].archive, state.model); });
    state.completed_phases = phase;
}

// --- persistence ---------------------------------------------------------

fs::path phase_dir(const fs::path& run, int phase) {
    return phase == 0 ? run / "bootstrap" : run / ("phase_" + two_digits(phase));
}

fs::path population_file(const fs::path& dir, int population) {
    return dir / ("population_" + two_digits(population) + ".json");
}

fs::path archive_file(const fs::path& dir, int population) {
    return dir / ("archive_" + two_digits(population) + ".json");
}

nlohmann::json population_to_json(const PopulationState& pop) {
    auto genomes = nlohmann::json::array();
    for (const auto& g : pop.neat.genomes)
        genomes.push_back(genome_to_json(g));
    return {
        {"generation", pop.neat.generation},
        {"rng", rng_state(pop.rng)},
        {"registry", pop.neat.registry.to_json()},
        {"species", species_state_to_json(pop.neat.species)},
        {"genomes", genomes},
        {"feasible", pop.feasible},
        {"novelty", pop.novelty},
    };
}

PopulationState population_from_json(const nlohmann::json& j, Dims dims) {
    PopulationState pop;
    try {
        pop.neat.generation = j.at("generation").get<int>();
        pop.rng = rng_from_state(j.at("rng").get<std::string>());
        pop.neat.registry = InnovationRegistry::from_json(j.at("registry"));
        pop.neat.species = species_state_from_json(j.at("species"));
        for (const auto& g : j.at("genomes"))
            pop.neat.genomes.push_back(genome_from_json(g));
        pop.novelty = j.at("novelty").get<std::vector<double>>();
        const auto feasible = j.at("feasible").get<std::vector<std::uint8_t>>();
        if (pop.novelty.size() != pop.neat.genomes.size() || feasible.size() != pop.neat.genomes.size())
            throw Error(ErrorCode::format, "population: novelty/feasible length differs from genome count");
        fill_evaluation(pop, dims);
        if (feasible != pop.feasible)
            throw Error(ErrorCode::format, "population: stored feasibility does not match regenerated lattices");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, std::string("population: ") + e.what());
    }
    return pop;
}

namespace {

nlohmann::json bootstrap_identity(const ExperimentConfig& cfg) {
    auto j = config_to_json(cfg);
    for (const char* key : {"strategy", "iterations", "generations_per_phase", "neighbors", "archive_inserts",
                            "latest_set_size"})
        j.erase(key);
    return j;
}

const char* kDiversityHeader = "phase,generation,population,mean_kl,ci95\n";
const char* kStructureHeader =
    "phase,generation,population,feasible,archive_size,species,reseeded,mean_novelty,max_novelty,"
    "bbox_w,bbox_h,bbox_d,symmetry,instability,surface_area\n";
const char* kTrainingHeader = "phase,epoch,loss\n";

class RunWriter {
public:
    RunWriter(fs::path dir, const RunOptions& options) : dir_(std::move(dir)), options_(options) {}

    const fs::path& dir() const { return dir_; }

    void log(const std::string& msg) {
        std::ofstream out(dir_ / "log.txt", std::ios::app);
        out << msg << '\n';
    }

    void ensure_csv(const char* name, const char* header) {
        const fs::path path = dir_ / "metrics" / name;
        if (!fs::exists(path)) {
            fs::create_directories(path.parent_path());
            write_file_atomic(path.string(), header);
        }
    }

    void append_csv(const char* name, const std::string& rows) {
        std::ofstream out(dir_ / "metrics" / name, std::ios::app);
        out << rows;
        if (!out)
            throw Error(ErrorCode::io, "cannot append to metrics/" + std::string(name));
    }

    // Drops rows whose phase column is >= `phase`.
    void truncate_csv(const char* name, int phase) {
        const fs::path path = dir_ / "metrics" / name;
        if (!fs::exists(path))
            return;
        std::istringstream in(read_file(path.string()));
        std::string line, kept;
        bool header = true;
        while (std::getline(in, line)) {
            if (header || std::stoi(line.substr(0, line.find(','))) < phase)
                kept += line + '\n';
            header = false;
        }
        write_file_atomic(path.string(), kept);
    }

    // True when the caller must stop.
    bool checkpoint() {
        ++written_;
        return options_.stop_after_checkpoints && written_ >= *options_.stop_after_checkpoints;
    }

private:
    fs::path dir_;
    RunOptions options_;
    int written_ = 0;
};

std::string stats_rows_diversity(const std::vector<GenerationStats>& rows) {
    std::string out;
    for (const auto& s : rows)
        out += std::to_string(s.phase) + ',' + std::to_string(s.generation) + ',' + std::to_string(s.population) +
               ',' + format_number(s.mean_kl) + ',' + format_number(s.kl_ci95) + '\n';
    return out;
}

std::string stats_rows_structure(const std::vector<GenerationStats>& rows) {
    std::string out;
    for (const auto& s : rows) {
        out += std::to_string(s.phase) + ',' + std::to_string(s.generation) + ',' + std::to_string(s.population) +
               ',' + std::to_string(s.feasible) + ',' + std::to_string(s.archive_size) + ',' +
               std::to_string(s.species) + ',' + (s.reseeded ? "1" : "0");
        for (double v : {s.mean_novelty, s.max_novelty, s.bbox_w, s.bbox_h, s.bbox_d, s.symmetry, s.instability,
                         s.surface_area})
            out += ',' + format_number(v);
        out += '\n';
    }
    return out;
}

std::string training_rows(int phase, const AutoencoderModel& model) {
    std::string out;
    const auto& h = model.record().loss_history;
    for (std::size_t e = 0; e < h.size(); ++e)
        out += std::to_string(phase) + ',' + std::to_string(e) + ',' + format_number(h[e]) + '\n';
    return out;
}

void write_populations(const fs::path& dir, const RunState& state, bool with_archives) {
    fs::create_directories(dir);
    for (std::size_t p = 0; p < state.populations.size(); ++p) {
        write_json(population_file(dir, int(p)), population_to_json(state.populations[p]));
        if (with_archives)
            write_json(archive_file(dir, int(p)), archive_to_json(state.populations[p].archive));
    }
}

void load_populations(const fs::path& dir, RunState& state, bool with_archives) {
    const Dims dims = lattice_dims(state.config);
    state.populations.assign(std::size_t(state.config.populations), PopulationState{});
    parallel_for(state.populations.size(), [&](std::size_t p) {
        auto& pop = state.populations[p];
        pop = population_from_json(read_json(population_file(dir, int(p))), dims);
        if (with_archives)
            pop.archive = archive_from_json(read_json(archive_file(dir, int(p))));
    });
}

bool explored(const fs::path& run, int phase) { return fs::exists(phase_dir(run, phase) / "explored.json"); }
bool transformed(const fs::path& run, int phase) { return fs::exists(phase_dir(run, phase) / "model.json"); }

int last_transformed(const fs::path& run, int iterations) {
    if (!transformed(run, 0))
        return -1;
    int last = 0;
    while (last < iterations && transformed(run, last + 1))
        ++last;
    return last;
}

// Exploration then transformation for phases after `state.completed_phases`.
RunStatus drive(RunState& state, RunWriter& w, bool transform_only_first) {
    const auto& cfg = state.config;
    auto log = [&w](const std::string& m) { w.log(m); };
    for (int phase = state.completed_phases + 1; phase <= cfg.iterations; ++phase) {
        const fs::path dir = phase_dir(w.dir(), phase);
        if (!transform_only_first) {
            w.log("phase " + std::to_string(phase) + ": exploration");
            std::vector<GenerationStats> rows;
            exploration_phase(state, phase, [&rows](const GenerationStats& s) { rows.push_back(s); }, log);
            w.append_csv("diversity.csv", stats_rows_diversity(rows));
            w.append_csv("structure.csv", stats_rows_structure(rows));
            write_populations(dir, state, true);
            write_json(dir / "explored.json",
                       {{"phase", phase}, {"selection_size", state.phase_selections.back().size()}});
            if (w.checkpoint())
                return RunStatus::interrupted;
        }
        transform_only_first = false;
        w.log("phase " + std::to_string(phase) + ": transformation (" + std::string(strategy_name(cfg.strategy)) +
              ")");
        transformation_phase(state, phase, log);
        w.append_csv("training.csv", training_rows(phase, state.model));
        state.model.save(dir);
        if (w.checkpoint())
            return RunStatus::interrupted;
    }
    w.log("run complete");
    return RunStatus::completed;
}

void copy_bootstrap(const fs::path& from, const fs::path& to, const ExperimentConfig& cfg) {
    const fs::path src = phase_dir(from, 0);
    if (!fs::exists(src / "model.json"))
        throw Error(ErrorCode::io, src.string() + " holds no completed bootstrap");
    if (read_json(src / "bootstrap.json") != bootstrap_identity(cfg))
        throw Error(ErrorCode::invalid_argument, src.string() + " was bootstrapped with a different configuration");
    const fs::path dst = phase_dir(to, 0);
    fs::create_directories(dst);
    for (int p = 0; p < cfg.populations; ++p)
        fs::copy_file(population_file(src, p), population_file(dst, p), fs::copy_options::overwrite_existing);
    for (const char* f : {"bootstrap.json", "model.bin", "model.json"})
        fs::copy_file(src / f, dst / f, fs::copy_options::overwrite_existing);
}

} // namespace

RunState load_checkpoint(const fs::path& dir, std::optional<int> phase) {
    const ExperimentConfig cfg = load_config(dir / "config.json");
    const int last = last_transformed(dir, cfg.iterations);
    if (last < 0)
        throw Error(ErrorCode::io, dir.string() + ": no completed checkpoint");
    const int at = phase.value_or(last);
    if (at < 0 || at > last)
        throw Error(ErrorCode::invalid_argument, "phase " + std::to_string(at) + " has no completed checkpoint");
    RunState state{cfg, at, {}, AutoencoderModel::load(phase_dir(dir, at)), {}};
    for (int p = 1; p <= at; ++p) {
        load_populations(phase_dir(dir, p), state, false);
        state.phase_selections.push_back(phase_selection(state, {}));
    }
    load_populations(phase_dir(dir, at), state, at > 0);
    parallel_for(state.populations.size(),
                 [&](std::size_t p) { reencode_archive(state.populations[p].archive, state.model); });
    return state;
}

RunStatus run(const ExperimentConfig& cfg, const fs::path& dir, const RunOptions& options) {
    cfg.validate();
    if (fs::exists(dir) && !fs::is_empty(dir))
        throw Error(ErrorCode::io, dir.string() + " already exists and is not empty; use resume");
    fs::create_directories(dir);
    write_json(dir / "config.json", config_to_json(cfg));
    RunWriter w(dir, options);
    w.ensure_csv("diversity.csv", kDiversityHeader);
    w.ensure_csv("structure.csv", kStructureHeader);
    w.ensure_csv("training.csv", kTrainingHeader);
    w.log("strategy " + std::string(strategy_name(cfg.strategy)) + ", seed " + std::to_string(cfg.seed));
    if (options.bootstrap_from) {
        w.log("bootstrap copied from " + options.bootstrap_from->string());
        copy_bootstrap(*options.bootstrap_from, dir, cfg);
        RunState state = load_checkpoint(dir, 0);
        w.append_csv("training.csv", training_rows(0, state.model));
        if (w.checkpoint())
            return RunStatus::interrupted;
        return drive(state, w, false);
    }
    return resume(dir, options);
}

RunStatus resume(const fs::path& dir, const RunOptions& options) {
    const ExperimentConfig cfg = load_config(dir / "config.json");
    RunWriter w(dir, options);
    w.ensure_csv("diversity.csv", kDiversityHeader);
    w.ensure_csv("structure.csv", kStructureHeader);
    w.ensure_csv("training.csv", kTrainingHeader);
    const int last = last_transformed(dir, cfg.iterations);
    if (last < 0) {
        w.truncate_csv("training.csv", 0);
        w.log("bootstrap");
        RunState state = bootstrap(cfg);
        const fs::path b = phase_dir(dir, 0);
        write_populations(b, state, false);
        write_json(b / "bootstrap.json", bootstrap_identity(cfg));
        w.append_csv("training.csv", training_rows(0, state.model));
        state.model.save(b);
        if (w.checkpoint())
            return RunStatus::interrupted;
        return drive(state, w, false);
    }
    if (last == cfg.iterations) {
        w.log("resume: run already complete");
        return RunStatus::completed;
    }
    RunState state = load_checkpoint(dir, last);
    const int next = last + 1;
    w.truncate_csv("training.csv", next);
    if (explored(dir, next)) {
        w.log("resume: phase " + std::to_string(next) + " explored, continuing with transformation");
        load_populations(phase_dir(dir, next), state, true);
        state.phase_selections.push_back(phase_selection(state, {}));
        return drive(state, w, true);
    }
    w.log("resume: continuing from phase " + std::to_string(last));
    w.truncate_csv("diversity.csv", next);
    w.truncate_csv("structure.csv", next);
    return drive(state, w, false);
}

} // namespace voxnox
