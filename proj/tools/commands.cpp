#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "voxnox/autoencoder.hpp"
#include "voxnox/io.hpp"
#include "voxnox/metrics.hpp"
#include "voxnox/orchestrator.hpp"

namespace voxnox::cli {

namespace fs = std::filesystem;

namespace {

std::string two_digits(int v) {
    std::ostringstream os;
    os << std::setw(2) << std::setfill('0') << v;
    return os.str();
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

void emit(const std::optional<fs::path>& file, const std::string& text, std::ostream& out) {
    if (file)
        write_file_atomic(file->string(), text);
    else
        out << text;
}

std::vector<MaterialLattice> load_all(const std::vector<fs::path>& files) {
    std::vector<MaterialLattice> out;
    for (const auto& f : files)
        out.push_back(load_lattice(f.string()));
    return out;
}

std::vector<MaterialLattice> feasible_finals(const PopulationState& pop) {
    std::vector<MaterialLattice> out;
    for (std::size_t i = 0; i < pop.lattices.size(); ++i)
        if (pop.feasible[i])
            out.push_back(pop.lattices[i]);
    return out;
}

// Runs `body`, mapping library errors to exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::invalid_argument ? kUsage : kFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

} // namespace

std::vector<MaterialLattice> cuboid_lattices(int count, std::uint64_t seed, Dims dims, int min_side, int max_side) {
    if (count < 0)
        throw Error(ErrorCode::invalid_argument, "count must be >= 0");
    if (min_side < 1 || max_side < min_side || max_side > std::min({dims.x, dims.y, dims.z}))
        throw Error(ErrorCode::invalid_argument, "cuboid sides must satisfy 1 <= min <= max <= lattice size");
    Rng rng(derive_seed(seed, "cubes"));
    std::vector<MaterialLattice> out;
    while (int(out.size()) < count) {
        const int w = uniform_int(rng, min_side, max_side);
        const int h = uniform_int(rng, min_side, max_side);
        const int d = uniform_int(rng, min_side, max_side);
        const int x0 = uniform_int(rng, 0, dims.x - w);
        const int z0 = uniform_int(rng, 0, dims.z - d);
        BooleanLattice hull(dims, 0);
        for (int j = 0; j < h; ++j)
            for (int k = z0; k < z0 + d; ++k)
                for (int i = x0; i < x0 + w; ++i)
                    hull.at(i, j, k) = 1;
        auto r = repair_pipeline(hull);
        if (r.feasible)
            out.push_back(std::move(r.lattice));
    }
    return out;
}

std::vector<fs::path> lattice_files(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw Error(ErrorCode::io, dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && (e.path().extension() == ".json" || e.path().extension() == ".csv"))
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        ExperimentConfig cfg = load_config(args.config);
        if (args.strategy)
            cfg.strategy = parse_strategy(*args.strategy);
        if (args.seed)
            cfg.seed = *args.seed;
        RunOptions options;
        options.stop_after_checkpoints = args.stop_after;
        options.bootstrap_from = args.bootstrap_from;
        const auto status = run(cfg, args.out, options);
        out << (status == RunStatus::completed ? "completed " : "stopped ") << args.out.string() << '\n';
        return kOk;
    });
}

int cmd_resume(const fs::path& run_dir, std::optional<int> stop_after, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunOptions options;
        options.stop_after_checkpoints = stop_after;
        const auto status = resume(run_dir, options);
        out << (status == RunStatus::completed ? "completed " : "stopped ") << run_dir.string() << '\n';
        return kOk;
    });
}

namespace {

struct PhaseData {
    int phase = 0;
    std::vector<std::vector<MaterialLattice>> finals; // per population, feasible only
};

struct RunReport {
    ExperimentConfig config;
    std::vector<PhaseData> phases; // phase 0 = seed populations
    std::vector<AutoencoderModel> models;
};

RunReport load_run(const fs::path& dir) {
    RunReport r;
    const RunState last = load_checkpoint(dir);
    r.config = last.config;
    for (int p = 0; p <= last.completed_phases; ++p) {
        RunState s = load_checkpoint(dir, p);
        PhaseData d;
        d.phase = p;
        for (const auto& pop : s.populations)
            d.finals.push_back(feasible_finals(pop));
        r.phases.push_back(std::move(d));
        r.models.push_back(std::move(s.model));
    }
    return r;
}

std::string diversity_rows(const PhaseData& d, const std::vector<std::vector<MaterialLattice>>* seed) {
    std::string rows;
    for (std::size_t p = 0; p < d.finals.size(); ++p) {
        const auto& finals = d.finals[p];
        std::vector<double> kl;
        if (seed) {
            if (!finals.empty() && !(*seed)[p].empty())
                kl = divergence_from_seed(finals, (*seed)[p]);
        } else if (finals.size() >= 2) {
            kl = population_diversity(finals);
        }
        rows += std::to_string(d.phase) + ',' + std::to_string(p) + ',' +
                (kl.empty() ? std::string("nan,nan") : num(mean_std(kl).mean) + ',' + num(ci95(kl))) + '\n';
    }
    return rows;
}

} // namespace

int cmd_metrics(const std::vector<fs::path>& runs, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (runs.empty())
            throw Error(ErrorCode::invalid_argument, "metrics needs at least one run directory");
        for (const auto& r : runs)
            if (fs::exists(out_dir) && fs::equivalent(out_dir, r))
                throw Error(ErrorCode::invalid_argument, "metrics output must not be a run directory");
        std::vector<RunReport> reports;
        for (const auto& r : runs)
            reports.push_back(load_run(r));

        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& rep = reports[i];
            const fs::path dir = runs.size() == 1 ? out_dir : out_dir / ("run_" + two_digits(int(i)));
            fs::create_directories(dir);
            const AutoencoderModel random_model(rep.config.autoencoder, derive_seed(rep.config.seed, "metrics-random"));

            std::string diversity = "phase,population,mean_kl,ci95\n";
            std::string from_seed = "phase,population,mean_kl,ci95\n";
            std::string correlation = "phase,population,model,r,pairs\n";
            for (const auto& d : rep.phases) {
                diversity += diversity_rows(d, nullptr);
                if (d.phase > 0)
                    from_seed += diversity_rows(d, &rep.phases.front().finals);
                if (d.phase == 0)
                    continue;
                // The model a phase explored under is the previous checkpoint's.
                const AutoencoderModel& explored_under = rep.models[std::size_t(d.phase - 1)];
                for (std::size_t p = 0; p < d.finals.size(); ++p) {
                    if (d.finals[p].size() < 3)
                        continue;
                    for (const auto& [name, model] :
                         {std::pair<const char*, const AutoencoderModel*>{"exploration", &explored_under},
                          {"random", &random_model}}) {
                        const auto c = latent_phenotype_correlation(d.finals[p], *model);
                        correlation += std::to_string(d.phase) + ',' + std::to_string(p) + ',' + name + ',' +
                                       (c.r ? num(*c.r) : std::string("nan")) + ',' +
                                       std::to_string(c.latent_distances.size()) + '\n';
                    }
                }
            }

            std::vector<NamedModel> models;
            for (std::size_t m = 0; m < rep.models.size(); ++m)
                models.push_back({m == 0 ? "bootstrap" : "phase_" + two_digits(int(m)), &rep.models[m]});
            models.push_back({"random", &random_model});
            std::vector<NamedPopulations> groups;
            for (const auto& d : rep.phases) {
                if (d.phase == 0)
                    continue;
                NamedPopulations g{"phase_" + two_digits(d.phase), {}};
                for (const auto& f : d.finals)
                    if (!f.empty())
                        g.populations.push_back(f);
                groups.push_back(std::move(g));
            }

            write_file_atomic((dir / "final_diversity.csv").string(), diversity);
            write_file_atomic((dir / "divergence_from_seed.csv").string(), from_seed);
            write_file_atomic((dir / "correlation.csv").string(), correlation);
            write_file_atomic((dir / "reconstruction.csv").string(),
                              reconstruction_matrix_csv(reconstruction_matrix(models, groups)));
            out << "wrote " << dir.string() << '\n';
        }

        if (reports.size() > 1) {
            // Cross-run table: each run's final model against every run's final populations.
            std::vector<NamedModel> models;
            std::vector<NamedPopulations> groups;
            for (std::size_t i = 0; i < reports.size(); ++i) {
                const std::string name = "run_" + two_digits(int(i)) + "_" +
                                         std::string(strategy_name(reports[i].config.strategy));
                models.push_back({name, &reports[i].models.back()});
                NamedPopulations g{name, {}};
                for (const auto& f : reports[i].phases.back().finals)
                    if (!f.empty())
                        g.populations.push_back(f);
                groups.push_back(std::move(g));
            }
            const AutoencoderModel random_model(reports.front().config.autoencoder,
                                                derive_seed(reports.front().config.seed, "metrics-random"));
            models.push_back({"random", &random_model});
            fs::create_directories(out_dir);
            write_file_atomic((out_dir / "reconstruction_table.csv").string(),
                              reconstruction_matrix_csv(reconstruction_matrix(models, groups)));
            out << "wrote " << (out_dir / "reconstruction_table.csv").string() << '\n';
        }
        return kOk;
    });
}

int cmd_encode(const fs::path& model_dir, const std::vector<fs::path>& lattices,
               const std::optional<fs::path>& out_file, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto model = AutoencoderModel::load(model_dir);
        const auto data = load_all(lattices);
        const auto latents = model.encode_batch(data);
        auto j = nlohmann::json::array();
        for (std::size_t i = 0; i < data.size(); ++i)
            j.push_back({{"file", lattices[i].string()}, {"latent", latents[i]}});
        emit(out_file, j.dump(1) + "\n", out);
        return kOk;
    });
}

int cmd_reconstruct(const fs::path& model_dir, const fs::path& lattice, const std::optional<fs::path>& out_file,
                    std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto model = AutoencoderModel::load(model_dir);
        const auto original = load_lattice(lattice.string());
        const auto rebuilt = model.reconstruct(original);
        if (out_file)
            save_lattice(rebuilt, out_file->string());
        out << "reconstruction error " << num(reconstruction_error(original, rebuilt)) << "%\n";
        return kOk;
    });
}

int cmd_export(const fs::path& lattice, const std::string& format, const std::optional<fs::path>& out_file,
               std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (format != "json" && format != "csv-voxels")
            throw Error(ErrorCode::invalid_argument, "unknown format '" + format + "' (valid: json, csv-voxels)");
        const auto l = load_lattice(lattice.string());
        const std::string text = format == "json" ? lattice_to_json(l).dump() + "\n" : lattice_to_csv(l);
        emit(out_file, text, out);
        return kOk;
    });
}

int cmd_gen_cubes(int count, const fs::path& out_dir, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (fs::exists(out_dir) && !fs::is_empty(out_dir))
            throw Error(ErrorCode::invalid_argument, out_dir.string() + " already exists and is not empty");
        const auto cubes = cuboid_lattices(count, seed);
        fs::create_directories(out_dir);
        for (std::size_t i = 0; i < cubes.size(); ++i) {
            std::ostringstream name;
            name << "cube_" << std::setw(4) << std::setfill('0') << i << ".json";
            save_lattice(cubes[i], (out_dir / name.str()).string());
        }
        out << "wrote " << cubes.size() << " lattices to " << out_dir.string() << '\n';
        return kOk;
    });
}

int cmd_compare(const fs::path& set_a, const fs::path& set_b, const std::optional<fs::path>& out_file,
                std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto files_a = lattice_files(set_a);
        const auto files_b = lattice_files(set_b);
        const auto a = load_all(files_a);
        const auto b = load_all(files_b);
        if (a.empty() || b.empty())
            throw Error(ErrorCode::empty_input, "both sets need at least one lattice");

        auto pooled = [](const std::vector<MaterialLattice>& set) {
            std::map<std::uint64_t, std::uint64_t> merged;
            PatternCounts pc;
            for (const auto& l : set) {
                const auto c = pattern_counts(l);
                for (const auto& [key, n] : c.counts)
                    merged[key] += n;
                pc.total += c.total;
            }
            pc.counts.assign(merged.begin(), merged.end());
            return pc;
        };
        std::vector<PatternCounts> ca, cb;
        for (const auto& l : a)
            ca.push_back(pattern_counts(l));
        for (const auto& l : b)
            cb.push_back(pattern_counts(l));
        std::vector<double> pairwise;
        for (const auto& x : ca)
            for (const auto& y : cb)
                pairwise.push_back(pattern_kl(x, y));
        const auto ms = mean_std(pairwise);

        nlohmann::json report = {
            {"set_a", {{"path", set_a.string()}, {"lattices", a.size()}}},
            {"set_b", {{"path", set_b.string()}, {"lattices", b.size()}}},
            {"aggregate_kl", pattern_kl(pooled(a), pooled(b))},
            {"pairwise_mean_kl", ms.mean},
            {"pairwise_std_kl", ms.std},
            {"pairs", pairwise.size()},
        };
        emit(out_file, report.dump(2) + "\n", out);
        return kOk;
    });
}

} // namespace voxnox::cli
