#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace cli = voxnox::cli;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Evolve voxel buildings with latent-space novelty search"};
    app.require_subcommand(1);

    cli::RunArgs run_args;
    std::string strategy, bootstrap_from;
    std::uint64_t run_seed = 0;
    int run_stop = 0;
    auto* run = app.add_subcommand("run", "Start a new experiment");
    run->add_option("--config", run_args.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", run_args.out, "Run directory (must not exist or be empty)")->required();
    auto* strategy_opt = run->add_option("--strategy", strategy, "Override the config strategy");
    auto* seed_opt = run->add_option("--seed", run_seed, "Override the master seed");
    auto* boot_opt = run->add_option("--bootstrap-from", bootstrap_from, "Reuse another run's bootstrap/");
    auto* run_stop_opt = run->add_option("--stop-after", run_stop, "Stop after N checkpoints (testing)");

    fs::path resume_dir;
    int resume_stop = 0;
    auto* resume = app.add_subcommand("resume", "Continue a run from its last checkpoint");
    resume->add_option("run", resume_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    auto* resume_stop_opt = resume->add_option("--stop-after", resume_stop, "Stop after N checkpoints (testing)");

    std::vector<fs::path> metric_runs;
    fs::path metrics_out;
    auto* metrics = app.add_subcommand("metrics", "Write CSV reports from run checkpoints");
    metrics->add_option("runs", metric_runs, "Run directories")->required()->check(CLI::ExistingDirectory);
    metrics->add_option("--out", metrics_out, "Report directory")->required();

    fs::path model_dir;
    std::vector<fs::path> encode_inputs;
    fs::path out_file;
    auto* encode = app.add_subcommand("encode", "Print latent vectors for lattice files");
    encode->add_option("--model", model_dir, "Directory holding model.json/model.bin")->required();
    encode->add_option("lattices", encode_inputs, "Lattice files")->required()->check(CLI::ExistingFile);
    auto* encode_out = encode->add_option("--out", out_file, "Write JSON here instead of stdout");

    fs::path lattice_in;
    auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct a lattice through a model");
    reconstruct->add_option("--model", model_dir, "Directory holding model.json/model.bin")->required();
    reconstruct->add_option("lattice", lattice_in, "Lattice file")->required()->check(CLI::ExistingFile);
    auto* reconstruct_out = reconstruct->add_option("--out", out_file, "Write the reconstruction here");

    std::string format = "json";
    auto* exp = app.add_subcommand("export", "Convert a lattice file");
    exp->add_option("lattice", lattice_in, "Lattice file")->required()->check(CLI::ExistingFile);
    exp->add_option("--format", format, "json or csv-voxels");
    auto* export_out = exp->add_option("--out", out_file, "Output file (stdout when omitted)");

    int cube_count = 200;
    std::uint64_t cube_seed = 0;
    fs::path cube_dir;
    auto* cubes = app.add_subcommand("gen-cubes", "Generate repaired cuboid lattices");
    cubes->add_option("--count", cube_count, "Number of lattices")->check(CLI::NonNegativeNumber);
    cubes->add_option("--out", cube_dir, "Output directory")->required();
    cubes->add_option("--seed", cube_seed, "Random seed");

    fs::path set_a, set_b;
    auto* compare = app.add_subcommand("compare", "KL divergence report between two lattice sets");
    compare->add_option("set_a", set_a, "Directory of lattices")->required()->check(CLI::ExistingDirectory);
    compare->add_option("set_b", set_b, "Directory of lattices")->required()->check(CLI::ExistingDirectory);
    auto* compare_out = compare->add_option("--out", out_file, "Write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kUsage;
    }

    auto optional_path = [&](CLI::Option* opt) {
        return opt->count() ? std::optional<fs::path>(out_file) : std::nullopt;
    };

    if (*run) {
        if (strategy_opt->count())
            run_args.strategy = strategy;
        if (seed_opt->count())
            run_args.seed = run_seed;
        if (boot_opt->count())
            run_args.bootstrap_from = fs::path(bootstrap_from);
        if (run_stop_opt->count())
            run_args.stop_after = run_stop;
        return cli::cmd_run(run_args, std::cout, std::cerr);
    }
    if (*resume)
        return cli::cmd_resume(resume_dir, resume_stop_opt->count() ? std::optional<int>(resume_stop) : std::nullopt,
                               std::cout, std::cerr);
    if (*metrics)
        return cli::cmd_metrics(metric_runs, metrics_out, std::cout, std::cerr);
    if (*encode)
        return cli::cmd_encode(model_dir, encode_inputs, optional_path(encode_out), std::cout, std::cerr);
    if (*reconstruct)
        return cli::cmd_reconstruct(model_dir, lattice_in, optional_path(reconstruct_out), std::cout, std::cerr);
    if (*exp)
        return cli::cmd_export(lattice_in, format, optional_path(export_out), std::cout, std::cerr);
    if (*cubes)
        return cli::cmd_gen_cubes(cube_count, cube_dir, cube_seed, std::cout, std::cerr);
    if (*compare)
        return cli::cmd_compare(set_a, set_b, optional_path(compare_out), std::cout, std::cerr);
    return cli::kUsage;
}
