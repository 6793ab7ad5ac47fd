#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "voxnox/lattice.hpp"
#include "voxnox/random.hpp"

namespace voxnox::cli {

// Exit codes shared by every command.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

// Solid cuboid hulls (each side Uniform{min_side..max_side}) resting on y=0,
// repaired, with infeasible draws redrawn.
std::vector<MaterialLattice> cuboid_lattices(int count, std::uint64_t seed, Dims dims = {20, 20, 20},
                                             int min_side = 4, int max_side = 18);

// Every *.json / *.csv lattice file in a directory, sorted by name.
std::vector<std::filesystem::path> lattice_files(const std::filesystem::path& dir);

struct RunArgs {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::string> strategy;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> bootstrap_from;
    std::optional<int> stop_after;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);
int cmd_resume(const std::filesystem::path& run_dir, std::optional<int> stop_after, std::ostream& out,
               std::ostream& err);
int cmd_metrics(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out_dir,
                std::ostream& out, std::ostream& err);
int cmd_encode(const std::filesystem::path& model_dir, const std::vector<std::filesystem::path>& lattices,
               const std::optional<std::filesystem::path>& out_file, std::ostream& out, std::ostream& err);
int cmd_reconstruct(const std::filesystem::path& model_dir, const std::filesystem::path& lattice,
                    const std::optional<std::filesystem::path>& out_file, std::ostream& out, std::ostream& err);
int cmd_export(const std::filesystem::path& lattice, const std::string& format,
               const std::optional<std::filesystem::path>& out_file, std::ostream& out, std::ostream& err);
int cmd_gen_cubes(int count, const std::filesystem::path& out_dir, std::uint64_t seed, std::ostream& out,
                  std::ostream& err);
int cmd_compare(const std::filesystem::path& set_a, const std::filesystem::path& set_b,
                const std::optional<std::filesystem::path>& out_file, std::ostream& out, std::ostream& err);

} // namespace voxnox::cli
