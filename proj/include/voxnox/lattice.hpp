#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxnox/error.hpp"

namespace voxnox {

// Lattice extents. y is the vertical axis.
struct Dims {
    int x = 20;
    int y = 20;
    int z = 20;

    std::size_t volume() const { return std::size_t(x) * std::size_t(y) * std::size_t(z); }
    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z;
    }
    // Storage order: x fastest, then z, then y. Matches the lattice file format.
    std::size_t index(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(x) * (std::size_t(k) + std::size_t(z) * std::size_t(j));
    }
    std::array<int, 3> coords(std::size_t idx) const {
        const int i = int(idx % std::size_t(x));
        const int k = int((idx / std::size_t(x)) % std::size_t(z));
        const int j = int(idx / (std::size_t(x) * std::size_t(z)));
        return {i, j, k};
    }
    bool operator==(const Dims&) const = default;
};

enum class Material : std::uint8_t {
    ExteriorAir = 0,
    InteriorAir = 1,
    Floor = 2,
    Wall = 3,
    Roof = 4,
};

inline constexpr int kMaterialCount = 5;

std::string_view material_name(Material m);
std::optional<Material> material_from_name(std::string_view name);

inline bool is_solid(Material m) {
    return m == Material::Floor || m == Material::Wall || m == Material::Roof;
}

// Dense 3D grid, value type per cell.
template <typename Cell>
class Grid {
public:
    Grid() = default;
    explicit Grid(Dims dims, Cell fill = Cell{}) : dims_(dims), cells_(dims.volume(), fill) {
        if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
            throw Error(ErrorCode::invalid_argument, "lattice dims must be positive");
    }

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return cells_.size(); }

    Cell& at(int i, int j, int k) { return cells_[dims_.index(i, j, k)]; }
    const Cell& at(int i, int j, int k) const { return cells_[dims_.index(i, j, k)]; }
    Cell& operator[](std::size_t idx) { return cells_[idx]; }
    const Cell& operator[](std::size_t idx) const { return cells_[idx]; }

    std::span<Cell> cells() { return cells_; }
    std::span<const Cell> cells() const { return cells_; }

    bool operator==(const Grid&) const = default;

private:
    Dims dims_{};
    std::vector<Cell> cells_;
};

// Filled/empty hull emitted by a CPPN. Cells hold 0 or 1.
using BooleanLattice = Grid<std::uint8_t>;
using MaterialLattice = Grid<Material>;

// Channel-major one-hot encoding: value(c, cell) = channels[c * volume + cell].
struct OneHotLattice {
    Dims dims;
    std::vector<float> channels;
};

struct StructuralStats {
    std::array<int, 3> bounding_box{0, 0, 0}; // (w, h, d)
    double symmetry = 0.0;
    double instability = 0.0;
    int surface_area = 0;
};

struct RepairResult {
    MaterialLattice lattice;
    bool feasible = false;
};

// Drops every filled voxel that is not face-connected to a filled y=0 voxel.
BooleanLattice flood_fill_filter(const BooleanLattice& hull);

// Keeps the largest face-connected component; ties go to the component whose
// lexicographically smallest (x, y, z) voxel comes first.
BooleanLattice largest_component(const BooleanLattice& hull);

// Rule order: floor (y=0), roof (empty or boundary above), interior air (empty
// and unreachable from the lattice boundary through empty voxels), exterior
// air, wall.
MaterialLattice assign_materials(const BooleanLattice& hull);

// Converts walls whose six face neighbours are all solid into interior air,
// evaluated simultaneously on the input.
MaterialLattice carve_interior(const MaterialLattice& lattice);

bool check_entrance(const MaterialLattice& lattice);

// flood fill -> largest component -> materials -> carving -> entrance check.
RepairResult repair_pipeline(const BooleanLattice& hull);

StructuralStats structural_stats(const MaterialLattice& lattice);

OneHotLattice to_onehot(const MaterialLattice& lattice);
MaterialLattice from_onehot(const OneHotLattice& onehot);
// Per-voxel argmax over channel-major scores; ties go to the lowest id.
MaterialLattice from_scores(Dims dims, std::span<const float> scores);

std::size_t count_filled(const BooleanLattice& hull);
std::size_t count_material(const MaterialLattice& lattice, Material m);

// 64-bit FNV-1a over dims and cell bytes.
std::uint64_t fingerprint(const MaterialLattice& lattice);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

nlohmann::json lattice_to_json(const MaterialLattice& lattice);
MaterialLattice lattice_from_json(const nlohmann::json& j);

// "x,y,z,material" rows for every non-exterior voxel, preceded by a dims header.
std::string lattice_to_csv(const MaterialLattice& lattice);
MaterialLattice lattice_from_csv(std::string_view text);

MaterialLattice load_lattice(const std::string& path);
void save_lattice(const MaterialLattice& lattice, const std::string& path);

} // namespace voxnox
