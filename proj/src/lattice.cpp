#include "voxnox/lattice.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <deque>
#include <sstream>

#include "voxnox/io.hpp"

namespace voxnox {

namespace {

constexpr std::array<std::string_view, kMaterialCount> kMaterialNames = {
    "exterior_air", "interior_air", "floor", "wall", "roof"};

constexpr std::array<std::array<int, 3>, 6> kFaceOffsets = {{
    {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

// Labels every cell reachable from `seeds` through cells where `passable` holds.
template <typename Passable>
std::vector<std::uint8_t> reach(const Dims& d, const std::vector<std::size_t>& seeds, Passable passable) {
    std::vector<std::uint8_t> seen(d.volume(), 0);
    std::deque<std::size_t> queue;
    for (std::size_t s : seeds) {
        if (!seen[s]) {
            seen[s] = 1;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        const auto [i, j, k] = d.coords(queue.front());
        queue.pop_front();
        for (const auto& o : kFaceOffsets) {
            const int a = i + o[0], b = j + o[1], c = k + o[2];
            if (!d.contains(a, b, c))
                continue;
            const std::size_t n = d.index(a, b, c);
            if (!seen[n] && passable(n)) {
                seen[n] = 1;
                queue.push_back(n);
            }
        }
    }
    return seen;
}

bool on_boundary(const Dims& d, int i, int j, int k) {
    return i == 0 || j == 0 || k == 0 || i == d.x - 1 || j == d.y - 1 || k == d.z - 1;
}

} // namespace

std::string_view material_name(Material m) { return kMaterialNames.at(std::size_t(m)); }

std::optional<Material> material_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kMaterialNames.size(); ++i)
        if (kMaterialNames[i] == name)
            return Material(i);
    return std::nullopt;
}

BooleanLattice flood_fill_filter(const BooleanLattice& hull) {
    const Dims& d = hull.dims();
    std::vector<std::size_t> seeds;
    for (int k = 0; k < d.z; ++k)
        for (int i = 0; i < d.x; ++i)
            if (hull.at(i, 0, k))
                seeds.push_back(d.index(i, 0, k));
    const auto seen = reach(d, seeds, [&](std::size_t n) { return hull[n] != 0; });
    BooleanLattice out(d, 0);
    for (std::size_t n = 0; n < hull.size(); ++n)
        out[n] = seen[n];
    return out;
}

BooleanLattice largest_component(const BooleanLattice& hull) {
    const Dims& d = hull.dims();
    std::vector<std::uint8_t> visited(d.volume(), 0);
    std::vector<std::size_t> best;
    // x-major scan so each component is first met at its lexicographic minimum.
    for (int i = 0; i < d.x; ++i)
        for (int j = 0; j < d.y; ++j)
            for (int k = 0; k < d.z; ++k) {
                const std::size_t s = d.index(i, j, k);
                if (!hull[s] || visited[s])
                    continue;
                std::vector<std::size_t> members{s};
                visited[s] = 1;
                for (std::size_t head = 0; head < members.size(); ++head) {
                    const auto [a, b, c] = d.coords(members[head]);
                    for (const auto& o : kFaceOffsets) {
                        const int x = a + o[0], y = b + o[1], z = c + o[2];
                        if (!d.contains(x, y, z))
                            continue;
                        const std::size_t n = d.index(x, y, z);
                        if (hull[n] && !visited[n]) {
                            visited[n] = 1;
                            members.push_back(n);
                        }
                    }
                }
                if (members.size() > best.size())
                    best = std::move(members);
            }
    BooleanLattice out(d, 0);
    for (std::size_t n : best)
        out[n] = 1;
    return out;
}

MaterialLattice assign_materials(const BooleanLattice& hull) {
    const Dims& d = hull.dims();
    std::vector<std::size_t> seeds;
    for (int j = 0; j < d.y; ++j)
        for (int k = 0; k < d.z; ++k)
            for (int i = 0; i < d.x; ++i)
                if (on_boundary(d, i, j, k) && !hull.at(i, j, k))
                    seeds.push_back(d.index(i, j, k));
    const auto outside = reach(d, seeds, [&](std::size_t n) { return hull[n] == 0; });

    MaterialLattice out(d, Material::ExteriorAir);
    for (int j = 0; j < d.y; ++j)
        for (int k = 0; k < d.z; ++k)
            for (int i = 0; i < d.x; ++i) {
                const std::size_t n = d.index(i, j, k);
                if (hull[n]) {
                    if (j == 0)
                        out[n] = Material::Floor;
                    else if (j == d.y - 1 || !hull.at(i, j + 1, k))
                        out[n] = Material::Roof;
                    else
                        out[n] = Material::Wall;
                } else {
                    out[n] = outside[n] ? Material::ExteriorAir : Material::InteriorAir;
                }
            }
    return out;
}

MaterialLattice carve_interior(const MaterialLattice& lattice) {
    const Dims& d = lattice.dims();
    MaterialLattice out = lattice;
    for (int j = 0; j < d.y; ++j)
        for (int k = 0; k < d.z; ++k)
            for (int i = 0; i < d.x; ++i) {
                if (lattice.at(i, j, k) != Material::Wall)
                    continue;
                bool enclosed = true;
                for (const auto& o : kFaceOffsets) {
                    const int a = i + o[0], b = j + o[1], c = k + o[2];
                    if (!d.contains(a, b, c) || !is_solid(lattice.at(a, b, c))) {
                        enclosed = false;
                        break;
                    }
                }
                if (enclosed)
                    out.at(i, j, k) = Material::InteriorAir;
            }
    return out;
}

bool check_entrance(const MaterialLattice& lattice) {
    const Dims& d = lattice.dims();
    constexpr std::array<std::array<int, 2>, 4> directions = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (int j = 0; j < d.y; ++j)
        for (int k = 0; k < d.z; ++k)
            for (int i = 0; i < d.x; ++i) {
                if (lattice.at(i, j, k) != Material::Floor)
                    continue;
                if (!d.contains(i, j + 1, k) || lattice.at(i, j + 1, k) != Material::InteriorAir)
                    continue;
                for (const auto& dir : directions) {
                    const int a = i + dir[0], c = k + dir[1];
                    bool wall = true;
                    for (int h = 1; h <= 3 && wall; ++h)
                        wall = d.contains(a, j + h, c) && lattice.at(a, j + h, c) == Material::Wall;
                    if (wall)
                        return true;
                }
            }
    return false;
}

RepairResult repair_pipeline(const BooleanLattice& hull) {
    RepairResult result;
    result.lattice = carve_interior(assign_materials(largest_component(flood_fill_filter(hull))));
    result.feasible = check_entrance(result.lattice);
    return result;
}

StructuralStats structural_stats(const MaterialLattice& lattice) {
    const Dims& d = lattice.dims();
    StructuralStats s;
    int lo[3] = {d.x, d.y, d.z};
    int hi[3] = {-1, -1, -1};
    std::size_t solid = 0, elevated = 0, unsupported = 0;
    std::size_t mirror_x = 0, mirror_z = 0;
    for (int j = 0; j < d.y; ++j)
        for (int k = 0; k < d.z; ++k)
            for (int i = 0; i < d.x; ++i) {
                if (!is_solid(lattice.at(i, j, k)))
                    continue;
                ++solid;
                const int c[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], c[a]);
                    hi[a] = std::max(hi[a], c[a]);
                }
                if (j > 0) {
                    ++elevated;
                    if (!is_solid(lattice.at(i, j - 1, k)))
                        ++unsupported;
                }
                if (is_solid(lattice.at(d.x - 1 - i, j, k)))
                    ++mirror_x;
                if (is_solid(lattice.at(i, j, d.z - 1 - k)))
                    ++mirror_z;
                for (const auto& o : kFaceOffsets) {
                    const int a = i + o[0], b = j + o[1], e = k + o[2];
                    if (!d.contains(a, b, e) || !is_solid(lattice.at(a, b, e)))
                        ++s.surface_area;
                }
            }
    if (solid == 0)
        return s;
    s.bounding_box = {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
    s.symmetry = double(std::max(mirror_x, mirror_z)) / double(solid);
    s.instability = elevated ? double(unsupported) / double(elevated) : 0.0;
    return s;
}

OneHotLattice to_onehot(const MaterialLattice& lattice) {
    OneHotLattice oh{lattice.dims(), std::vector<float>(lattice.size() * kMaterialCount, 0.0f)};
    for (std::size_t n = 0; n < lattice.size(); ++n)
        oh.channels[std::size_t(lattice[n]) * lattice.size() + n] = 1.0f;
    return oh;
}

MaterialLattice from_scores(Dims dims, std::span<const float> scores) {
    const std::size_t volume = dims.volume();
    if (scores.size() != volume * kMaterialCount)
        throw Error(ErrorCode::dimension_mismatch,
                    "expected " + std::to_string(volume * kMaterialCount) + " channel values, got " +
                        std::to_string(scores.size()));
    MaterialLattice out(dims, Material::ExteriorAir);
    for (std::size_t n = 0; n < volume; ++n) {
        int best = 0;
        for (int c = 1; c < kMaterialCount; ++c)
            if (scores[std::size_t(c) * volume + n] > scores[std::size_t(best) * volume + n])
                best = c;
        out[n] = Material(best);
    }
    return out;
}

MaterialLattice from_onehot(const OneHotLattice& onehot) { return from_scores(onehot.dims, onehot.channels); }

std::size_t count_filled(const BooleanLattice& hull) {
    return std::size_t(std::count_if(hull.cells().begin(), hull.cells().end(), [](auto c) { return c != 0; }));
}

std::size_t count_material(const MaterialLattice& lattice, Material m) {
    return std::size_t(std::count(lattice.cells().begin(), lattice.cells().end(), m));
}

std::uint64_t fingerprint(const MaterialLattice& lattice) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    for (int v : {lattice.dims().x, lattice.dims().y, lattice.dims().z})
        for (int s = 0; s < 32; s += 8)
            mix(std::uint8_t(v >> s));
    for (Material m : lattice.cells())
        mix(std::uint8_t(m));
    return h;
}

namespace {
constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t(bytes[i]) << 16) | (std::uint32_t(bytes[i + 1]) << 8) | bytes[i + 2];
        for (int s = 18; s >= 0; s -= 6)
            out.push_back(kBase64Alphabet[(v >> s) & 63]);
    }
    const std::size_t rest = bytes.size() - i;
    if (rest > 0) {
        std::uint32_t v = std::uint32_t(bytes[i]) << 16;
        if (rest == 2)
            v |= std::uint32_t(bytes[i + 1]) << 8;
        out.push_back(kBase64Alphabet[(v >> 18) & 63]);
        out.push_back(kBase64Alphabet[(v >> 12) & 63]);
        out.push_back(rest == 2 ? kBase64Alphabet[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0)
        throw Error(ErrorCode::format, "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (int q = 0; q < 4; ++q) {
            const char ch = text[i + q];
            std::uint32_t six = 0;
            if (ch == '=') {
                if (i + 4 != text.size() || q < 2)
                    throw Error(ErrorCode::format, "misplaced base64 padding");
                ++pad;
            } else {
                if (pad)
                    throw Error(ErrorCode::format, "misplaced base64 padding");
                const auto pos = kBase64Alphabet.find(ch);
                if (pos == std::string_view::npos)
                    throw Error(ErrorCode::format, std::string("invalid base64 character '") + ch + "'");
                six = std::uint32_t(pos);
            }
            v = (v << 6) | six;
        }
        out.push_back(std::uint8_t(v >> 16));
        if (pad < 2)
            out.push_back(std::uint8_t(v >> 8));
        if (pad < 1)
            out.push_back(std::uint8_t(v));
    }
    return out;
}

nlohmann::json lattice_to_json(const MaterialLattice& lattice) {
    const Dims& d = lattice.dims();
    std::vector<std::uint8_t> bytes(lattice.size());
    for (std::size_t n = 0; n < lattice.size(); ++n)
        bytes[n] = std::uint8_t(lattice[n]);
    nlohmann::json names = nlohmann::json::array();
    for (auto name : kMaterialNames)
        names.push_back(name);
    return {{"dims", {d.x, d.y, d.z}}, {"materials", names}, {"cells", base64_encode(bytes)}};
}

MaterialLattice lattice_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw Error(ErrorCode::format, "lattice: expected a JSON object");
    for (const char* field : {"dims", "materials", "cells"})
        if (!j.contains(field))
            throw Error(ErrorCode::format, std::string("lattice: missing field '") + field + "'");
    const auto& jd = j.at("dims");
    if (!jd.is_array() || jd.size() != 3 || !jd[0].is_number_integer() || !jd[1].is_number_integer() ||
        !jd[2].is_number_integer())
        throw Error(ErrorCode::format, "lattice: field 'dims' must be three integers");
    const Dims d{jd[0].get<int>(), jd[1].get<int>(), jd[2].get<int>()};
    if (d.x <= 0 || d.y <= 0 || d.z <= 0)
        throw Error(ErrorCode::format, "lattice: field 'dims' must be positive");

    const auto& jm = j.at("materials");
    if (!jm.is_array() || jm.size() != kMaterialNames.size())
        throw Error(ErrorCode::format, "lattice: field 'materials' must list 5 names");
    for (std::size_t i = 0; i < kMaterialNames.size(); ++i)
        if (!jm[i].is_string() || jm[i].get<std::string>() != kMaterialNames[i])
            throw Error(ErrorCode::format, "lattice: field 'materials' has unexpected entry at index " +
                                               std::to_string(i));

    if (!j.at("cells").is_string())
        throw Error(ErrorCode::format, "lattice: field 'cells' must be a base64 string");
    std::vector<std::uint8_t> bytes;
    try {
        bytes = base64_decode(j.at("cells").get<std::string>());
    } catch (const Error& e) {
        throw Error(ErrorCode::format, std::string("lattice: field 'cells': ") + e.detail());
    }
    if (bytes.size() != d.volume())
        throw Error(ErrorCode::format, "lattice: field 'cells' decodes to " + std::to_string(bytes.size()) +
                                           " bytes, dims require " + std::to_string(d.volume()));
    MaterialLattice out(d);
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        if (bytes[n] >= kMaterialCount)
            throw Error(ErrorCode::format, "lattice: field 'cells' holds material id " +
                                               std::to_string(bytes[n]) + " at cell " + std::to_string(n));
        out[n] = Material(bytes[n]);
    }
    return out;
}

std::string lattice_to_csv(const MaterialLattice& lattice) {
    const Dims& d = lattice.dims();
    std::ostringstream os;
    os << "# dims " << d.x << ' ' << d.y << ' ' << d.z << '\n' << "x,y,z,material\n";
    for (std::size_t n = 0; n < lattice.size(); ++n) {
        if (lattice[n] == Material::ExteriorAir)
            continue;
        const auto [i, j, k] = d.coords(n);
        os << i << ',' << j << ',' << k << ',' << material_name(lattice[n]) << '\n';
    }
    return os.str();
}

MaterialLattice lattice_from_csv(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    Dims d{};
    if (!std::getline(is, line) || line.rfind("# dims ", 0) != 0)
        throw Error(ErrorCode::format, "csv lattice: first line must be '# dims X Y Z'");
    {
        std::istringstream hs(line.substr(7));
        if (!(hs >> d.x >> d.y >> d.z) || d.x <= 0 || d.y <= 0 || d.z <= 0)
            throw Error(ErrorCode::format, "csv lattice: malformed dims header");
    }
    if (!std::getline(is, line) || line != "x,y,z,material")
        throw Error(ErrorCode::format, "csv lattice: second line must be the column header");
    MaterialLattice out(d, Material::ExteriorAir);
    int row = 2;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty())
            continue;
        std::array<int, 3> c{};
        std::size_t pos = 0;
        for (int a = 0; a < 3; ++a) {
            const auto comma = line.find(',', pos);
            if (comma == std::string::npos)
                throw Error(ErrorCode::format, "csv lattice: row " + std::to_string(row) + " has too few columns");
            const auto res = std::from_chars(line.data() + pos, line.data() + comma, c[a]);
            if (res.ec != std::errc() || res.ptr != line.data() + comma)
                throw Error(ErrorCode::format, "csv lattice: row " + std::to_string(row) + " has a bad coordinate");
            pos = comma + 1;
        }
        const auto m = material_from_name(std::string_view(line).substr(pos));
        if (!m)
            throw Error(ErrorCode::format, "csv lattice: row " + std::to_string(row) + " has unknown material");
        if (!d.contains(c[0], c[1], c[2]))
            throw Error(ErrorCode::format, "csv lattice: row " + std::to_string(row) + " is out of bounds");
        out.at(c[0], c[1], c[2]) = *m;
    }
    return out;
}

MaterialLattice load_lattice(const std::string& path) {
    const std::string text = read_file(path);
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        return lattice_from_csv(text);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::format, path + ": " + e.what());
    }
    try {
        return lattice_from_json(j);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

void save_lattice(const MaterialLattice& lattice, const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        write_file_atomic(path, lattice_to_csv(lattice));
    else
        write_file_atomic(path, lattice_to_json(lattice).dump() + "\n");
}

} // namespace voxnox
