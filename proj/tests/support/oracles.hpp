#pragma once

// Independent brute-force reference implementations shared by the unit and
// acceptance tests. Written for clarity, not speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "voxnox/lattice.hpp"
#include "voxnox/nn/tensor.hpp"
#include "voxnox/random.hpp"

namespace oracle {

using voxnox::BooleanLattice;
using voxnox::Dims;
using voxnox::Material;
using voxnox::MaterialLattice;

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b)
            return;
        if (size_[a] < size_[b])
            std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

// Component root per cell (face adjacency), -1 for empty cells.
inline std::vector<long> component_roots(const BooleanLattice& hull) {
    const Dims d = hull.dims();
    UnionFind uf(hull.size());
    for (int y = 0; y < d.y; ++y)
        for (int z = 0; z < d.z; ++z)
            for (int x = 0; x < d.x; ++x) {
                if (!hull.at(x, y, z))
                    continue;
                const std::size_t here = d.index(x, y, z);
                if (x + 1 < d.x && hull.at(x + 1, y, z))
                    uf.unite(here, d.index(x + 1, y, z));
                if (y + 1 < d.y && hull.at(x, y + 1, z))
                    uf.unite(here, d.index(x, y + 1, z));
                if (z + 1 < d.z && hull.at(x, y, z + 1))
                    uf.unite(here, d.index(x, y, z + 1));
            }
    std::vector<long> roots(hull.size(), -1);
    for (std::size_t n = 0; n < hull.size(); ++n)
        if (hull[n])
            roots[n] = long(uf.find(n));
    return roots;
}

inline BooleanLattice grounded(const BooleanLattice& hull) {
    const Dims d = hull.dims();
    const auto roots = component_roots(hull);
    std::vector<char> keep(hull.size(), 0);
    for (int z = 0; z < d.z; ++z)
        for (int x = 0; x < d.x; ++x)
            if (hull.at(x, 0, z))
                keep[std::size_t(roots[d.index(x, 0, z)])] = 1;
    BooleanLattice out(d, 0);
    for (std::size_t n = 0; n < hull.size(); ++n)
        if (roots[n] >= 0 && keep[std::size_t(roots[n])])
            out[n] = 1;
    return out;
}

// Largest component; ties go to the component containing the smallest (x, y, z).
inline BooleanLattice largest(const BooleanLattice& hull) {
    const Dims d = hull.dims();
    const auto roots = component_roots(hull);
    std::map<long, std::size_t> sizes;
    std::map<long, std::tuple<int, int, int>> first;
    for (std::size_t n = 0; n < hull.size(); ++n) {
        if (roots[n] < 0)
            continue;
        ++sizes[roots[n]];
        const auto [x, y, z] = d.coords(n);
        const auto key = std::make_tuple(x, y, z);
        auto it = first.find(roots[n]);
        if (it == first.end() || key < it->second)
            first[roots[n]] = key;
    }
    BooleanLattice out(d, 0);
    if (sizes.empty())
        return out;
    long best = sizes.begin()->first;
    for (const auto& [root, size] : sizes)
        if (size > sizes[best] || (size == sizes[best] && first[root] < first[best]))
            best = root;
    for (std::size_t n = 0; n < hull.size(); ++n)
        if (roots[n] == best)
            out[n] = 1;
    return out;
}

// Empty cells that no empty path connects to the lattice boundary.
inline std::vector<char> enclosed_empty(const BooleanLattice& hull) {
    const Dims d = hull.dims();
    std::vector<char> reached(hull.size(), 0);
    std::deque<std::array<int, 3>> queue;
    for (int y = 0; y < d.y; ++y)
        for (int z = 0; z < d.z; ++z)
            for (int x = 0; x < d.x; ++x) {
                const bool edge = x == 0 || y == 0 || z == 0 || x == d.x - 1 || y == d.y - 1 || z == d.z - 1;
                if (edge && !hull.at(x, y, z)) {
                    reached[d.index(x, y, z)] = 1;
                    queue.push_back({x, y, z});
                }
            }
    const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    while (!queue.empty()) {
        const auto [x, y, z] = queue.front();
        queue.pop_front();
        for (const auto& s : steps) {
            const int a = x + s[0], b = y + s[1], c = z + s[2];
            if (!d.contains(a, b, c) || hull.at(a, b, c) || reached[d.index(a, b, c)])
                continue;
            reached[d.index(a, b, c)] = 1;
            queue.push_back({a, b, c});
        }
    }
    std::vector<char> out(hull.size(), 0);
    for (std::size_t n = 0; n < hull.size(); ++n)
        out[n] = !hull[n] && !reached[n];
    return out;
}

inline bool solid(Material m) { return m == Material::Floor || m == Material::Wall || m == Material::Roof; }

// Counts every solid face whose neighbour is non-solid or outside the lattice.
inline int surface_faces(const MaterialLattice& l) {
    const Dims d = l.dims();
    int faces = 0;
    for (int y = 0; y < d.y; ++y)
        for (int z = 0; z < d.z; ++z)
            for (int x = 0; x < d.x; ++x) {
                if (!solid(l.at(x, y, z)))
                    continue;
                faces += x == 0 || !solid(l.at(x - 1, y, z));
                faces += x == d.x - 1 || !solid(l.at(x + 1, y, z));
                faces += y == 0 || !solid(l.at(x, y - 1, z));
                faces += y == d.y - 1 || !solid(l.at(x, y + 1, z));
                faces += z == 0 || !solid(l.at(x, y, z - 1));
                faces += z == d.z - 1 || !solid(l.at(x, y, z + 1));
            }
    return faces;
}

// Window contents listed as (dx, dy, dz) with dx fastest, then dz, then dy.
inline std::map<std::vector<int>, std::uint64_t> window_patterns(const MaterialLattice& l) {
    const Dims d = l.dims();
    std::map<std::vector<int>, std::uint64_t> out;
    for (int y = 0; y + 1 < d.y; ++y)
        for (int z = 0; z + 1 < d.z; ++z)
            for (int x = 0; x + 1 < d.x; ++x) {
                std::vector<int> p;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dx = 0; dx < 2; ++dx)
                            p.push_back(int(l.at(x + dx, y + dy, z + dz)));
                ++out[p];
            }
    return out;
}

// Smoothed KL(a || b) over the union of both pattern sets.
inline double pattern_kl(const MaterialLattice& a, const MaterialLattice& b, double eps = 1e-6) {
    const auto pa = window_patterns(a);
    const auto pb = window_patterns(b);
    std::map<std::vector<int>, std::pair<double, double>> joint;
    double ta = 0, tb = 0;
    for (const auto& [k, n] : pa) {
        joint[k].first = double(n);
        ta += double(n);
    }
    for (const auto& [k, n] : pb) {
        joint[k].second = double(n);
        tb += double(n);
    }
    const double s = double(joint.size());
    double kl = 0;
    for (const auto& [k, c] : joint) {
        const double p = (c.first + eps) / (ta + eps * s);
        const double q = (c.second + eps) / (tb + eps * s);
        kl += p * std::log(p / q);
    }
    return kl;
}

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Sorts every distance and averages the first min(k, n).
inline double knn_mean(const std::vector<double>& subject, const std::vector<std::vector<double>>& pool,
                       std::size_t k) {
    if (pool.empty())
        return 0.0;
    std::vector<double> all;
    for (const auto& v : pool)
        all.push_back(euclid(subject, v));
    std::sort(all.begin(), all.end());
    const std::size_t n = std::min(k, all.size());
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        s += all[i];
    return s / double(n);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Direct 3D convolution over (N, C, D, H, W), zero padding, unit stride.
inline voxnox::nn::Tensor<double> conv3d(const voxnox::nn::Tensor<double>& in, const voxnox::nn::Tensor<double>& w,
                                         const voxnox::nn::Tensor<double>& b, int pad) {
    const int N = int(in.dim(0)), C = int(in.dim(1)), D = int(in.dim(2)), H = int(in.dim(3)), W = int(in.dim(4));
    const int O = int(w.dim(0)), K = int(w.dim(2));
    const int OD = D + 2 * pad - K + 1, OH = H + 2 * pad - K + 1, OW = W + 2 * pad - K + 1;
    voxnox::nn::Tensor<double> out({std::size_t(N), std::size_t(O), std::size_t(OD), std::size_t(OH), std::size_t(OW)});
    auto at_in = [&](int n, int c, int z, int y, int x) {
        return in[((((std::size_t(n) * C + c) * D + z) * H + y) * W) + x];
    };
    auto at_w = [&](int o, int c, int a, int bb, int e) {
        return w[((((std::size_t(o) * C + c) * K + a) * K + bb) * K) + e];
    };
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int z = 0; z < OD; ++z)
                for (int y = 0; y < OH; ++y)
                    for (int x = 0; x < OW; ++x) {
                        double s = b[std::size_t(o)];
                        for (int c = 0; c < C; ++c)
                            for (int a = 0; a < K; ++a)
                                for (int bb = 0; bb < K; ++bb)
                                    for (int e = 0; e < K; ++e) {
                                        const int iz = z + a - pad, iy = y + bb - pad, ix = x + e - pad;
                                        if (iz < 0 || iy < 0 || ix < 0 || iz >= D || iy >= H || ix >= W)
                                            continue;
                                        s += at_w(o, c, a, bb, e) * at_in(n, c, iz, iy, ix);
                                    }
                        out[((((std::size_t(n) * O + o) * OD + z) * OH + y) * OW) + x] = s;
                    }
    return out;
}

// 2x2x2 max pool, stride 2, ceil mode.
inline voxnox::nn::Tensor<double> maxpool(const voxnox::nn::Tensor<double>& in) {
    const std::size_t N = in.dim(0), C = in.dim(1), D = in.dim(2), H = in.dim(3), W = in.dim(4);
    const std::size_t OD = (D + 1) / 2, OH = (H + 1) / 2, OW = (W + 1) / 2;
    voxnox::nn::Tensor<double> out({N, C, OD, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t z = 0; z < OD; ++z)
                for (std::size_t y = 0; y < OH; ++y)
                    for (std::size_t x = 0; x < OW; ++x) {
                        double m = -INFINITY;
                        for (std::size_t a = 2 * z; a < std::min(D, 2 * z + 2); ++a)
                            for (std::size_t b = 2 * y; b < std::min(H, 2 * y + 2); ++b)
                                for (std::size_t e = 2 * x; e < std::min(W, 2 * x + 2); ++e)
                                    m = std::max(m, in[(((n * C + c) * D + a) * H + b) * W + e]);
                        out[(((n * C + c) * OD + z) * OH + y) * OW + x] = m;
                    }
    return out;
}

template <typename T>
inline voxnox::nn::Tensor<T> random_tensor(voxnox::nn::Shape shape, voxnox::Rng& rng, double lo = -1, double hi = 1) {
    voxnox::nn::Tensor<T> t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = T(voxnox::uniform(rng, lo, hi));
    return t;
}

inline BooleanLattice random_hull(Dims d, voxnox::Rng& rng, double fill) {
    BooleanLattice h(d, 0);
    for (std::size_t n = 0; n < h.size(); ++n)
        h[n] = voxnox::bernoulli(rng, fill) ? 1 : 0;
    return h;
}

inline MaterialLattice random_materials(Dims d, voxnox::Rng& rng) {
    MaterialLattice l(d);
    for (std::size_t n = 0; n < l.size(); ++n)
        l[n] = Material(voxnox::uniform_int(rng, 0, 4));
    return l;
}

} // namespace oracle
