#include "voxnox/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Core>

namespace voxnox::nn {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

void require_rank(const Shape& s, std::size_t rank, const char* what) {
    if (s.size() != rank)
        throw Error(ErrorCode::dimension_mismatch,
                    std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + shape_string(s));
}

struct ConvGeometry {
    std::size_t n, cin, d, h, w;
    std::size_t cout, k;
    std::size_t od, oh, ow;
    int pad;

    std::size_t in_volume() const { return d * h * w; }
    std::size_t out_volume() const { return od * oh * ow; }
    std::size_t patch() const { return cin * k * k * k; }
};

template <typename T>
ConvGeometry conv_geometry(const Shape& in, const Shape& wt, int padding) {
    require_rank(in, 5, "conv3d input");
    require_rank(wt, 5, "conv3d weights");
    if (wt[1] != in[1])
        throw Error(ErrorCode::dimension_mismatch, "conv3d: weights " + shape_string(wt) +
                                                       " do not match input channels of " + shape_string(in));
    if (wt[2] != wt[3] || wt[3] != wt[4])
        throw Error(ErrorCode::dimension_mismatch, "conv3d: kernel must be cubic, got " + shape_string(wt));
    if (padding < 0)
        throw Error(ErrorCode::invalid_argument, "conv3d: negative padding");
    ConvGeometry g{in[0], in[1], in[2], in[3], in[4], wt[0], wt[2], 0, 0, 0, padding};
    const auto out_dim = [&](std::size_t d) -> std::size_t {
        const long o = long(d) + 2 * padding - long(g.k) + 1;
        if (o <= 0)
            throw Error(ErrorCode::dimension_mismatch, "conv3d: kernel larger than padded input " + shape_string(in));
        return std::size_t(o);
    };
    g.od = out_dim(g.d);
    g.oh = out_dim(g.h);
    g.ow = out_dim(g.w);
    return g;
}

// Patch matrix (cin*k^3, rows*ow) for output rows [r0, r1) of one sample,
// where output row r is (z, y) = (r / oh, r % oh).
template <typename T>
void im2col(const T* in, const ConvGeometry& g, std::size_t r0, std::size_t r1, T* col) {
    const long pad = g.pad;
    const std::size_t cols = (r1 - r0) * g.ow;
    for (std::size_t c = 0; c < g.cin; ++c)
        for (std::size_t a = 0; a < g.k; ++a)
            for (std::size_t b = 0; b < g.k; ++b)
                for (std::size_t e = 0; e < g.k; ++e) {
                    T* row = col + (((c * g.k + a) * g.k + b) * g.k + e) * cols;
                    const T* plane = in + c * g.in_volume();
                    const long x0 = std::max(0L, pad - long(e));
                    const long x1 = std::min(long(g.ow), long(g.w) + pad - long(e));
                    for (std::size_t r = r0; r < r1; ++r) {
                        const long iz = long(r / g.oh) + long(a) - pad;
                        const long iy = long(r % g.oh) + long(b) - pad;
                        T* dst = row + (r - r0) * g.ow;
                        if (iz < 0 || iz >= long(g.d) || iy < 0 || iy >= long(g.h) || x0 >= x1) {
                            std::fill(dst, dst + g.ow, T(0));
                            continue;
                        }
                        const T* src = plane + (std::size_t(iz) * g.h + std::size_t(iy)) * g.w + e - pad;
                        std::fill(dst, dst + x0, T(0));
                        std::copy(src + x0, src + x1, dst + x0);
                        std::fill(dst + x1, dst + g.ow, T(0));
                    }
                }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, std::size_t r0, std::size_t r1, T* in) {
    const long pad = g.pad;
    const std::size_t cols = (r1 - r0) * g.ow;
    for (std::size_t c = 0; c < g.cin; ++c)
        for (std::size_t a = 0; a < g.k; ++a)
            for (std::size_t b = 0; b < g.k; ++b)
                for (std::size_t e = 0; e < g.k; ++e) {
                    const T* row = col + (((c * g.k + a) * g.k + b) * g.k + e) * cols;
                    T* plane = in + c * g.in_volume();
                    const long x0 = std::max(0L, pad - long(e));
                    const long x1 = std::min(long(g.ow), long(g.w) + pad - long(e));
                    for (std::size_t r = r0; r < r1; ++r) {
                        const long iz = long(r / g.oh) + long(a) - pad;
                        const long iy = long(r % g.oh) + long(b) - pad;
                        if (iz < 0 || iz >= long(g.d) || iy < 0 || iy >= long(g.h))
                            continue;
                        const T* src = row + (r - r0) * g.ow;
                        T* dst = plane + (std::size_t(iz) * g.h + std::size_t(iy)) * g.w + e - pad;
                        for (long x = x0; x < x1; ++x)
                            dst[x] += src[x];
                    }
                }
}

// Output rows per im2col tile, sized so a tile stays cache resident.
std::size_t tile_rows(const ConvGeometry& g) {
    constexpr std::size_t kTileElements = 1 << 17;
    const std::size_t rows = kTileElements / std::max<std::size_t>(1, g.patch() * g.ow);
    return std::clamp<std::size_t>(rows, 1, g.od * g.oh);
}

} // namespace

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias, int padding) {
    const ConvGeometry g = conv_geometry<T>(input.shape(), weights.shape(), padding);
    if (bias.size() != g.cout)
        throw Error(ErrorCode::dimension_mismatch, "conv3d: bias " + shape_string(bias.shape()) + " for " +
                                                       std::to_string(g.cout) + " filters");
    Tensor<T> out({g.n, g.cout, g.od, g.oh, g.ow});
    const std::size_t rows = g.od * g.oh, tile = tile_rows(g);
    AlignedVector<T> col(g.patch() * tile * g.ow);
    const ConstMatrixMap<T> w(weights.data(), Eigen::Index(g.cout), Eigen::Index(g.patch()));
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), Eigen::Index(g.cout));
    for (std::size_t s = 0; s < g.n; ++s) {
        MatrixMap<T> o(out.data() + s * g.cout * g.out_volume(), Eigen::Index(g.cout), Eigen::Index(g.out_volume()));
        for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
            const std::size_t r1 = std::min(rows, r0 + tile), cols = (r1 - r0) * g.ow;
            im2col(input.data() + s * g.cin * g.in_volume(), g, r0, r1, col.data());
            const ConstMatrixMap<T> cm(col.data(), Eigen::Index(g.patch()), Eigen::Index(cols));
            o.middleCols(Eigen::Index(r0 * g.ow), Eigen::Index(cols)).noalias() = w * cm;
        }
        o.colwise() += b;
    }
    return out;
}

template <typename T>
Conv3dGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                               int padding, bool need_input_grad) {
    const ConvGeometry g = conv_geometry<T>(input.shape(), weights.shape(), padding);
    if (grad_output.shape() != Shape{g.n, g.cout, g.od, g.oh, g.ow})
        throw Error(ErrorCode::dimension_mismatch, "conv3d backward: gradient shape " +
                                                       shape_string(grad_output.shape()) + " does not match output");
    Conv3dGrads<T> grads{need_input_grad ? Tensor<T>(input.shape()) : Tensor<T>(), Tensor<T>(weights.shape()),
                         Tensor<T>(Shape{g.cout})};
    const std::size_t rows = g.od * g.oh, tile = tile_rows(g);
    AlignedVector<T> col(g.patch() * tile * g.ow);
    const ConstMatrixMap<T> w(weights.data(), Eigen::Index(g.cout), Eigen::Index(g.patch()));
    MatrixMap<T> gw(grads.weights.data(), Eigen::Index(g.cout), Eigen::Index(g.patch()));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(grads.bias.data(), Eigen::Index(g.cout));
    for (std::size_t s = 0; s < g.n; ++s) {
        const ConstMatrixMap<T> go(grad_output.data() + s * g.cout * g.out_volume(), Eigen::Index(g.cout),
                                   Eigen::Index(g.out_volume()));
        gb += go.rowwise().sum();
        for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
            const std::size_t r1 = std::min(rows, r0 + tile), cols = (r1 - r0) * g.ow;
            const auto go_tile = go.middleCols(Eigen::Index(r0 * g.ow), Eigen::Index(cols));
            im2col(input.data() + s * g.cin * g.in_volume(), g, r0, r1, col.data());
            MatrixMap<T> cm(col.data(), Eigen::Index(g.patch()), Eigen::Index(cols));
            gw.noalias() += go_tile * cm.transpose();
            if (need_input_grad) {
                cm.noalias() = w.transpose() * go_tile;
                col2im(col.data(), g, r0, r1, grads.input.data() + s * g.cin * g.in_volume());
            }
        }
    }
    return grads;
}

template <typename T>
PoolResult<T> maxpool3d(const Tensor<T>& input) {
    require_rank(input.shape(), 5, "maxpool3d input");
    const auto& s = input.shape();
    const std::size_t d = s[2], h = s[3], w = s[4];
    const std::size_t od = (d + 1) / 2, oh = (h + 1) / 2, ow = (w + 1) / 2;
    PoolResult<T> r{Tensor<T>({s[0], s[1], od, oh, ow}), {}};
    r.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
        const T* src = input.data() + plane * d * h * w;
        for (std::size_t z = 0; z < od; ++z)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x, ++o) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t arg = 0;
                    for (std::size_t iz = 2 * z; iz < std::min(2 * z + 2, d); ++iz)
                        for (std::size_t iy = 2 * y; iy < std::min(2 * y + 2, h); ++iy)
                            for (std::size_t ix = 2 * x; ix < std::min(2 * x + 2, w); ++ix) {
                                const std::size_t at = (iz * h + iy) * w + ix;
                                if (src[at] > best) {
                                    best = src[at];
                                    arg = at;
                                }
                            }
                    r.output[o] = best;
                    r.argmax[o] = std::uint32_t(plane * d * h * w + arg);
                }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool3d_backward(const Tensor<T>& grad_output, std::span<const std::uint32_t> argmax,
                             const Shape& input_shape) {
    if (argmax.size() != grad_output.size())
        throw Error(ErrorCode::dimension_mismatch, "maxpool3d backward: argmax/gradient size mismatch");
    Tensor<T> grad(input_shape);
    for (std::size_t o = 0; o < grad_output.size(); ++o)
        grad[argmax[o]] += grad_output[o];
    return grad;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, int factor) {
    require_rank(input.shape(), 5, "upsample input");
    const auto& s = input.shape();
    const std::size_t f = std::size_t(factor);
    const std::size_t d = s[2], h = s[3], w = s[4];
    Tensor<T> out({s[0], s[1], d * f, h * f, w * f});
    T* dst = out.data();
    for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
        const T* src = input.data() + plane * d * h * w;
        for (std::size_t z = 0; z < d * f; ++z)
            for (std::size_t y = 0; y < h * f; ++y) {
                const T* row = src + ((z / f) * h + y / f) * w;
                for (std::size_t x = 0; x < w * f; ++x)
                    *dst++ = row[x / f];
            }
    }
    return out;
}

template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& grad_output, int factor) {
    require_rank(grad_output.shape(), 5, "upsample gradient");
    const auto& s = grad_output.shape();
    const std::size_t f = std::size_t(factor);
    if (s[2] % f || s[3] % f || s[4] % f)
        throw Error(ErrorCode::dimension_mismatch, "upsample backward: " + shape_string(s) +
                                                       " not divisible by factor");
    const std::size_t d = s[2] / f, h = s[3] / f, w = s[4] / f;
    Tensor<T> grad({s[0], s[1], d, h, w});
    const T* src = grad_output.data();
    for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
        T* dst = grad.data() + plane * d * h * w;
        for (std::size_t z = 0; z < d * f; ++z)
            for (std::size_t y = 0; y < h * f; ++y) {
                T* row = dst + ((z / f) * h + y / f) * w;
                for (std::size_t x = 0; x < w * f; ++x)
                    row[x / f] += *src++;
            }
    }
    return grad;
}

template <typename T>
Tensor<T> center_crop(const Tensor<T>& input, std::size_t cd, std::size_t ch, std::size_t cw) {
    require_rank(input.shape(), 5, "crop input");
    const auto& s = input.shape();
    if (cd > s[2] || ch > s[3] || cw > s[4])
        throw Error(ErrorCode::dimension_mismatch, "crop larger than input " + shape_string(s));
    const std::size_t z0 = (s[2] - cd) / 2, y0 = (s[3] - ch) / 2, x0 = (s[4] - cw) / 2;
    Tensor<T> out({s[0], s[1], cd, ch, cw});
    T* dst = out.data();
    for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
        const T* src = input.data() + plane * s[2] * s[3] * s[4];
        for (std::size_t z = 0; z < cd; ++z)
            for (std::size_t y = 0; y < ch; ++y) {
                const T* row = src + ((z + z0) * s[3] + (y + y0)) * s[4] + x0;
                dst = std::copy(row, row + cw, dst);
            }
    }
    return out;
}

template <typename T>
Tensor<T> center_crop_backward(const Tensor<T>& grad_output, const Shape& input_shape) {
    require_rank(input_shape, 5, "crop input");
    const auto& g = grad_output.shape();
    const auto& s = input_shape;
    const std::size_t cd = g[2], ch = g[3], cw = g[4];
    const std::size_t z0 = (s[2] - cd) / 2, y0 = (s[3] - ch) / 2, x0 = (s[4] - cw) / 2;
    Tensor<T> grad(input_shape);
    const T* src = grad_output.data();
    for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
        T* dst = grad.data() + plane * s[2] * s[3] * s[4];
        for (std::size_t z = 0; z < cd; ++z)
            for (std::size_t y = 0; y < ch; ++y) {
                T* row = dst + ((z + z0) * s[3] + (y + y0)) * s[4] + x0;
                std::copy(src, src + cw, row);
                src += cw;
            }
    }
    return grad;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    require_rank(input.shape(), 2, "dense input");
    require_rank(weights.shape(), 2, "dense weights");
    const std::size_t n = input.dim(0), f = input.dim(1), o = weights.dim(0);
    if (weights.dim(1) != f || bias.size() != o)
        throw Error(ErrorCode::dimension_mismatch, "dense: input " + shape_string(input.shape()) + ", weights " +
                                                       shape_string(weights.shape()) + ", bias " +
                                                       shape_string(bias.shape()));
    Tensor<T> out({n, o});
    const ConstMatrixMap<T> x(input.data(), Eigen::Index(n), Eigen::Index(f));
    const ConstMatrixMap<T> w(weights.data(), Eigen::Index(o), Eigen::Index(f));
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), Eigen::Index(o));
    MatrixMap<T> y(out.data(), Eigen::Index(n), Eigen::Index(o));
    y.noalias() = x * w.transpose();
    y.rowwise() += b;
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output) {
    const std::size_t n = input.dim(0), f = input.dim(1), o = weights.dim(0);
    if (grad_output.shape() != Shape{n, o})
        throw Error(ErrorCode::dimension_mismatch, "dense backward: gradient " +
                                                       shape_string(grad_output.shape()) + " does not match output");
    DenseGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>(Shape{o})};
    const ConstMatrixMap<T> x(input.data(), Eigen::Index(n), Eigen::Index(f));
    const ConstMatrixMap<T> w(weights.data(), Eigen::Index(o), Eigen::Index(f));
    const ConstMatrixMap<T> gy(grad_output.data(), Eigen::Index(n), Eigen::Index(o));
    MatrixMap<T>(grads.input.data(), Eigen::Index(n), Eigen::Index(f)).noalias() = gy * w;
    MatrixMap<T>(grads.weights.data(), Eigen::Index(o), Eigen::Index(f)).noalias() = gy.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grads.bias.data(), Eigen::Index(o)) = gy.colwise().sum();
    return grads;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> out = input;
    for (auto& v : out.values())
        v = v > T(0) ? v : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
    if (input.shape() != grad_output.shape())
        throw Error(ErrorCode::dimension_mismatch, "relu backward: shape mismatch");
    Tensor<T> grad = grad_output;
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(input[i] > T(0)))
            grad[i] = T(0);
    return grad;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
    if (logits.rank() < 2)
        throw Error(ErrorCode::dimension_mismatch, "softmax: rank must be >= 2");
    const std::size_t n = logits.dim(0), c = logits.dim(1), v = logits.size() / (n * c);
    Tensor<T> out(logits.shape());
    for (std::size_t s = 0; s < n; ++s) {
        const T* src = logits.data() + s * c * v;
        T* dst = out.data() + s * c * v;
        for (std::size_t p = 0; p < v; ++p) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t ch = 0; ch < c; ++ch)
                mx = std::max(mx, double(src[ch * v + p]));
            double sum = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch)
                sum += std::exp(double(src[ch * v + p]) - mx);
            for (std::size_t ch = 0; ch < c; ++ch)
                dst[ch * v + p] = T(std::exp(double(src[ch * v + p]) - mx) / sum);
        }
    }
    return out;
}

template <typename T>
LossResult<T> softmax_ce_loss(const Tensor<T>& logits, const Tensor<T>& target) {
    if (logits.shape() != target.shape())
        throw Error(ErrorCode::dimension_mismatch, "softmax_ce: logits " + shape_string(logits.shape()) +
                                                       " vs target " + shape_string(target.shape()));
    if (logits.rank() < 2)
        throw Error(ErrorCode::dimension_mismatch, "softmax_ce: rank must be >= 2");
    const std::size_t n = logits.dim(0), c = logits.dim(1), v = logits.size() / (n * c);
    const double count = double(n * v);
    LossResult<T> r{0.0, Tensor<T>(logits.shape())};
    for (std::size_t s = 0; s < n; ++s) {
        const T* lg = logits.data() + s * c * v;
        const T* tg = target.data() + s * c * v;
        T* gr = r.grad.data() + s * c * v;
        for (std::size_t p = 0; p < v; ++p) {
            int hot = -1;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T t = tg[ch * v + p];
                if (t == T(1) && hot < 0)
                    hot = int(ch);
                else if (t != T(0))
                    throw Error(ErrorCode::invalid_argument, "softmax_ce: target is not one-hot at sample " +
                                                                 std::to_string(s) + ", voxel " + std::to_string(p));
            }
            if (hot < 0)
                throw Error(ErrorCode::invalid_argument, "softmax_ce: target is not one-hot at sample " +
                                                             std::to_string(s) + ", voxel " + std::to_string(p));
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t ch = 0; ch < c; ++ch)
                mx = std::max(mx, double(lg[ch * v + p]));
            double sum = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch)
                sum += std::exp(double(lg[ch * v + p]) - mx);
            const double log_sum = std::log(sum) + mx;
            r.loss += log_sum - double(lg[std::size_t(hot) * v + p]);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double prob = std::exp(double(lg[ch * v + p]) - log_sum);
                gr[ch * v + p] = T((prob - (int(ch) == hot ? 1.0 : 0.0)) / count);
            }
        }
    }
    r.loss /= count;
    return r;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, long& step, const AdamOptions& opts) {
    ++step;
    const double c1 = 1.0 - std::pow(opts.beta1, double(step));
    const double c2 = 1.0 - std::pow(opts.beta2, double(step));
    for (Parameter<T>* p : params) {
        if (p->grad.shape() != p->value.shape())
            throw Error(ErrorCode::dimension_mismatch, "adam: gradient shape differs for " + p->name);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = double(p->grad[i]);
            const double m = opts.beta1 * double(p->m[i]) + (1.0 - opts.beta1) * g;
            const double v = opts.beta2 * double(p->v[i]) + (1.0 - opts.beta2) * g * g;
            p->m[i] = T(m);
            p->v[i] = T(v);
            p->value[i] = T(double(p->value[i]) - opts.lr * (m / c1) / (std::sqrt(v / c2) + opts.eps));
        }
    }
}

namespace {

// Nearest x2 upsampling followed by a padded 3-tap filter: output 2m+p reads
// low-res cells m-1+p and m+p, so each parity p sees a folded 2-tap filter.
bool folds(int p, int t, int a) {
    if (p == 0)
        return t == 0 ? a == 0 : a >= 1;
    return t == 0 ? a <= 1 : a == 2;
}

template <typename T>
Tensor<T> fold_weights(const Tensor<T>& w, int pz, int py, int px) {
    const std::size_t cout = w.dim(0), cin = w.dim(1);
    Tensor<T> out({cout, cin, 2, 2, 2});
    for (std::size_t f = 0; f < cout * cin; ++f) {
        const T* src = w.data() + f * 27;
        T* dst = out.data() + f * 8;
        for (int tz = 0; tz < 2; ++tz)
            for (int ty = 0; ty < 2; ++ty)
                for (int tx = 0; tx < 2; ++tx) {
                    T acc = T(0);
                    for (int a = 0; a < 3; ++a)
                        for (int b = 0; b < 3; ++b)
                            for (int c = 0; c < 3; ++c)
                                if (folds(pz, tz, a) && folds(py, ty, b) && folds(px, tx, c))
                                    acc += src[(a * 3 + b) * 3 + c];
                    dst[(tz * 2 + ty) * 2 + tx] = acc;
                }
    }
    return out;
}

template <typename T>
void unfold_weight_grad(const Tensor<T>& folded, int pz, int py, int px, Tensor<T>& grad) {
    const std::size_t filters = grad.dim(0) * grad.dim(1);
    for (std::size_t f = 0; f < filters; ++f) {
        const T* src = folded.data() + f * 8;
        T* dst = grad.data() + f * 27;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c) {
                    const int tz = folds(pz, 0, a) ? 0 : 1, ty = folds(py, 0, b) ? 0 : 1, tx = folds(px, 0, c) ? 0 : 1;
                    dst[(a * 3 + b) * 3 + c] += src[(tz * 2 + ty) * 2 + tx];
                }
    }
}

void check_upconv(const Shape& in, const Shape& w) {
    require_rank(in, 5, "upconv3d input");
    require_rank(w, 5, "upconv3d weights");
    if (w[1] != in[1] || w[2] != 3 || w[3] != 3 || w[4] != 3)
        throw Error(ErrorCode::dimension_mismatch,
                    "upconv3d: weights " + shape_string(w) + " do not fit input " + shape_string(in));
}

// Copies between the full-resolution tensor and one parity's (s+1)^3 result.
template <bool ToFull, typename F, typename P>
void scatter_parity(F* full, P* part, std::size_t planes, std::size_t d, std::size_t h, std::size_t w, int pz, int py,
                    int px) {
    const std::size_t pd = d + 1, ph = h + 1, pw = w + 1;
    for (std::size_t c = 0; c < planes; ++c) {
        F* f = full + c * 8 * d * h * w;
        P* q = part + c * pd * ph * pw;
        for (std::size_t z = 0; z < d; ++z)
            for (std::size_t y = 0; y < h; ++y) {
                F* frow = f + ((2 * z + pz) * 2 * h + (2 * y + py)) * 2 * w + px;
                P* qrow = q + ((z + pz) * ph + (y + py)) * pw + px;
                for (std::size_t x = 0; x < w; ++x) {
                    if constexpr (ToFull)
                        frow[2 * x] = qrow[x];
                    else
                        qrow[x] = frow[2 * x];
                }
            }
    }
}

} // namespace

template <typename T>
Tensor<T> upconv3d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    check_upconv(input.shape(), weights.shape());
    const auto& s = input.shape();
    const std::size_t n = s[0], cout = weights.dim(0);
    Tensor<T> out({n, cout, 2 * s[2], 2 * s[3], 2 * s[4]});
    for (int p = 0; p < 8; ++p) {
        const int pz = p >> 2, py = (p >> 1) & 1, px = p & 1;
        Tensor<T> part = conv3d_forward(input, fold_weights(weights, pz, py, px), bias, 1);
        scatter_parity<true>(out.data(), part.data(), n * cout, s[2], s[3], s[4], pz, py, px);
    }
    return out;
}

template <typename T>
Conv3dGrads<T> upconv3d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                                 bool need_input_grad) {
    check_upconv(input.shape(), weights.shape());
    const auto& s = input.shape();
    const std::size_t n = s[0], cout = weights.dim(0);
    if (grad_output.shape() != Shape{n, cout, 2 * s[2], 2 * s[3], 2 * s[4]})
        throw Error(ErrorCode::dimension_mismatch, "upconv3d backward: gradient shape " +
                                                       shape_string(grad_output.shape()) + " does not match output");
    Conv3dGrads<T> grads{need_input_grad ? Tensor<T>(input.shape()) : Tensor<T>(), Tensor<T>(weights.shape()),
                         Tensor<T>(Shape{cout})};
    Tensor<T> part({n, cout, s[2] + 1, s[3] + 1, s[4] + 1});
    for (int p = 0; p < 8; ++p) {
        const int pz = p >> 2, py = (p >> 1) & 1, px = p & 1;
        part.fill(T(0));
        scatter_parity<false>(grad_output.data(), part.data(), n * cout, s[2], s[3], s[4], pz, py,
                                 px);
        auto g = conv3d_backward(input, fold_weights(weights, pz, py, px), part, 1, need_input_grad);
        unfold_weight_grad(g.weights, pz, py, px, grads.weights);
        for (std::size_t i = 0; i < cout; ++i)
            grads.bias[i] += g.bias[i];
        if (need_input_grad)
            for (std::size_t i = 0; i < grads.input.size(); ++i)
                grads.input[i] += g.input[i];
    }
    return grads;
}

#define VOXNOX_INSTANTIATE_OPS(T)                                                                                    \
    template Tensor<T> conv3d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);                    \
    template Conv3dGrads<T> conv3d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, bool);        \
    template Tensor<T> upconv3d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
    template Conv3dGrads<T> upconv3d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);           \
    template PoolResult<T> maxpool3d(const Tensor<T>&);                                                              \
    template Tensor<T> maxpool3d_backward(const Tensor<T>&, std::span<const std::uint32_t>, const Shape&);           \
    template Tensor<T> upsample_nearest(const Tensor<T>&, int);                                                      \
    template Tensor<T> upsample_nearest_backward(const Tensor<T>&, int);                                             \
    template Tensor<T> center_crop(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                         \
    template Tensor<T> center_crop_backward(const Tensor<T>&, const Shape&);                                         \
    template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                          \
    template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
    template Tensor<T> relu_forward(const Tensor<T>&);                                                               \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                            \
    template Tensor<T> softmax_channels(const Tensor<T>&);                                                           \
    template LossResult<T> softmax_ce_loss(const Tensor<T>&, const Tensor<T>&);                                      \
    template void adam_step(std::span<Parameter<T>* const>, long&, const AdamOptions&);

VOXNOX_INSTANTIATE_OPS(float)
VOXNOX_INSTANTIATE_OPS(double)

} // namespace voxnox::nn
