#include "voxnox/nn/weights.hpp"

#include <bit>
#include <cstring>

namespace voxnox::nn {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8)
        out.push_back(char((v >> s) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t(std::uint8_t(bytes_[pos_ + std::size_t(i)])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw Error(ErrorCode::format, "weight file truncated at byte " + std::to_string(pos_));
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_weights(std::span<const NamedTensor> tensors) {
    std::string out(kWeightMagic, 4);
    put_u32(out, kWeightVersion);
    put_u32(out, std::uint32_t(tensors.size()));
    for (const auto& t : tensors) {
        put_u32(out, std::uint32_t(t.name.size()));
        out += t.name;
        put_u32(out, std::uint32_t(t.tensor.rank()));
        for (std::size_t d : t.tensor.shape())
            put_u32(out, std::uint32_t(d));
    }
    for (const auto& t : tensors)
        for (float v : t.tensor.values())
            put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

std::vector<NamedTensor> decode_weights(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(4) != std::string_view(kWeightMagic, 4))
        throw Error(ErrorCode::format, "not a weight file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kWeightVersion)
        throw Error(ErrorCode::format, "unsupported weight file version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    std::vector<std::pair<std::string, Shape>> manifest;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.take(r.u32()));
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > 5)
            throw Error(ErrorCode::format, "tensor '" + name + "' has invalid rank " + std::to_string(rank));
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d)
            shape.push_back(r.u32());
        manifest.emplace_back(std::move(name), std::move(shape));
    }
    std::vector<NamedTensor> out;
    for (auto& [name, shape] : manifest) {
        std::vector<float> data(shape_volume(shape));
        for (auto& v : data)
            v = std::bit_cast<float>(r.u32());
        out.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(data))});
    }
    if (!r.done())
        throw Error(ErrorCode::format, "trailing bytes after weight data");
    return out;
}

} // namespace voxnox::nn
