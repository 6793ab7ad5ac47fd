#pragma once

#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "voxnox/error.hpp"

namespace voxnox::nn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Vectorised reductions peel loops by address, so a fixed alignment keeps
// results independent of where the heap places a buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major tensor of rank 1..5. Layer inputs use (batch, channels, d0, d1, d2).
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {
        if (shape_.empty() || shape_.size() > 5)
            throw Error(ErrorCode::dimension_mismatch, "tensor rank must be 1..5, got " + shape_string(shape_));
    }
    Tensor(Shape shape, std::span<const T> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (shape_.empty() || shape_.size() > 5 || data_.size() != shape_volume(shape_))
            throw Error(ErrorCode::dimension_mismatch,
                        "data length " + std::to_string(data_.size()) + " does not fit " + shape_string(shape_));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape shape) const {
        if (shape_volume(shape) != data_.size())
            throw Error(ErrorCode::dimension_mismatch, "cannot reshape " + shape_string(shape_) + " to " +
                                                           shape_string(shape));
        Tensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    AlignedVector<T> data_;
};

// Trainable tensor with its gradient and Adam moments.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m;
    Tensor<T> v;

    Parameter() = default;
    Parameter(std::string n, Shape shape)
        : name(std::move(n)), value(shape), grad(shape), m(shape), v(std::move(shape)) {}

    void zero_grad() { grad.fill(T(0)); }
};

} // namespace voxnox::nn
