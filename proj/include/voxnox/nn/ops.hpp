#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxnox/nn/tensor.hpp"

namespace voxnox::nn {

// 3D convolution over (N, Cin, D, H, W) with cubic kernels (Cout, Cin, k, k, k),
// unit stride and symmetric zero padding. padding = k / 2 keeps the spatial shape.
template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias, int padding);

template <typename T>
struct Conv3dGrads {
    Tensor<T> input;   // empty when not requested
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
Conv3dGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                               int padding, bool need_input_grad = true);

// Nearest x2 upsampling followed by a 3^3 conv with padding 1, computed as
// eight folded 2^3 convolutions on the low-resolution input.
template <typename T>
Tensor<T> upconv3d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
Conv3dGrads<T> upconv3d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                                 bool need_input_grad = true);

// 2x2x2 max pooling, stride 2, ceil mode: the last window along an odd axis is partial.
template <typename T>
struct PoolResult {
    Tensor<T> output;
    std::vector<std::uint32_t> argmax; // flat input offset per output element
};

template <typename T>
PoolResult<T> maxpool3d(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool3d_backward(const Tensor<T>& grad_output, std::span<const std::uint32_t> argmax,
                             const Shape& input_shape);

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, int factor = 2);

template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& grad_output, int factor = 2);

// Keeps the centred (d, h, w) block of each channel.
template <typename T>
Tensor<T> center_crop(const Tensor<T>& input, std::size_t d, std::size_t h, std::size_t w);

template <typename T>
Tensor<T> center_crop_backward(const Tensor<T>& grad_output, const Shape& input_shape);

// (N, F) x (O, F)^T + b -> (N, O)
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

// Softmax along axis 1, per (sample, voxel).
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad; // d loss / d logits
};

// Categorical cross-entropy averaged over batch and voxels; target must be one-hot along axis 1.
template <typename T>
LossResult<T> softmax_ce_loss(const Tensor<T>& logits, const Tensor<T>& target);

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter; `step` is incremented first.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, long& step, const AdamOptions& opts);

} // namespace voxnox::nn
