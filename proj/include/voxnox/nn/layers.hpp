#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voxnox/nn/ops.hpp"
#include "voxnox/random.hpp"

namespace voxnox::nn {

// Stateful layer: forward caches what backward needs; backward accumulates
// parameter gradients and returns the input gradient.
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual Tensor<T> forward(const Tensor<T>& input) = 0;
    // Forward without touching any cache; safe to call concurrently.
    virtual Tensor<T> infer(const Tensor<T>& input) const = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;
    virtual std::vector<Parameter<T>*> parameters() { return {}; }
    // Glorot-uniform weights, zero biases.
    virtual void initialize(Rng&) {}
    virtual void release_cache() {}
};

template <typename T>
class Conv3d final : public Layer<T> {
public:
    Conv3d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int padding);
    std::string kind() const override { return "conv3d"; }
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override {
        return conv3d_forward(input, weight_.value, bias_.value, padding_);
    }
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
    void initialize(Rng& rng) override;
    void release_cache() override { input_ = Tensor<T>(); }
    // The first layer of a network never needs an input gradient.
    void set_input_grad(bool on) { input_grad_ = on; }

private:
    Parameter<T> weight_;
    Parameter<T> bias_;
    int padding_;
    bool input_grad_ = true;
    Tensor<T> input_;
};

// Nearest x2 upsampling fused with a padded 3^3 convolution.
template <typename T>
class UpConv3d final : public Layer<T> {
public:
    UpConv3d(std::string name, std::size_t in_channels, std::size_t out_channels);
    std::string kind() const override { return "upconv3d"; }
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override {
        return upconv3d_forward(input, weight_.value, bias_.value);
    }
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
    void initialize(Rng& rng) override;
    void release_cache() override { input_ = Tensor<T>(); }

private:
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(std::string name, std::size_t in_features, std::size_t out_features);
    std::string kind() const override { return "dense"; }
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override {
        return dense_forward(input, weight_.value, bias_.value);
    }
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
    void initialize(Rng& rng) override;
    void release_cache() override { input_ = Tensor<T>(); }

private:
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

template <typename T>
class MaxPool3d final : public Layer<T> {
public:
    std::string kind() const override { return "maxpool3d"; }
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override { return maxpool3d(input).output; }
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    void release_cache() override { argmax_.clear(); }

private:
    Shape input_shape_;
    std::vector<std::uint32_t> argmax_;
};

template <typename T>
class Upsample3d final : public Layer<T> {
public:
    std::string kind() const override { return "upsample"; }
    Tensor<T> forward(const Tensor<T>& input) override { return upsample_nearest(input, 2); }
    Tensor<T> infer(const Tensor<T>& input) const override { return upsample_nearest(input, 2); }
    Tensor<T> backward(const Tensor<T>& grad_output) override { return upsample_nearest_backward(grad_output, 2); }
};

template <typename T>
class CenterCrop3d final : public Layer<T> {
public:
    explicit CenterCrop3d(std::size_t size) : size_(size) {}
    std::string kind() const override { return "crop"; }
    Tensor<T> forward(const Tensor<T>& input) override {
        input_shape_ = input.shape();
        return center_crop(input, size_, size_, size_);
    }
    Tensor<T> infer(const Tensor<T>& input) const override { return center_crop(input, size_, size_, size_); }
    Tensor<T> backward(const Tensor<T>& grad_output) override {
        return center_crop_backward(grad_output, input_shape_);
    }

private:
    std::size_t size_;
    Shape input_shape_;
};

template <typename T>
class ReLU final : public Layer<T> {
public:
    std::string kind() const override { return "relu"; }
    Tensor<T> forward(const Tensor<T>& input) override {
        input_ = input;
        return relu_forward(input);
    }
    Tensor<T> infer(const Tensor<T>& input) const override { return relu_forward(input); }
    Tensor<T> backward(const Tensor<T>& grad_output) override { return relu_backward(input_, grad_output); }
    void release_cache() override { input_ = Tensor<T>(); }

private:
    Tensor<T> input_;
};

// Reinterprets each sample as `sample_shape` (batch axis preserved).
template <typename T>
class Reshape final : public Layer<T> {
public:
    explicit Reshape(Shape sample_shape) : sample_shape_(std::move(sample_shape)) {}
    std::string kind() const override { return "reshape"; }
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& grad_output) override { return grad_output.reshaped(input_shape_); }

private:
    Shape sample_shape_;
    Shape input_shape_;
};

template <typename T>
class Sequential {
public:
    void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
    Tensor<T> forward(const Tensor<T>& input);
    Tensor<T> infer(const Tensor<T>& input) const;
    Tensor<T> backward(const Tensor<T>& grad_output);
    std::vector<Parameter<T>*> parameters();
    std::vector<const Parameter<T>*> parameters() const;
    void initialize(Rng& rng);
    void zero_grad();
    void release_cache();
    std::size_t size() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Central finite differences (step `step`) of L = sum(r * layer(x)) for a fixed
// random r, against the analytic input and parameter gradients. Returns the max
// of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
double grad_check(Layer<double>& layer, const Tensor<double>& input, double step = 1e-3, std::uint64_t seed = 7);

// Same measure for the softmax cross-entropy loss with respect to its logits.
double grad_check_softmax_ce(const Tensor<double>& logits, const Tensor<double>& target, double step = 1e-3);

} // namespace voxnox::nn
