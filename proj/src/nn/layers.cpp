#include "voxnox/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace voxnox::nn {

namespace {

template <typename T>
void glorot(Tensor<T>& w, double fan_in, double fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : w.values())
        v = T(dist(rng));
}

double relative_error(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

} // namespace

template <typename T>
Conv3d<T>::Conv3d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  int padding)
    : weight_(name + ".weight", {out_channels, in_channels, kernel, kernel, kernel}),
      bias_(name + ".bias", {out_channels}),
      padding_(padding) {}

template <typename T>
Tensor<T> Conv3d<T>::forward(const Tensor<T>& input) {
    input_ = input;
    return conv3d_forward(input, weight_.value, bias_.value, padding_);
}

template <typename T>
Tensor<T> Conv3d<T>::backward(const Tensor<T>& grad_output) {
    auto g = conv3d_backward(input_, weight_.value, grad_output, padding_, input_grad_);
    for (std::size_t i = 0; i < g.weights.size(); ++i)
        weight_.grad[i] += g.weights[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i)
        bias_.grad[i] += g.bias[i];
    return std::move(g.input);
}

template <typename T>
void Conv3d<T>::initialize(Rng& rng) {
    const auto& s = weight_.value.shape();
    const double receptive = double(s[2] * s[3] * s[4]);
    glorot(weight_.value, double(s[1]) * receptive, double(s[0]) * receptive, rng);
    bias_.value.fill(T(0));
    for (auto* p : {&weight_, &bias_}) {
        p->m.fill(T(0));
        p->v.fill(T(0));
        p->grad.fill(T(0));
    }
}

template <typename T>
UpConv3d<T>::UpConv3d(std::string name, std::size_t in_channels, std::size_t out_channels)
    : weight_(name + ".weight", {out_channels, in_channels, 3, 3, 3}), bias_(name + ".bias", {out_channels}) {}

template <typename T>
Tensor<T> UpConv3d<T>::forward(const Tensor<T>& input) {
    input_ = input;
    return upconv3d_forward(input, weight_.value, bias_.value);
}

template <typename T>
Tensor<T> UpConv3d<T>::backward(const Tensor<T>& grad_output) {
    auto g = upconv3d_backward(input_, weight_.value, grad_output);
    for (std::size_t i = 0; i < g.weights.size(); ++i)
        weight_.grad[i] += g.weights[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i)
        bias_.grad[i] += g.bias[i];
    return std::move(g.input);
}

template <typename T>
void UpConv3d<T>::initialize(Rng& rng) {
    const auto& s = weight_.value.shape();
    glorot(weight_.value, double(s[1]) * 27.0, double(s[0]) * 27.0, rng);
    bias_.value.fill(T(0));
    for (auto* p : {&weight_, &bias_}) {
        p->m.fill(T(0));
        p->v.fill(T(0));
        p->grad.fill(T(0));
    }
}

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in_features, std::size_t out_features)
    : weight_(name + ".weight", {out_features, in_features}), bias_(name + ".bias", {out_features}) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input) {
    input_ = input;
    return dense_forward(input, weight_.value, bias_.value);
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_output) {
    auto g = dense_backward(input_, weight_.value, grad_output);
    for (std::size_t i = 0; i < g.weights.size(); ++i)
        weight_.grad[i] += g.weights[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i)
        bias_.grad[i] += g.bias[i];
    return std::move(g.input);
}

template <typename T>
void Dense<T>::initialize(Rng& rng) {
    glorot(weight_.value, double(weight_.value.dim(1)), double(weight_.value.dim(0)), rng);
    bias_.value.fill(T(0));
    for (auto* p : {&weight_, &bias_}) {
        p->m.fill(T(0));
        p->v.fill(T(0));
        p->grad.fill(T(0));
    }
}

template <typename T>
Tensor<T> MaxPool3d<T>::forward(const Tensor<T>& input) {
    input_shape_ = input.shape();
    auto r = maxpool3d(input);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
}

template <typename T>
Tensor<T> MaxPool3d<T>::backward(const Tensor<T>& grad_output) {
    return maxpool3d_backward(grad_output, argmax_, input_shape_);
}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& input) {
    input_shape_ = input.shape();
    return infer(input);
}

template <typename T>
Tensor<T> Reshape<T>::infer(const Tensor<T>& input) const {
    Shape shape{input.dim(0)};
    shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
    return input.reshaped(std::move(shape));
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& input) const {
    Tensor<T> x = input;
    for (const auto& l : layers_)
        x = l->infer(x);
    return x;
}

template <typename T>
std::vector<const Parameter<T>*> Sequential<T>::parameters() const {
    std::vector<const Parameter<T>*> out;
    for (const auto& l : layers_)
        for (auto* p : l->parameters())
            out.push_back(p);
    return out;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& input) {
    Tensor<T> x = input;
    for (auto& l : layers_)
        x = l->forward(x);
    return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_output) {
    Tensor<T> g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = (*it)->backward(g);
    return g;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& l : layers_)
        for (auto* p : l->parameters())
            out.push_back(p);
    return out;
}

template <typename T>
void Sequential<T>::initialize(Rng& rng) {
    for (auto& l : layers_)
        l->initialize(rng);
}

template <typename T>
void Sequential<T>::zero_grad() {
    for (auto* p : parameters())
        p->zero_grad();
}

template <typename T>
void Sequential<T>::release_cache() {
    for (auto& l : layers_)
        l->release_cache();
}

double grad_check(Layer<double>& layer, const Tensor<double>& input, double step, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<double> probe = layer.forward(input);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : probe.values())
        v = dist(rng);

    auto loss = [&](const Tensor<double>& x) {
        const Tensor<double> y = layer.forward(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i)
            s += probe[i] * y[i];
        return s;
    };

    for (auto* p : layer.parameters())
        p->zero_grad();
    layer.forward(input);
    const Tensor<double> grad_input = layer.backward(probe);
    std::vector<Tensor<double>> grad_params;
    for (auto* p : layer.parameters())
        grad_params.push_back(p->grad);

    double worst = 0.0;
    Tensor<double> x = input;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double up = loss(x);
        x[i] = orig - step;
        const double down = loss(x);
        x[i] = orig;
        worst = std::max(worst, relative_error(grad_input[i], (up - down) / (2.0 * step)));
    }
    const auto params = layer.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double orig = value[i];
            value[i] = orig + step;
            const double up = loss(input);
            value[i] = orig - step;
            const double down = loss(input);
            value[i] = orig;
            worst = std::max(worst, relative_error(grad_params[k][i], (up - down) / (2.0 * step)));
        }
    }
    return worst;
}

double grad_check_softmax_ce(const Tensor<double>& logits, const Tensor<double>& target, double step) {
    const auto analytic = softmax_ce_loss(logits, target).grad;
    Tensor<double> x = logits;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double up = softmax_ce_loss(x, target).loss;
        x[i] = orig - step;
        const double down = softmax_ce_loss(x, target).loss;
        x[i] = orig;
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * step)));
    }
    return worst;
}

template class Conv3d<float>;
template class Conv3d<double>;
template class UpConv3d<float>;
template class UpConv3d<double>;
template class Dense<float>;
template class Dense<double>;
template class MaxPool3d<float>;
template class MaxPool3d<double>;
template class Reshape<float>;
template class Reshape<double>;
template class Sequential<float>;
template class Sequential<double>;

} // namespace voxnox::nn
