#include "frans/network.hpp"

#include <algorithm>
#include <stdexcept>

namespace frans {

Tensor Network::forward(const Tensor& input, Mode mode) {
    Tensor x = input;
    for (LayerState& layer : layers_) x = frans::forward(layer, x, mode);
    forward_done_ = true;
    return x;
}

Tensor Network::infer(const Tensor& input, std::size_t layer_count) const {
    const std::size_t n = std::min(layer_count, layers_.size());
    Tensor x = input;
    for (std::size_t i = 0; i < n; ++i) x = frans::infer(layers_[i], x);
    return x;
}

std::vector<Tensor> Network::infer_all(const Tensor& input) const {
    std::vector<Tensor> outputs;
    outputs.reserve(layers_.size());
    const Tensor* x = &input;
    for (const LayerState& layer : layers_) {
        outputs.push_back(frans::infer(layer, *x));
        x = &outputs.back();
    }
    return outputs;
}

Tensor Network::backward(const Tensor& grad_output) {
    if (!forward_done_) throw std::logic_error("Network::backward called without a preceding forward pass");
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = frans::backward(*it, g);
    forward_done_ = false;
    return g;
}

std::vector<Param*> Network::parameters() {
    std::vector<Param*> params;
    for (LayerState& layer : layers_) {
        for (Param& p : layer.params) params.push_back(&p);
    }
    return params;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const LayerState& layer : layers_) {
        for (const Param& p : layer.params) n += p.value.size();
    }
    return n;
}

void Network::clear_caches() {
    for (LayerState& layer : layers_) layer.cache = LayerCache{};
    forward_done_ = false;
}

}  // namespace frans
