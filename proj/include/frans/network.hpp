#pragma once

#include <cstddef>
#include <vector>

#include "frans/layers.hpp"

namespace frans {

/// Fixed-topology layer stack. The softmax cross-entropy head is applied outside the stack.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<LayerState> layers) : layers_(std::move(layers)) {}

    /// Training path: caches intermediates for backward().
    Tensor forward(const Tensor& input, Mode mode);

    /// Read-only pass through the first `layer_count` layers (all layers by default).
    Tensor infer(const Tensor& input, std::size_t layer_count = static_cast<std::size_t>(-1)) const;

    /// Output of every layer in inference mode; element i is the output of layer i.
    std::vector<Tensor> infer_all(const Tensor& input) const;

    /// Populates every parameter gradient; weights are not touched. Requires a prior forward().
    Tensor backward(const Tensor& grad_output);

    std::vector<Param*> parameters();
    std::size_t parameter_count() const;

    std::vector<LayerState>& layers() { return layers_; }
    const std::vector<LayerState>& layers() const { return layers_; }
    std::size_t size() const { return layers_.size(); }

    void clear_caches();

private:
    std::vector<LayerState> layers_;
    bool forward_done_ = false;
};

}  // namespace frans
