#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "frans/tensor.hpp"

namespace frans {

class Rng;

enum class LayerKind { conv1d, batchnorm, relu, gap, dense };
enum class Mode { train, infer };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct Param {
    Tensor value;
    Tensor grad;
};

/// Intermediates kept by a training-mode forward pass for the matching backward pass.
struct LayerCache {
    bool valid = false;
    std::vector<std::size_t> input_shape;
    AlignedBuffer columns;  // conv1d: per-sample im2col blocks
    Tensor input;                 // relu, dense
    Tensor normalized;            // batchnorm x-hat
    std::vector<double> inv_std;  // batchnorm
    Mode mode = Mode::train;
};

/// One layer of the fixed-topology network.
///
/// Parameter layout:
///   conv1d    params[0] = weight [out, in, kernel], params[1] = bias [out]
///   batchnorm params[0] = gamma [channels],        params[1] = beta [channels]
///   dense     params[0] = weight [out, in],        params[1] = bias [out]
/// conv1d output index t reads input t + k - kernel/2 for k in [0, kernel), zero outside the
/// signal, so even kernels pad one more sample on the left than on the right.
struct LayerState {
    LayerKind kind = LayerKind::relu;
    std::vector<Param> params;

    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;

    double momentum = 0.9;
    double epsilon = 1e-5;
    Tensor running_mean;
    Tensor running_var;
    bool running_ready = false;

    LayerCache cache;
};

LayerState make_conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng);
LayerState make_batchnorm(std::size_t channels, double momentum = 0.9, double epsilon = 1e-5);
LayerState make_relu();
LayerState make_gap();
LayerState make_dense(std::size_t in_features, std::size_t out_features, Rng& rng);

// Training-path forward passes. They cache what backward needs; batchnorm in train mode also
// updates its running statistics.
Tensor conv1d_forward(const Tensor& input, LayerState& layer);
Tensor batchnorm_forward(const Tensor& input, LayerState& layer, Mode mode);
Tensor relu_forward(const Tensor& input, LayerState& layer);
Tensor gap_forward(const Tensor& input, LayerState& layer);
Tensor dense_forward(const Tensor& input, LayerState& layer);

Tensor forward(LayerState& layer, const Tensor& input, Mode mode);

/// Read-only inference pass; safe to call concurrently on one layer.
Tensor infer(const LayerState& layer, const Tensor& input);

/// Writes parameter gradients into layer.params[*].grad and returns d(loss)/d(input).
Tensor backward(LayerState& layer, const Tensor& grad_output);

struct LossResult {
    double loss = 0.0;
    Tensor grad;
};

/// Mean sparse softmax cross-entropy over the batch and its gradient w.r.t. the logits.
LossResult sparse_xent_loss(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Row-wise softmax of a [batch, classes] tensor.
Tensor softmax_rows(const Tensor& logits);

}  // namespace frans
