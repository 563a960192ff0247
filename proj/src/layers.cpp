#include "frans/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "frans/rng.hpp"

namespace frans {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

[[noreturn]] void shape_error(const std::string& layer, const std::string& what) {
    throw std::invalid_argument(layer + ": " + what);
}

void require_rank(const Tensor& t, std::size_t rank, const std::string& layer) {
    if (t.rank() != rank) {
        shape_error(layer, "expected rank-" + std::to_string(rank) + " input, got shape " + t.shape_string());
    }
}

Tensor glorot_uniform(std::vector<std::size_t> shape, double fan_in, double fan_out, Rng& rng) {
    Tensor w(std::move(shape));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    return w;
}

Param make_param(Tensor value) {
    Tensor grad(value.shape());
    return Param{std::move(value), std::move(grad)};
}

void check_conv_input(const Tensor& input, const LayerState& layer) {
    require_rank(input, 3, "conv1d");
    if (input.dim(1) != layer.in_channels) {
        shape_error("conv1d", "input channel dimension (axis 1) is " + std::to_string(input.dim(1)) +
                                  ", layer expects " + std::to_string(layer.in_channels));
    }
    if (input.dim(2) == 0) shape_error("conv1d", "input length dimension (axis 2) is zero");
}

// columns(i*K + k, t) = input[i, t + k - K/2], zero outside [0, L)
void im2col(const double* sample, std::size_t channels, std::size_t length, std::size_t kernel, double* columns) {
    const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
    const auto len = static_cast<std::ptrdiff_t>(length);
    for (std::size_t i = 0; i < channels; ++i) {
        const double* row_in = sample + i * length;
        for (std::size_t k = 0; k < kernel; ++k) {
            double* row = columns + (i * kernel + k) * length;
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
            for (std::ptrdiff_t t = 0; t < len; ++t) {
                const std::ptrdiff_t src = t + shift;
                row[t] = (src >= 0 && src < len) ? row_in[src] : 0.0;
            }
        }
    }
}

void col2im_add(const double* columns, std::size_t channels, std::size_t length, std::size_t kernel, double* sample) {
    const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
    const auto len = static_cast<std::ptrdiff_t>(length);
    for (std::size_t i = 0; i < channels; ++i) {
        double* row_out = sample + i * length;
        for (std::size_t k = 0; k < kernel; ++k) {
            const double* row = columns + (i * kernel + k) * length;
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
            for (std::ptrdiff_t t = 0; t < len; ++t) {
                const std::ptrdiff_t src = t + shift;
                if (src >= 0 && src < len) row_out[src] += row[t];
            }
        }
    }
}

// Each sample goes through its own GEMM so a window's result never depends on its batch mates.
Tensor conv1d_compute(const Tensor& input, const LayerState& layer, AlignedBuffer* keep_columns) {
    check_conv_input(input, layer);
    const std::size_t batch = input.dim(0);
    const std::size_t length = input.dim(2);
    const std::size_t ci = layer.in_channels;
    const std::size_t co = layer.out_channels;
    const std::size_t rows = ci * layer.kernel;
    const std::size_t block = rows * length;

    AlignedBuffer scratch;
    double* columns_base = nullptr;
    if (keep_columns) {
        keep_columns->assign(batch * block, 0.0);
        columns_base = keep_columns->data();
    } else {
        scratch.assign(block, 0.0);
    }

    Tensor out({batch, co, length});
    ConstMatrixMap weight(layer.params[0].value.data(), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(rows));
    const Tensor& bias = layer.params[1].value;
    for (std::size_t b = 0; b < batch; ++b) {
        double* columns = keep_columns ? columns_base + b * block : scratch.data();
        im2col(input.data() + b * ci * length, ci, length, layer.kernel, columns);
        MatrixMap y(out.data() + b * co * length, static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(length));
        y.noalias() = weight * ConstMatrixMap(columns, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(length));
        for (std::size_t c = 0; c < co; ++c) y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
    }
    return out;
}

struct ChannelView {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t inner = 1;
};

ChannelView channel_view(const Tensor& input, const std::string& layer) {
    if (input.rank() == 3) return {input.dim(0), input.dim(1), input.dim(2)};
    if (input.rank() == 2) return {input.dim(0), input.dim(1), 1};
    shape_error(layer, "expected [batch, channels] or [batch, channels, length], got " + input.shape_string());
}

Tensor dense_compute(const Tensor& input, const LayerState& layer) {
    require_rank(input, 2, "dense");
    if (input.dim(1) != layer.in_channels) {
        shape_error("dense", "input feature dimension (axis 1) is " + std::to_string(input.dim(1)) +
                                 ", layer expects " + std::to_string(layer.in_channels));
    }
    const std::size_t batch = input.dim(0);
    const auto in = static_cast<Eigen::Index>(layer.in_channels);
    const auto out_dim = static_cast<Eigen::Index>(layer.out_channels);
    Tensor out({batch, layer.out_channels});
    ConstMatrixMap weight(layer.params[0].value.data(), out_dim, in);
    Eigen::Map<const Eigen::VectorXd> bias(layer.params[1].value.data(), out_dim);
    for (std::size_t b = 0; b < batch; ++b) {
        Eigen::Map<const Eigen::VectorXd> x(input.data() + b * layer.in_channels, in);
        Eigen::Map<Eigen::VectorXd> y(out.data() + b * layer.out_channels, out_dim);
        y.noalias() = weight * x;
        y += bias;
    }
    return out;
}

Tensor batchnorm_infer(const Tensor& input, const LayerState& layer) {
    if (!layer.running_ready) {
        throw std::logic_error("batchnorm: uninitialized running statistics");
    }
    const ChannelView v = channel_view(input, "batchnorm");
    if (v.channels != layer.in_channels) {
        shape_error("batchnorm", "channel dimension (axis 1) is " + std::to_string(v.channels) +
                                     ", layer expects " + std::to_string(layer.in_channels));
    }
    const Tensor& gamma = layer.params[0].value;
    const Tensor& beta = layer.params[1].value;
    Tensor out(input.shape());
    for (std::size_t c = 0; c < v.channels; ++c) {
        const double inv = 1.0 / std::sqrt(layer.running_var[c] + layer.epsilon);
        const double mean = layer.running_mean[c];
        for (std::size_t b = 0; b < v.batch; ++b) {
            const std::size_t base = (b * v.channels + c) * v.inner;
            for (std::size_t t = 0; t < v.inner; ++t) {
                out[base + t] = gamma[c] * (input[base + t] - mean) * inv + beta[c];
            }
        }
    }
    return out;
}

}  // namespace

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::relu: return "relu";
        case LayerKind::gap: return "gap";
        case LayerKind::dense: return "dense";
    }
    return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
    for (LayerKind k : {LayerKind::conv1d, LayerKind::batchnorm, LayerKind::relu, LayerKind::gap, LayerKind::dense}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

LayerState make_conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng) {
    if (in_channels == 0 || out_channels == 0 || kernel == 0) {
        throw std::invalid_argument("conv1d: channels and kernel size must be positive");
    }
    LayerState layer;
    layer.kind = LayerKind::conv1d;
    layer.in_channels = in_channels;
    layer.out_channels = out_channels;
    layer.kernel = kernel;
    const double fan_in = static_cast<double>(in_channels * kernel);
    const double fan_out = static_cast<double>(out_channels * kernel);
    layer.params.push_back(make_param(glorot_uniform({out_channels, in_channels, kernel}, fan_in, fan_out, rng)));
    layer.params.push_back(make_param(Tensor({out_channels})));
    return layer;
}

LayerState make_batchnorm(std::size_t channels, double momentum, double epsilon) {
    LayerState layer;
    layer.kind = LayerKind::batchnorm;
    layer.in_channels = channels;
    layer.out_channels = channels;
    layer.momentum = momentum;
    layer.epsilon = epsilon;
    layer.params.push_back(make_param(Tensor({channels}, 1.0)));
    layer.params.push_back(make_param(Tensor({channels}, 0.0)));
    layer.running_mean = Tensor({channels}, 0.0);
    layer.running_var = Tensor({channels}, 1.0);
    return layer;
}

LayerState make_relu() {
    LayerState layer;
    layer.kind = LayerKind::relu;
    return layer;
}

LayerState make_gap() {
    LayerState layer;
    layer.kind = LayerKind::gap;
    return layer;
}

LayerState make_dense(std::size_t in_features, std::size_t out_features, Rng& rng) {
    if (in_features == 0 || out_features == 0) {
        throw std::invalid_argument("dense: feature counts must be positive");
    }
    LayerState layer;
    layer.kind = LayerKind::dense;
    layer.in_channels = in_features;
    layer.out_channels = out_features;
    layer.params.push_back(make_param(glorot_uniform({out_features, in_features},
                                                     static_cast<double>(in_features),
                                                     static_cast<double>(out_features), rng)));
    layer.params.push_back(make_param(Tensor({out_features})));
    return layer;
}

Tensor conv1d_forward(const Tensor& input, LayerState& layer) {
    Tensor out = conv1d_compute(input, layer, &layer.cache.columns);
    layer.cache.input_shape = input.shape();
    layer.cache.valid = true;
    return out;
}

Tensor batchnorm_forward(const Tensor& input, LayerState& layer, Mode mode) {
    if (mode == Mode::infer) {
        Tensor out = batchnorm_infer(input, layer);
        const ChannelView v = channel_view(input, "batchnorm");
        Tensor normalized(input.shape());
        for (std::size_t c = 0; c < v.channels; ++c) {
            const double inv = 1.0 / std::sqrt(layer.running_var[c] + layer.epsilon);
            for (std::size_t b = 0; b < v.batch; ++b) {
                const std::size_t base = (b * v.channels + c) * v.inner;
                for (std::size_t t = 0; t < v.inner; ++t) {
                    normalized[base + t] = (input[base + t] - layer.running_mean[c]) * inv;
                }
            }
        }
        layer.cache.normalized = std::move(normalized);
        layer.cache.input_shape = input.shape();
        layer.cache.mode = Mode::infer;
        layer.cache.valid = true;
        return out;
    }
    const ChannelView v = channel_view(input, "batchnorm");
    if (v.channels != layer.in_channels) {
        shape_error("batchnorm", "channel dimension (axis 1) is " + std::to_string(v.channels) +
                                     ", layer expects " + std::to_string(layer.in_channels));
    }
    if (v.batch < 2) {
        throw std::invalid_argument("batchnorm: training mode needs a batch of at least 2, got " +
                                    std::to_string(v.batch));
    }
    const Tensor& gamma = layer.params[0].value;
    const Tensor& beta = layer.params[1].value;
    const double count = static_cast<double>(v.batch * v.inner);

    Tensor out(input.shape());
    Tensor normalized(input.shape());
    std::vector<double> inv_std(v.channels);
    for (std::size_t c = 0; c < v.channels; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < v.batch; ++b) {
            const std::size_t base = (b * v.channels + c) * v.inner;
            for (std::size_t t = 0; t < v.inner; ++t) sum += input[base + t];
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t b = 0; b < v.batch; ++b) {
            const std::size_t base = (b * v.channels + c) * v.inner;
            for (std::size_t t = 0; t < v.inner; ++t) {
                const double d = input[base + t] - mean;
                sq += d * d;
            }
        }
        const double var = sq / count;
        const double inv = 1.0 / std::sqrt(var + layer.epsilon);
        inv_std[c] = inv;
        for (std::size_t b = 0; b < v.batch; ++b) {
            const std::size_t base = (b * v.channels + c) * v.inner;
            for (std::size_t t = 0; t < v.inner; ++t) {
                const double xhat = (input[base + t] - mean) * inv;
                normalized[base + t] = xhat;
                out[base + t] = gamma[c] * xhat + beta[c];
            }
        }
        layer.running_mean[c] = layer.momentum * layer.running_mean[c] + (1.0 - layer.momentum) * mean;
        layer.running_var[c] = layer.momentum * layer.running_var[c] + (1.0 - layer.momentum) * var;
    }
    layer.running_ready = true;
    layer.cache.input_shape = input.shape();
    layer.cache.normalized = std::move(normalized);
    layer.cache.inv_std = std::move(inv_std);
    layer.cache.mode = Mode::train;
    layer.cache.valid = true;
    return out;
}

Tensor relu_forward(const Tensor& input, LayerState& layer) {
    Tensor out = infer(layer, input);
    layer.cache.input = input;
    layer.cache.input_shape = input.shape();
    layer.cache.valid = true;
    return out;
}

Tensor gap_forward(const Tensor& input, LayerState& layer) {
    Tensor out = infer(layer, input);
    layer.cache.input_shape = input.shape();
    layer.cache.valid = true;
    return out;
}

Tensor dense_forward(const Tensor& input, LayerState& layer) {
    Tensor out = dense_compute(input, layer);
    layer.cache.input = input;
    layer.cache.input_shape = input.shape();
    layer.cache.valid = true;
    return out;
}

Tensor forward(LayerState& layer, const Tensor& input, Mode mode) {
    switch (layer.kind) {
        case LayerKind::conv1d: return conv1d_forward(input, layer);
        case LayerKind::batchnorm: return batchnorm_forward(input, layer, mode);
        case LayerKind::relu: return relu_forward(input, layer);
        case LayerKind::gap: return gap_forward(input, layer);
        case LayerKind::dense: return dense_forward(input, layer);
    }
    throw std::logic_error("forward: unknown layer kind");
}

Tensor infer(const LayerState& layer, const Tensor& input) {
    switch (layer.kind) {
        case LayerKind::conv1d: return conv1d_compute(input, layer, nullptr);
        case LayerKind::batchnorm: return batchnorm_infer(input, layer);
        case LayerKind::relu: {
            Tensor out(input.shape());
            for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
            return out;
        }
        case LayerKind::gap: {
            require_rank(input, 3, "gap");
            const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
            if (length == 0) shape_error("gap", "input length dimension (axis 2) is zero");
            Tensor out({batch, channels});
            for (std::size_t i = 0; i < batch * channels; ++i) {
                double sum = 0.0;
                for (std::size_t t = 0; t < length; ++t) sum += input[i * length + t];
                out[i] = sum / static_cast<double>(length);
            }
            return out;
        }
        case LayerKind::dense: return dense_compute(input, layer);
    }
    throw std::logic_error("infer: unknown layer kind");
}

Tensor backward(LayerState& layer, const Tensor& grad_output) {
    if (!layer.cache.valid) {
        throw std::logic_error(to_string(layer.kind) + ": backward called without a preceding forward pass");
    }
    const auto& in_shape = layer.cache.input_shape;
    switch (layer.kind) {
        case LayerKind::conv1d: {
            const std::size_t batch = in_shape[0], length = in_shape[2];
            const std::size_t ci = layer.in_channels, co = layer.out_channels;
            const std::size_t rows = ci * layer.kernel;
            if (grad_output.shape() != std::vector<std::size_t>{batch, co, length}) {
                shape_error("conv1d", "gradient shape " + grad_output.shape_string() + " does not match output");
            }
            Tensor grad_in(in_shape);
            Tensor& dw = layer.params[0].grad;
            Tensor& db = layer.params[1].grad;
            dw.fill(0.0);
            db.fill(0.0);
            MatrixMap dweight(dw.data(), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(rows));
            ConstMatrixMap weight(layer.params[0].value.data(), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(rows));
            RowMatrix dcols(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(length));
            for (std::size_t b = 0; b < batch; ++b) {
                ConstMatrixMap dy(grad_output.data() + b * co * length, static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(length));
                ConstMatrixMap cols(layer.cache.columns.data() + b * rows * length, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(length));
                dweight.noalias() += dy * cols.transpose();
                const double* dy_row = grad_output.data() + b * co * length;
                for (std::size_t c = 0; c < co; ++c) {
                    for (std::size_t t = 0; t < length; ++t) db[c] += dy_row[c * length + t];
                }
                dcols.noalias() = weight.transpose() * dy;
                col2im_add(dcols.data(), ci, length, layer.kernel, grad_in.data() + b * ci * length);
            }
            return grad_in;
        }
        case LayerKind::batchnorm: {
            if (grad_output.shape() != in_shape) {
                shape_error("batchnorm", "gradient shape " + grad_output.shape_string() + " does not match output");
            }
            Tensor grad_in(in_shape);
            const ChannelView v = channel_view(grad_output, "batchnorm");
            const Tensor& gamma = layer.params[0].value;
            Tensor& dgamma = layer.params[0].grad;
            Tensor& dbeta = layer.params[1].grad;
            if (layer.cache.mode == Mode::infer) {
                // running statistics are constants here
                const Tensor& xhat = layer.cache.normalized;
                for (std::size_t c = 0; c < v.channels; ++c) {
                    const double inv = 1.0 / std::sqrt(layer.running_var[c] + layer.epsilon);
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (std::size_t b = 0; b < v.batch; ++b) {
                        const std::size_t base = (b * v.channels + c) * v.inner;
                        for (std::size_t t = 0; t < v.inner; ++t) {
                            sum_dy += grad_output[base + t];
                            sum_dy_xhat += grad_output[base + t] * xhat[base + t];
                            grad_in[base + t] = grad_output[base + t] * gamma[c] * inv;
                        }
                    }
                    dgamma[c] = sum_dy_xhat;
                    dbeta[c] = sum_dy;
                }
                return grad_in;
            }
            const double count = static_cast<double>(v.batch * v.inner);
            const Tensor& xhat = layer.cache.normalized;
            for (std::size_t c = 0; c < v.channels; ++c) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t b = 0; b < v.batch; ++b) {
                    const std::size_t base = (b * v.channels + c) * v.inner;
                    for (std::size_t t = 0; t < v.inner; ++t) {
                        sum_dy += grad_output[base + t];
                        sum_dy_xhat += grad_output[base + t] * xhat[base + t];
                    }
                }
                dgamma[c] = sum_dy_xhat;
                dbeta[c] = sum_dy;
                const double scale = gamma[c] * layer.cache.inv_std[c] / count;
                for (std::size_t b = 0; b < v.batch; ++b) {
                    const std::size_t base = (b * v.channels + c) * v.inner;
                    for (std::size_t t = 0; t < v.inner; ++t) {
                        grad_in[base + t] =
                            scale * (count * grad_output[base + t] - sum_dy - xhat[base + t] * sum_dy_xhat);
                    }
                }
            }
            return grad_in;
        }
        case LayerKind::relu: {
            if (grad_output.shape() != in_shape) {
                shape_error("relu", "gradient shape " + grad_output.shape_string() + " does not match output");
            }
            Tensor grad_in(in_shape);
            const Tensor& x = layer.cache.input;
            for (std::size_t i = 0; i < x.size(); ++i) grad_in[i] = x[i] > 0.0 ? grad_output[i] : 0.0;
            return grad_in;
        }
        case LayerKind::gap: {
            const std::size_t batch = in_shape[0], channels = in_shape[1], length = in_shape[2];
            if (grad_output.shape() != std::vector<std::size_t>{batch, channels}) {
                shape_error("gap", "gradient shape " + grad_output.shape_string() + " does not match output");
            }
            Tensor grad_in(in_shape);
            const double scale = 1.0 / static_cast<double>(length);
            for (std::size_t i = 0; i < batch * channels; ++i) {
                for (std::size_t t = 0; t < length; ++t) grad_in[i * length + t] = grad_output[i] * scale;
            }
            return grad_in;
        }
        case LayerKind::dense: {
            const std::size_t batch = in_shape[0];
            const auto in = static_cast<Eigen::Index>(layer.in_channels);
            const auto out_dim = static_cast<Eigen::Index>(layer.out_channels);
            if (grad_output.shape() != std::vector<std::size_t>{batch, layer.out_channels}) {
                shape_error("dense", "gradient shape " + grad_output.shape_string() + " does not match output");
            }
            ConstMatrixMap dy(grad_output.data(), static_cast<Eigen::Index>(batch), out_dim);
            ConstMatrixMap x(layer.cache.input.data(), static_cast<Eigen::Index>(batch), in);
            ConstMatrixMap weight(layer.params[0].value.data(), out_dim, in);
            MatrixMap dweight(layer.params[0].grad.data(), out_dim, in);
            dweight.noalias() = dy.transpose() * x;
            Tensor& dbias = layer.params[1].grad;
            dbias.fill(0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t o = 0; o < layer.out_channels; ++o) dbias[o] += grad_output.at(b, o);
            }
            Tensor grad_in(in_shape);
            MatrixMap dx(grad_in.data(), static_cast<Eigen::Index>(batch), in);
            dx.noalias() = dy * weight;
            return grad_in;
        }
    }
    throw std::logic_error("backward: unknown layer kind");
}

Tensor softmax_rows(const Tensor& logits) {
    require_rank(logits, 2, "softmax");
    const std::size_t batch = logits.dim(0), classes = logits.dim(1);
    Tensor probs(logits.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        const double peak = *std::max_element(row, row + classes);
        double total = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            probs[b * classes + c] = std::exp(row[c] - peak);
            total += probs[b * classes + c];
        }
        for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] /= total;
    }
    return probs;
}

LossResult sparse_xent_loss(const Tensor& logits, const std::vector<std::size_t>& labels) {
    require_rank(logits, 2, "sparse_xent_loss");
    const std::size_t batch = logits.dim(0), classes = logits.dim(1);
    if (labels.size() != batch) {
        throw std::invalid_argument("sparse_xent_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                                    std::to_string(batch));
    }
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] >= classes) {
            throw std::invalid_argument("sparse_xent_loss: label " + std::to_string(labels[b]) + " at batch index " +
                                        std::to_string(b) + " is outside [0, " + std::to_string(classes) + ")");
        }
    }
    LossResult result;
    result.grad = Tensor(logits.shape());
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        const double peak = *std::max_element(row, row + classes);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - peak);
        const double log_sum = std::log(sum);
        total += -(row[labels[b]] - peak - log_sum);
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(row[c] - peak - log_sum);
            result.grad[b * classes + c] = (p - (c == labels[b] ? 1.0 : 0.0)) * inv_batch;
        }
    }
    result.loss = total * inv_batch;
    return result;
}

}  // namespace frans
