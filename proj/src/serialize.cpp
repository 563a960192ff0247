#include "frans/serialize.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace frans {

namespace {
constexpr const char* kNetworkMagic = "frans-network";
constexpr int kNetworkVersion = 1;
}  // namespace

std::string TokenReader::next() {
    std::string token;
    if (!(in_ >> token)) throw std::runtime_error("unexpected end of serialized data");
    return token;
}

void TokenReader::expect(const std::string& token) {
    const std::string got = next();
    if (got != token) throw std::runtime_error("expected '" + token + "' but found '" + got + "'");
}

double TokenReader::next_double() {
    const std::string token = next();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || errno == ERANGE) {
        throw std::runtime_error("malformed floating-point token '" + token + "'");
    }
    return v;
}

std::uint64_t TokenReader::next_uint() {
    const std::string token = next();
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(token, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != token.size() || token.empty() || token[0] == '-') {
        throw std::runtime_error("malformed integer token '" + token + "'");
    }
    return v;
}

std::int64_t TokenReader::next_int() {
    const std::string token = next();
    std::size_t pos = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(token, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != token.size() || token.empty()) throw std::runtime_error("malformed integer token '" + token + "'");
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    out << "tensor " << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << format_double(t[i]) << ((i + 1) % 8 == 0 || i + 1 == t.size() ? '\n' : ' ');
    }
}

Tensor read_tensor(TokenReader& in, const std::string& name) {
    in.expect("tensor");
    in.expect(name);
    const std::uint64_t rank = in.next_uint();
    if (rank > 8) throw std::runtime_error("tensor '" + name + "' has implausible rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = in.next_uint();
    std::vector<double> data(shape_product(shape));
    for (double& v : data) v = in.next_double();
    return Tensor(std::move(shape), std::move(data));
}

void write_network(std::ostream& out, const Network& network) {
    out << kNetworkMagic << ' ' << kNetworkVersion << '\n';
    out << "layers " << network.size() << '\n';
    for (const LayerState& layer : network.layers()) {
        out << "layer " << to_string(layer.kind) << '\n';
        switch (layer.kind) {
            case LayerKind::conv1d:
                out << "in " << layer.in_channels << " out " << layer.out_channels << " kernel " << layer.kernel << '\n';
                write_tensor(out, "weight", layer.params[0].value);
                write_tensor(out, "bias", layer.params[1].value);
                break;
            case LayerKind::dense:
                out << "in " << layer.in_channels << " out " << layer.out_channels << '\n';
                write_tensor(out, "weight", layer.params[0].value);
                write_tensor(out, "bias", layer.params[1].value);
                break;
            case LayerKind::batchnorm:
                out << "channels " << layer.in_channels << " momentum " << format_double(layer.momentum) << " epsilon "
                    << format_double(layer.epsilon) << " ready " << (layer.running_ready ? 1 : 0) << '\n';
                write_tensor(out, "gamma", layer.params[0].value);
                write_tensor(out, "beta", layer.params[1].value);
                write_tensor(out, "running_mean", layer.running_mean);
                write_tensor(out, "running_var", layer.running_var);
                break;
            case LayerKind::relu:
            case LayerKind::gap:
                break;
        }
    }
    out << "end\n";
}

namespace {

Param param_from(Tensor value) {
    Tensor grad(value.shape());
    return Param{std::move(value), std::move(grad)};
}

void check_shape(const Tensor& t, const std::vector<std::size_t>& expected, const std::string& what) {
    if (t.shape() != expected) throw std::runtime_error(what + " has shape " + t.shape_string() + " inconsistent with its layer header");
}

}  // namespace

Network read_network(std::istream& stream) {
    TokenReader in(stream);
    in.expect(kNetworkMagic);
    const std::uint64_t version = in.next_uint();
    if (version != kNetworkVersion) {
        throw std::runtime_error("unsupported network format version " + std::to_string(version));
    }
    in.expect("layers");
    const std::uint64_t count = in.next_uint();
    std::vector<LayerState> layers;
    for (std::uint64_t i = 0; i < count; ++i) {
        in.expect("layer");
        LayerState layer;
        layer.kind = layer_kind_from_string(in.next());
        switch (layer.kind) {
            case LayerKind::conv1d:
            case LayerKind::dense: {
                in.expect("in");
                layer.in_channels = in.next_uint();
                in.expect("out");
                layer.out_channels = in.next_uint();
                if (layer.kind == LayerKind::conv1d) {
                    in.expect("kernel");
                    layer.kernel = in.next_uint();
                }
                Tensor w = read_tensor(in, "weight");
                Tensor b = read_tensor(in, "bias");
                if (layer.kind == LayerKind::conv1d) {
                    check_shape(w, {layer.out_channels, layer.in_channels, layer.kernel}, "conv1d weight");
                } else {
                    check_shape(w, {layer.out_channels, layer.in_channels}, "dense weight");
                }
                check_shape(b, {layer.out_channels}, "bias");
                layer.params.push_back(param_from(std::move(w)));
                layer.params.push_back(param_from(std::move(b)));
                break;
            }
            case LayerKind::batchnorm: {
                in.expect("channels");
                layer.in_channels = layer.out_channels = in.next_uint();
                in.expect("momentum");
                layer.momentum = in.next_double();
                in.expect("epsilon");
                layer.epsilon = in.next_double();
                in.expect("ready");
                layer.running_ready = in.next_uint() != 0;
                for (const char* name : {"gamma", "beta"}) {
                    Tensor t = read_tensor(in, name);
                    check_shape(t, {layer.in_channels}, name);
                    layer.params.push_back(param_from(std::move(t)));
                }
                layer.running_mean = read_tensor(in, "running_mean");
                layer.running_var = read_tensor(in, "running_var");
                check_shape(layer.running_mean, {layer.in_channels}, "running_mean");
                check_shape(layer.running_var, {layer.in_channels}, "running_var");
                break;
            }
            case LayerKind::relu:
            case LayerKind::gap:
                break;
        }
        layers.push_back(std::move(layer));
    }
    in.expect("end");
    return Network(std::move(layers));
}

}  // namespace frans
