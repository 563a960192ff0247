#include "frans/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "frans/csv_io.hpp"
#include "frans/rng.hpp"
#include "frans/serialize.hpp"

namespace frans {

namespace {

constexpr const char* kExtractorMagic = "frans-extractor";
constexpr int kExtractorVersion = 1;

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::size_t argmax_row(const Tensor& t, std::size_t row) {
    const std::size_t cols = t.dim(1);
    const double* r = t.data() + row * cols;
    return static_cast<std::size_t>(std::max_element(r, r + cols) - r);
}

}  // namespace

TrainedExtractor::TrainedExtractor(NetworkConfig config, Network network, TrainingReport report)
    : config_(std::move(config)), network_(std::move(network)), report_(std::move(report)) {}

Tensor TrainedExtractor::features(std::span<const Window> windows) const {
    return network_.infer(window_batch(windows, config_.window_length), feature_depth());
}

Tensor TrainedExtractor::logits(std::span<const Window> windows) const {
    return network_.infer(window_batch(windows, config_.window_length));
}

double TrainedExtractor::accuracy(std::span<const Window> windows) const {
    if (windows.empty()) return 0.0;
    std::size_t correct = 0;
    constexpr std::size_t chunk = 256;
    for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
        const auto part = windows.subspan(begin, std::min(chunk, windows.size() - begin));
        const Tensor out = logits(part);
        for (std::size_t i = 0; i < part.size(); ++i) correct += argmax_row(out, i) == part[i].class_index;
    }
    return static_cast<double>(correct) / static_cast<double>(windows.size());
}

Network build_network(const NetworkConfig& config, std::uint64_t seed) {
    if (config.n_classes < 2) throw std::invalid_argument("NetworkConfig: need at least 2 classes");
    if (config.n_features < 2) throw std::invalid_argument("NetworkConfig: need at least 2 features");
    if (config.blocks.empty()) throw std::invalid_argument("NetworkConfig: need at least one conv block");
    Rng rng = Rng::stream(seed, "init");
    std::vector<LayerState> layers;
    std::size_t channels = 1;
    for (const ConvBlock& block : config.blocks) {
        layers.push_back(make_conv1d(channels, block.filters, block.kernel, rng));
        layers.push_back(make_batchnorm(block.filters, config.bn_momentum, config.bn_epsilon));
        layers.push_back(make_relu());
        channels = block.filters;
    }
    layers.push_back(make_gap());
    layers.push_back(make_dense(channels, config.n_features, rng));
    layers.push_back(make_dense(config.n_features, config.n_classes, rng));
    return Network(std::move(layers));
}

Tensor window_batch(std::span<const Window> windows, std::size_t length) {
    Tensor batch({windows.size(), 1, length});
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].values.size() != length) {
            throw std::invalid_argument("window " + std::to_string(i) + " has length " +
                                        std::to_string(windows[i].values.size()) + ", extractor expects " +
                                        std::to_string(length));
        }
        std::copy(windows[i].values.begin(), windows[i].values.end(), batch.data() + i * length);
    }
    return batch;
}

TrainedExtractor train_extractor(const std::vector<Window>& windows, const NetworkConfig& config,
                                 const TrainOptions& options) {
    if (config.n_classes < 2) throw std::invalid_argument("train_extractor: need at least 2 classes");
    if (options.batch_size < 2) throw std::invalid_argument("train_extractor: batch size must be at least 2");
    std::vector<std::size_t> class_counts(config.n_classes, 0);
    for (const Window& w : windows) {
        if (w.class_index >= config.n_classes) {
            throw std::invalid_argument("train_extractor: window class " + std::to_string(w.class_index) +
                                        " outside [0, " + std::to_string(config.n_classes) + ")");
        }
        if (w.values.size() != config.window_length) {
            throw std::invalid_argument("train_extractor: window length " + std::to_string(w.values.size()) +
                                        " differs from configured " + std::to_string(config.window_length));
        }
        ++class_counts[w.class_index];
    }
    for (std::size_t c = 0; c < config.n_classes; ++c) {
        if (class_counts[c] == 0) throw std::invalid_argument("train_extractor: class " + std::to_string(c) + " has no windows");
    }

    // per-epoch cap on any class's contribution: the median class count
    std::vector<std::size_t> sorted_counts = class_counts;
    std::sort(sorted_counts.begin(), sorted_counts.end());
    const std::size_t mid = sorted_counts.size() / 2;
    const std::size_t cap = sorted_counts.size() % 2 ? sorted_counts[mid] : (sorted_counts[mid - 1] + sorted_counts[mid]) / 2;

    Network network = build_network(config, options.seed);
    std::vector<Param*> params = network.parameters();
    AdamState adam{options.adam, 0, {}, {}};

    TrainingReport report;
    report.seed = options.seed;
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    std::vector<std::size_t> order(windows.size());
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng = Rng::stream(options.seed, "batching", epoch);
        rng.shuffle(order);
        std::vector<std::size_t> taken(config.n_classes, 0);
        std::vector<std::size_t> epoch_windows;
        for (std::size_t idx : order) {
            const std::size_t c = windows[idx].class_index;
            if (taken[c] < cap) {
                ++taken[c];
                epoch_windows.push_back(idx);
            }
        }

        std::vector<std::pair<std::size_t, std::size_t>> batches;  // [begin, end)
        for (std::size_t begin = 0; begin < epoch_windows.size(); begin += options.batch_size) {
            batches.emplace_back(begin, std::min(begin + options.batch_size, epoch_windows.size()));
        }
        // batchnorm needs two samples; fold a lone trailing sample into the previous batch
        if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
            batches[batches.size() - 2].second = batches.back().second;
            batches.pop_back();
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto [begin, end] = batches[bi];
            std::vector<Window> batch_windows;
            std::vector<std::size_t> labels;
            for (std::size_t i = begin; i < end; ++i) {
                batch_windows.push_back(windows[epoch_windows[i]]);
                labels.push_back(windows[epoch_windows[i]].class_index);
            }
            const Tensor input = window_batch(batch_windows, config.window_length);
            const Tensor logits = network.forward(input, Mode::train);
            LossResult loss = sparse_xent_loss(logits, labels);
            if (!std::isfinite(loss.loss)) {
                throw std::runtime_error("train_extractor: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(bi));
            }
            network.backward(loss.grad);
            adam_step(params, adam);
            loss_sum += loss.loss * static_cast<double>(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) correct += argmax_row(logits, i) == labels[i];
        }
        const double n = static_cast<double>(epoch_windows.size());
        EpochLog log{epoch, loss_sum / n, static_cast<double>(correct) / n};
        report.history.push_back(log);
        report.final_loss = log.loss;
        report.epochs_run = epoch;
        if (options.on_epoch) options.on_epoch(log);

        if (log.loss < best - options.min_improvement) {
            best = log.loss;
            stale = 0;
        } else if (++stale >= options.patience) {
            report.early_stopped = true;
            break;
        }
    }
    network.clear_caches();

    TrainedExtractor trained(config, std::move(network), std::move(report));
    TrainingReport final_report = trained.report();
    final_report.accuracy = trained.accuracy(windows);
    return TrainedExtractor(config, trained.network(), std::move(final_report));
}

void save_extractor(std::ostream& out, const TrainedExtractor& extractor) {
    const NetworkConfig& c = extractor.config();
    const TrainingReport& r = extractor.report();
    out << kExtractorMagic << ' ' << kExtractorVersion << '\n';
    out << "classes " << c.n_classes << " window_length " << c.window_length << " features " << c.n_features << '\n';
    out << "blocks " << c.blocks.size();
    for (const ConvBlock& b : c.blocks) out << ' ' << b.filters << ' ' << b.kernel;
    out << '\n';
    out << "bn " << format_double(c.bn_momentum) << ' ' << format_double(c.bn_epsilon) << '\n';
    out << "report " << format_double(r.final_loss) << ' ' << format_double(r.accuracy) << ' ' << r.epochs_run << ' '
        << r.seed << ' ' << (r.early_stopped ? 1 : 0) << '\n';
    out << "history " << r.history.size() << '\n';
    for (const EpochLog& e : r.history) {
        out << e.epoch << ' ' << format_double(e.loss) << ' ' << format_double(e.accuracy) << '\n';
    }
    write_network(out, extractor.network());
}

TrainedExtractor load_extractor(std::istream& stream) {
    TokenReader in(stream);
    in.expect(kExtractorMagic);
    const std::uint64_t version = in.next_uint();
    if (version != kExtractorVersion) throw std::runtime_error("unsupported extractor format version " + std::to_string(version));
    NetworkConfig c;
    in.expect("classes");
    c.n_classes = in.next_uint();
    in.expect("window_length");
    c.window_length = in.next_uint();
    in.expect("features");
    c.n_features = in.next_uint();
    in.expect("blocks");
    c.blocks.resize(in.next_uint());
    for (ConvBlock& b : c.blocks) {
        b.filters = in.next_uint();
        b.kernel = in.next_uint();
    }
    in.expect("bn");
    c.bn_momentum = in.next_double();
    c.bn_epsilon = in.next_double();
    TrainingReport r;
    in.expect("report");
    r.final_loss = in.next_double();
    r.accuracy = in.next_double();
    r.epochs_run = in.next_uint();
    r.seed = in.next_uint();
    r.early_stopped = in.next_uint() != 0;
    in.expect("history");
    r.history.resize(in.next_uint());
    for (EpochLog& e : r.history) {
        e.epoch = in.next_uint();
        e.loss = in.next_double();
        e.accuracy = in.next_double();
    }
    Network network = read_network(stream);
    if (network.size() != 3 * c.blocks.size() + 3) {
        throw std::runtime_error("extractor network has " + std::to_string(network.size()) +
                                 " layers, config implies " + std::to_string(3 * c.blocks.size() + 3));
    }
    return TrainedExtractor(std::move(c), std::move(network), std::move(r));
}

std::string to_string(Aggregation method) { return method == Aggregation::mean ? "mean" : "medoid"; }

Aggregation aggregation_from_string(const std::string& name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "medoid") return Aggregation::medoid;
    throw std::invalid_argument("unknown aggregation '" + name + "' (expected mean or medoid)");
}

std::vector<FeatureVector> extract_window_features(const TrainedExtractor& extractor,
                                                   const std::vector<Window>& windows,
                                                   const std::vector<std::string>& series_ids) {
    std::vector<FeatureVector> out;
    out.reserve(windows.size());
    constexpr std::size_t chunk = 256;
    const std::size_t nf = extractor.config().n_features;
    const std::span<const Window> all(windows);
    for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
        const auto part = all.subspan(begin, std::min(chunk, windows.size() - begin));
        const Tensor f = extractor.features(part);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const Window& w = part[i];
            if (w.series_index >= series_ids.size()) {
                throw std::invalid_argument("extract_window_features: window refers to unknown series " +
                                            std::to_string(w.series_index));
            }
            FeatureVector fv;
            fv.series_id = series_ids[w.series_index];
            fv.kind = FeatureKind::window;
            fv.values.assign(f.data() + i * nf, f.data() + (i + 1) * nf);
            fv.window_offset = w.start;
            out.push_back(std::move(fv));
        }
    }
    return out;
}

FeatureVector aggregate(std::span<const FeatureVector> features, Aggregation method) {
    if (features.empty()) throw std::invalid_argument("aggregate: no window features");
    const std::size_t dim = features.front().values.size();
    for (const FeatureVector& f : features) {
        if (f.values.size() != dim) throw std::invalid_argument("aggregate: inconsistent feature dimensions");
    }
    FeatureVector out;
    out.series_id = features.front().series_id;
    if (method == Aggregation::mean) {
        out.kind = FeatureKind::mean;
        out.values.assign(dim, 0.0);
        for (const FeatureVector& f : features) {
            for (std::size_t j = 0; j < dim; ++j) out.values[j] += f.values[j];
        }
        for (double& v : out.values) v /= static_cast<double>(features.size());
        return out;
    }
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < features.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < features.size(); ++j) sum += euclidean(features[i].values, features[j].values);
        if (sum < best_sum || (sum == best_sum && features[i].window_offset < features[best].window_offset)) {
            best = i;
            best_sum = sum;
        }
    }
    out = features[best];
    out.kind = FeatureKind::medoid;
    return out;
}

FeatureMatrix extract_static_features(const TrainedExtractor& extractor, const std::vector<TrainSeries>& series,
                                      const StaticFeatureOptions& options) {
    if (options.windows.length != extractor.config().window_length) {
        throw std::invalid_argument("extract_static_features: window length " + std::to_string(options.windows.length) +
                                    " differs from the extractor's " + std::to_string(extractor.config().window_length));
    }
    if (!options.transfer && series.size() != extractor.config().n_classes) {
        throw std::invalid_argument("extract_static_features: extractor was trained on " +
                                    std::to_string(extractor.config().n_classes) + " classes but " +
                                    std::to_string(series.size()) + " series were given; enable transfer mode");
    }
    const std::vector<Window> windows = make_windows(series, options.windows, options.seed);
    std::vector<std::string> ids;
    for (const TrainSeries& s : series) ids.push_back(s.id);
    const std::vector<FeatureVector> per_window = extract_window_features(extractor, windows, ids);

    FeatureMatrix matrix;
    std::size_t begin = 0;
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::size_t end = begin;
        while (end < windows.size() && windows[end].series_index == s) ++end;
        const FeatureVector agg = aggregate(std::span(per_window).subspan(begin, end - begin), options.method);
        matrix.ids.push_back(series[s].id);
        matrix.rows.push_back(agg.values);
        begin = end;
    }
    return matrix;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& features) {
    out << "series_id";
    for (std::size_t j = 0; j < features.n_features(); ++j) out << ",f" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < features.ids.size(); ++i) {
        out << features.ids[i];
        for (double v : features.rows[i]) out << ',' << format_number(v);
        out << '\n';
    }
}

FeatureMatrix read_feature_csv(std::istream& in) {
    FeatureMatrix m;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.empty() || trim(fields[0]) != "series_id") throw std::runtime_error("feature CSV: missing header");
            width = fields.size() - 1;
            continue;
        }
        if (fields.size() != width + 1) throw std::runtime_error("feature CSV: line " + std::to_string(line_no) + " has wrong field count");
        m.ids.emplace_back(trim(fields[0]));
        std::vector<double> row;
        for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(std::stod(std::string(trim(fields[j]))));
        m.rows.push_back(std::move(row));
    }
    return m;
}

void write_window_feature_csv(std::ostream& out, const std::vector<FeatureVector>& features) {
    out << "series_id,offset";
    const std::size_t width = features.empty() ? 0 : features.front().values.size();
    for (std::size_t j = 0; j < width; ++j) out << ",f" << (j + 1);
    out << '\n';
    for (const FeatureVector& f : features) {
        out << f.series_id << ',' << f.window_offset;
        for (double v : f.values) out << ',' << format_number(v);
        out << '\n';
    }
}

std::vector<FeatureVector> read_window_feature_csv(std::istream& in) {
    std::vector<FeatureVector> out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() < 2 || trim(fields[0]) != "series_id" || trim(fields[1]) != "offset") {
                throw std::runtime_error("window feature CSV: missing header");
            }
            width = fields.size() - 2;
            continue;
        }
        if (fields.size() != width + 2) {
            throw std::runtime_error("window feature CSV: line " + std::to_string(line_no) + " has wrong field count");
        }
        FeatureVector f;
        f.series_id = std::string(trim(fields[0]));
        f.window_offset = std::stoll(std::string(trim(fields[1])));
        for (std::size_t j = 2; j < fields.size(); ++j) f.values.push_back(std::stod(std::string(trim(fields[j]))));
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace frans
