#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "frans/adam.hpp"
#include "frans/data.hpp"
#include "frans/network.hpp"

namespace frans {

struct ConvBlock {
    std::size_t filters = 0;
    std::size_t kernel = 0;
};

/// Classifier layout: conv blocks (conv1d + batchnorm + relu), global average pooling, a linear
/// feature layer of n_features units and the softmax output layer over n_classes.
struct NetworkConfig {
    std::size_t n_classes = 0;
    std::size_t window_length = 0;
    std::size_t n_features = 16;
    std::vector<ConvBlock> blocks{{128, 8}, {256, 5}, {128, 3}};
    double bn_momentum = 0.9;
    double bn_epsilon = 1e-5;
};

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;

    friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainOptions {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    AdamConfig adam;
    std::uint64_t seed = 0;
    std::size_t patience = 10;
    double min_improvement = 1e-4;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainingReport {
    double final_loss = 0.0;
    double accuracy = 0.0;  // inference-mode accuracy over all training windows
    std::size_t epochs_run = 0;
    std::uint64_t seed = 0;
    bool early_stopped = false;
    std::vector<EpochLog> history;

    friend bool operator==(const TrainingReport&, const TrainingReport&) = default;
};

class TrainedExtractor {
public:
    TrainedExtractor() = default;
    TrainedExtractor(NetworkConfig config, Network network, TrainingReport report);

    const NetworkConfig& config() const { return config_; }
    const Network& network() const { return network_; }
    const TrainingReport& report() const { return report_; }

    /// Layers up to and including the feature layer (the classifier minus its output layer).
    std::size_t feature_depth() const { return network_.size() - 1; }

    /// Feature-layer activations, [windows, n_features], inference mode.
    Tensor features(std::span<const Window> windows) const;
    /// Output-layer logits of the full classifier, [windows, n_classes].
    Tensor logits(std::span<const Window> windows) const;

    double accuracy(std::span<const Window> windows) const;

private:
    NetworkConfig config_;
    Network network_;
    TrainingReport report_;
};

Network build_network(const NetworkConfig& config, std::uint64_t seed);

/// Packs window values into a [batch, 1, length] tensor.
Tensor window_batch(std::span<const Window> windows, std::size_t length);

TrainedExtractor train_extractor(const std::vector<Window>& windows, const NetworkConfig& config,
                                 const TrainOptions& options);

void save_extractor(std::ostream& out, const TrainedExtractor& extractor);
TrainedExtractor load_extractor(std::istream& in);

enum class FeatureKind { window, mean, medoid };
enum class Aggregation { mean, medoid };

std::string to_string(Aggregation method);
Aggregation aggregation_from_string(const std::string& name);

struct FeatureVector {
    std::string series_id;
    FeatureKind kind = FeatureKind::window;
    std::vector<double> values;
    std::int64_t window_offset = 0;
};

/// One feature vector per window, in input order. `series_ids[w.series_index]` names each owner.
std::vector<FeatureVector> extract_window_features(const TrainedExtractor& extractor,
                                                   const std::vector<Window>& windows,
                                                   const std::vector<std::string>& series_ids);

/// Collapses one series' window features into a static vector.
/// Medoid: member minimizing the summed Euclidean distance to all members; ties go to the
/// lowest window offset.
FeatureVector aggregate(std::span<const FeatureVector> features, Aggregation method);

struct FeatureMatrix {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;

    std::size_t n_features() const { return rows.empty() ? 0 : rows.front().size(); }
    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

struct StaticFeatureOptions {
    WindowParams windows;
    std::uint64_t seed = 0;
    Aggregation method = Aggregation::mean;
    bool transfer = false;  // series were not the training classes; only the feature layer is meaningful
    std::size_t batch_size = 256;
};

FeatureMatrix extract_static_features(const TrainedExtractor& extractor, const std::vector<TrainSeries>& series,
                                      const StaticFeatureOptions& options);

void write_feature_csv(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_feature_csv(std::istream& in);

/// Per-window features: `series_id,offset,f1,...`.
void write_window_feature_csv(std::ostream& out, const std::vector<FeatureVector>& features);
std::vector<FeatureVector> read_window_feature_csv(std::istream& in);

}  // namespace frans
