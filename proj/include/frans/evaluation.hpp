#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "frans/data.hpp"
#include "frans/extractor.hpp"
#include "frans/forecasters.hpp"
#include "frans/metalearner.hpp"

namespace frans {

/// 200/n * sum |y - f| / (|y| + |f|). A term where both values are zero counts as 0.
double smape(std::span<const double> actual, std::span<const double> forecast, std::size_t* both_zero_terms = nullptr);

/// Error raised inside a pipeline stage; what() is prefixed with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PipelineConfig {
    // 0 selects the data-driven default (default_window_length / default_stride)
    std::size_t window_length = 0;
    std::size_t stride = 0;
    std::size_t max_per_series = 64;
    NetworkConfig network;  // n_classes and window_length are filled in per phase
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::size_t patience = 10;
    GbdtParams gbdt;
    Aggregation aggregation = Aggregation::mean;
    std::vector<std::string> pool = default_pool();
    std::uint64_t seed = 42;
    std::function<void(const std::string&)> log;
};

struct FallbackEvent {
    std::string phase;
    std::string series_id;
    std::string model;
    std::string note;
};

/// Resolved window parameters for a set of training series.
WindowParams resolve_windows(const PipelineConfig& config, const std::vector<TrainSeries>& train);

TrainedExtractor train_extractor_on(const std::vector<TrainSeries>& train, const WindowParams& windows,
                                    const PipelineConfig& config, const std::string& phase);

struct MetaSet {
    std::vector<std::string> models;
    std::vector<MetaInstance> instances;
    std::vector<std::string> excluded;  // too short for the validation split
    std::vector<FallbackEvent> fallbacks;
    WindowParams windows;
    TrainingReport extractor_report;
};

/// Validation phase: the last h points of each training region score the base models (c) and
/// the extractor sees only the region before them (x).
MetaSet build_meta_training(const Dataset& dataset, const PipelineConfig& config);

struct MetricReport {
    std::vector<std::string> methods;  // pool models then "combined"
    std::vector<std::string> series_ids;
    std::vector<std::vector<double>> smape;  // [series][method]
    std::vector<double> mean_smape;          // per method
    std::vector<std::vector<double>> weights;  // [series][pool model]
    std::vector<std::vector<double>> combined;  // [series][k]
    std::vector<FallbackEvent> fallbacks;
    std::vector<std::string> excluded_from_meta;
    std::size_t both_zero_terms = 0;
    std::size_t meta_instances = 0;
    WindowParams meta_windows;  // validation phase
    WindowParams windows;       // forecast phase

    double mean_of(const std::string& method) const;
};

MetricReport run_pipeline(const Dataset& dataset, const PipelineConfig& config);

void write_per_series_csv(std::ostream& out, const MetricReport& report);
void write_summary_csv(std::ostream& out, const MetricReport& report);
void write_fallback_csv(std::ostream& out, const std::vector<FallbackEvent>& events);
void write_weights_csv(std::ostream& out, const std::vector<std::string>& series_ids,
                       const std::vector<std::string>& models, const std::vector<std::vector<double>>& weights);
void write_meta_instances_csv(std::ostream& out, const MetaSet& meta);

}  // namespace frans
