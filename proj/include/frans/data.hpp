#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace frans {

struct TimeSeries {
    std::string id;
    std::vector<double> values;
    std::size_t period = 1;  // seasonal period m
};

struct Dataset {
    std::string name;
    std::size_t horizon = 0;
    std::vector<TimeSeries> series;  // class index == position
};

enum class InputFormat {
    long_csv,  // header `series_id,value`, rows in temporal order per id
    wide,      // `id,v1,v2,...` one series per row
    tsf,       // Monash forecasting repository .tsf
};

InputFormat input_format_from_string(const std::string& name);
std::string to_string(InputFormat format);

Dataset parse_dataset(std::istream& in, InputFormat format, std::size_t period, std::size_t horizon,
                      const std::string& name = "dataset");
Dataset ingest(const std::filesystem::path& path, InputFormat format, std::size_t period, std::size_t horizon);

void write_long_csv(std::ostream& out, const Dataset& dataset);

/// Observations a model may be fit on.
struct TrainSeries {
    std::string id;
    std::vector<double> values;
    std::size_t period = 1;
};

/// Final `horizon` observations, only read when scoring.
struct HeldOutSeries {
    std::string id;
    std::vector<double> values;
};

struct SplitDataset {
    std::size_t horizon = 0;
    std::vector<TrainSeries> train;
    std::vector<HeldOutSeries> test;
};

/// Last `horizon` points of every series become the test block.
SplitDataset split(const Dataset& dataset);

/// Holds out the last `horizon` points of already-training data (validation split).
SplitDataset split(const std::vector<TrainSeries>& train, std::size_t horizon);

struct Window {
    std::size_t class_index = 0;
    std::size_t series_index = 0;  // position of the owning series in the input list
    std::int64_t start = 0;  // offset into the series; negative when the series was left-padded
    std::vector<double> values;
    double norm_mean = 0.0;
    double norm_std = 0.0;
};

struct WindowParams {
    std::size_t length = 16;
    std::size_t stride = 4;
    std::size_t max_per_series = 64;
};

/// Sliding z-normalized windows, one class per series (or per `labels[i]` when given).
std::vector<Window> make_windows(const std::vector<TrainSeries>& series, const WindowParams& params,
                                 std::uint64_t seed, const std::vector<std::size_t>* labels = nullptr);

/// Candidate offsets {0, stride, ...} plus the final offset, before subsampling.
std::vector<std::size_t> window_offsets(std::size_t series_length, std::size_t window_length, std::size_t stride);

/// clamp(3m, 16, shortest training series)
std::size_t default_window_length(const std::vector<TrainSeries>& train, std::size_t period);
std::size_t default_stride(std::size_t window_length);

/// Value of the (left-padded) series at a possibly negative offset.
double padded_value(const std::vector<double>& series, std::int64_t index);

/// Optional many-series-per-class mapping: CSV rows `series_id,label`.
std::vector<std::size_t> load_label_map(const std::filesystem::path& path, const std::vector<TrainSeries>& train,
                                        std::size_t* class_count);

struct SyntheticSpec {
    std::size_t n_series = 20;
    std::size_t length = 240;
    std::size_t period = 12;
    std::size_t horizon = 12;
    double noise = 0.05;
    std::uint64_t seed = 7;
};

/// Distinct frequency/trend mixtures with multiplicative-safe positive levels.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace frans
