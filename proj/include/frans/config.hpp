#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "frans/evaluation.hpp"

namespace frans {

/// Every tunable of a run. Serialized as flat `key = value` text.
struct RunConfig {
    std::string data;
    std::string format = "long-csv";
    std::size_t period = 1;
    std::size_t horizon = 0;
    std::string label_map;

    std::size_t window_length = 0;  // 0 = automatic
    std::size_t stride = 0;         // 0 = automatic
    std::size_t max_per_series = 64;

    std::size_t n_features = 16;
    std::vector<ConvBlock> conv_blocks{{128, 8}, {256, 5}, {128, 3}};
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::size_t patience = 10;

    std::size_t meta_rounds = 100;
    std::size_t meta_depth = 3;
    double meta_eta = 0.1;
    double meta_lambda = 1.0;
    std::size_t meta_min_child = 5;

    std::string aggregation = "mean";
    std::vector<std::string> pool = default_pool();

    std::size_t restarts = 10;
    std::size_t k_min = 2;
    std::size_t k_max = 8;
    std::size_t histogram_bins = 20;

    std::uint64_t seed = 42;
    std::string out = "frans_out";
    std::size_t threads = 1;
    bool transfer = false;

    /// Assigns one key; unknown keys and malformed values throw std::invalid_argument.
    void set(const std::string& key, const std::string& value);
    /// All keys with their current values, in a fixed order.
    std::vector<std::pair<std::string, std::string>> entries() const;

    PipelineConfig pipeline() const;
};

const std::vector<std::string>& config_keys();

/// Applies a `key = value` file on top of `config`. Blank lines and `#` comments are ignored.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
void apply_config_stream(RunConfig& config, std::istream& in, const std::string& source);

std::string format_blocks(const std::vector<ConvBlock>& blocks);
std::vector<ConvBlock> parse_blocks(const std::string& text);

/// Run record written next to a stage's artifacts.
class Manifest {
public:
    explicit Manifest(std::string stage) : stage_(std::move(stage)) {}

    void record(const std::string& key, const std::string& value);
    void record(const std::string& key, std::size_t value) { record(key, std::to_string(value)); }
    void artifact(const std::string& name, const std::filesystem::path& path);
    void write(std::ostream& out, const RunConfig& config) const;

private:
    std::string stage_;
    std::vector<std::pair<std::string, std::string>> facts_;
    std::vector<std::pair<std::string, std::string>> artifacts_;
};

}  // namespace frans
