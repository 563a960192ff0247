#include "frans/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "frans/csv_io.hpp"

namespace frans {

namespace {

std::size_t to_size(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + value + "'");
    }
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config: " + key + " expects true or false, got '" + value + "'");
}

std::vector<std::string> to_list(const std::string& value) {
    std::vector<std::string> out;
    for (std::string_view part : split_csv_line(value)) {
        const std::string_view t = trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(T RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = to_size(k, v); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = to_double(k, v); },
            [member](const RunConfig& c) { return format_number(c.*member); }};
}

Field string_field(std::string RunConfig::*member) {
    return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
            [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"data", string_field(&RunConfig::data)},
        {"format",
         {[](RunConfig& c, const std::string&, const std::string& v) {
              input_format_from_string(v);
              c.format = v;
          },
          [](const RunConfig& c) { return c.format; }}},
        {"m", size_field(&RunConfig::period)},
        {"horizon", size_field(&RunConfig::horizon)},
        {"label_map", string_field(&RunConfig::label_map)},
        {"window_length", size_field(&RunConfig::window_length)},
        {"stride", size_field(&RunConfig::stride)},
        {"max_per_series", size_field(&RunConfig::max_per_series)},
        {"n_features", size_field(&RunConfig::n_features)},
        {"conv_blocks",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.conv_blocks = parse_blocks(v); },
          [](const RunConfig& c) { return format_blocks(c.conv_blocks); }}},
        {"epochs", size_field(&RunConfig::epochs)},
        {"batch_size", size_field(&RunConfig::batch_size)},
        {"learning_rate", double_field(&RunConfig::learning_rate)},
        {"patience", size_field(&RunConfig::patience)},
        {"meta_rounds", size_field(&RunConfig::meta_rounds)},
        {"meta_depth", size_field(&RunConfig::meta_depth)},
        {"meta_eta", double_field(&RunConfig::meta_eta)},
        {"meta_lambda", double_field(&RunConfig::meta_lambda)},
        {"meta_min_child", size_field(&RunConfig::meta_min_child)},
        {"aggregation",
         {[](RunConfig& c, const std::string&, const std::string& v) {
              aggregation_from_string(v);
              c.aggregation = v;
          },
          [](const RunConfig& c) { return c.aggregation; }}},
        {"pool",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              std::vector<std::string> pool = to_list(v);
              if (pool.empty()) throw std::invalid_argument("config: " + k + " must name at least one model");
              const auto& known = default_pool();
              for (const std::string& name : pool) {
                  if (std::find(known.begin(), known.end(), name) == known.end()) {
                      throw std::invalid_argument("config: unknown base model '" + name + "'");
                  }
              }
              c.pool = std::move(pool);
          },
          [](const RunConfig& c) { return join(c.pool); }}},
        {"restarts", size_field(&RunConfig::restarts)},
        {"k_min", size_field(&RunConfig::k_min)},
        {"k_max", size_field(&RunConfig::k_max)},
        {"histogram_bins", size_field(&RunConfig::histogram_bins)},
        {"seed",
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }}},
        {"out", string_field(&RunConfig::out)},
        {"threads", size_field(&RunConfig::threads)},
        {"transfer",
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.transfer = to_bool(k, v); },
          [](const RunConfig& c) { return std::string(c.transfer ? "true" : "false"); }}},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, f] : fields()) out.push_back(k);
        return out;
    }();
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& [k, f] : fields()) {
        if (k == key) {
            f.set(*this, key, value);
            return;
        }
    }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, f] : fields()) out.emplace_back(k, f.get(*this));
    return out;
}

PipelineConfig RunConfig::pipeline() const {
    PipelineConfig p;
    p.window_length = window_length;
    p.stride = stride;
    p.max_per_series = max_per_series;
    p.network.n_features = n_features;
    p.network.blocks = conv_blocks;
    p.epochs = epochs;
    p.batch_size = batch_size;
    p.learning_rate = learning_rate;
    p.patience = patience;
    p.gbdt.rounds = meta_rounds;
    p.gbdt.max_depth = meta_depth;
    p.gbdt.eta = meta_eta;
    p.gbdt.lambda = meta_lambda;
    p.gbdt.min_child = meta_min_child;
    p.aggregation = aggregation_from_string(aggregation);
    p.pool = pool;
    p.seed = seed;
    return p;
}

void apply_config_stream(RunConfig& config, std::istream& in, const std::string& source) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument(source + ":" + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key(trim(t.substr(0, eq)));
        const std::string value(trim(t.substr(eq + 1)));
        try {
            config.set(key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(source + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    apply_config_stream(config, in, path.string());
}

std::string format_blocks(const std::vector<ConvBlock>& blocks) {
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        out += (i ? "," : "") + std::to_string(blocks[i].filters) + "x" + std::to_string(blocks[i].kernel);
    }
    return out;
}

std::vector<ConvBlock> parse_blocks(const std::string& text) {
    std::vector<ConvBlock> blocks;
    for (const std::string& item : to_list(text)) {
        const std::size_t x = item.find('x');
        if (x == std::string::npos) {
            throw std::invalid_argument("config: conv block '" + item + "' is not of the form FILTERSxKERNEL");
        }
        ConvBlock b{to_size("conv_blocks", item.substr(0, x)), to_size("conv_blocks", item.substr(x + 1))};
        if (b.filters == 0 || b.kernel == 0) throw std::invalid_argument("config: conv block '" + item + "' has a zero size");
        blocks.push_back(b);
    }
    if (blocks.empty()) throw std::invalid_argument("config: conv_blocks is empty");
    return blocks;
}

void Manifest::record(const std::string& key, const std::string& value) { facts_.emplace_back(key, value); }

void Manifest::artifact(const std::string& name, const std::filesystem::path& path) {
    artifacts_.emplace_back(name, file_checksum(path));
}

void Manifest::write(std::ostream& out, const RunConfig& config) const {
    out << "stage = " << stage_ << '\n';
    for (const auto& [k, v] : config.entries()) out << "config." << k << " = " << v << '\n';
    for (const auto& [k, v] : facts_) out << k << " = " << v << '\n';
    for (const auto& [k, v] : artifacts_) out << "artifact." << k << " = fnv1a64:" << v << '\n';
}

}  // namespace frans
