#include "frans/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "frans/csv_io.hpp"
#include "frans/rng.hpp"

namespace frans {

namespace {

double parse_value(std::string_view field, std::size_t line_no) {
    const std::string_view trimmed = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
    if (trimmed.empty() || ec != std::errc() || ptr != trimmed.data() + trimmed.size()) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-numeric value '" + std::string(trimmed) + "'");
    }
    if (!std::isfinite(v)) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite value '" + std::string(trimmed) + "'");
    }
    return v;
}

void validate(const Dataset& ds) {
    std::unordered_set<std::string> ids;
    for (const TimeSeries& s : ds.series) {
        if (!ids.insert(s.id).second) throw std::runtime_error("duplicate series id '" + s.id + "'");
        if (s.values.size() < 2) {
            throw std::runtime_error("series '" + s.id + "' has " + std::to_string(s.values.size()) +
                                     " observations, need at least 2");
        }
    }
}

Dataset parse_long_csv(std::istream& in) {
    Dataset ds;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields.size() != 2 || trim(fields[0]) != "series_id" || trim(fields[1]) != "value") {
                throw std::runtime_error("line " + std::to_string(line_no) + ": expected header 'series_id,value'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 2) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 2 fields, got " +
                                     std::to_string(fields.size()));
        }
        const std::string id(trim(fields[0]));
        if (id.empty()) throw std::runtime_error("line " + std::to_string(line_no) + ": empty series id");
        const double v = parse_value(fields[1], line_no);
        auto [it, inserted] = index.try_emplace(id, ds.series.size());
        if (inserted) ds.series.push_back(TimeSeries{id, {}, 1});
        ds.series[it->second].values.push_back(v);
    }
    if (!header_seen) throw std::runtime_error("empty input: expected header 'series_id,value'");
    return ds;
}

Dataset parse_wide(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        TimeSeries s;
        s.id = std::string(trim(fields[0]));
        if (s.id.empty()) throw std::runtime_error("line " + std::to_string(line_no) + ": empty series id");
        for (std::size_t i = 1; i < fields.size(); ++i) s.values.push_back(parse_value(fields[i], line_no));
        ds.series.push_back(std::move(s));
    }
    return ds;
}

Dataset parse_tsf(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool in_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (!in_data) {
            if (t.starts_with("@data")) in_data = true;
            continue;
        }
        const auto colon = t.rfind(':');
        const auto first_colon = t.find(':');
        if (colon == std::string_view::npos) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 'name:...:values'");
        }
        TimeSeries s;
        s.id = std::string(trim(t.substr(0, first_colon)));
        for (std::string_view field : split_csv_line(t.substr(colon + 1))) {
            if (trim(field) == "?") {
                throw std::runtime_error("line " + std::to_string(line_no) + ": missing value '?' in series '" + s.id + "'");
            }
            s.values.push_back(parse_value(field, line_no));
        }
        ds.series.push_back(std::move(s));
    }
    if (!in_data) throw std::runtime_error("tsf input has no @data section");
    return ds;
}

std::vector<double> normalized(std::span<const double> raw, double& mean_out, double& std_out) {
    const double n = static_cast<double>(raw.size());
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= n;
    double sq = 0.0;
    for (double v : raw) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / n);
    mean_out = mean;
    std::vector<double> out(raw.size(), 0.0);
    if (sd < 1e-12) {
        std_out = 0.0;
        return out;
    }
    std_out = sd;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean) / sd;
    return out;
}

}  // namespace

InputFormat input_format_from_string(const std::string& name) {
    if (name == "long-csv" || name == "long") return InputFormat::long_csv;
    if (name == "one-row-per-series" || name == "wide") return InputFormat::wide;
    if (name == "tsf") return InputFormat::tsf;
    throw std::invalid_argument("unknown input format '" + name + "' (expected long-csv, one-row-per-series or tsf)");
}

std::string to_string(InputFormat format) {
    switch (format) {
        case InputFormat::long_csv: return "long-csv";
        case InputFormat::wide: return "one-row-per-series";
        case InputFormat::tsf: return "tsf";
    }
    return "unknown";
}

Dataset parse_dataset(std::istream& in, InputFormat format, std::size_t period, std::size_t horizon,
                      const std::string& name) {
    if (period == 0) throw std::invalid_argument("seasonal period must be positive");
    Dataset ds;
    switch (format) {
        case InputFormat::long_csv: ds = parse_long_csv(in); break;
        case InputFormat::wide: ds = parse_wide(in); break;
        case InputFormat::tsf: ds = parse_tsf(in); break;
    }
    validate(ds);
    ds.name = name;
    ds.horizon = horizon;
    for (TimeSeries& s : ds.series) s.period = period;
    return ds;
}

Dataset ingest(const std::filesystem::path& path, InputFormat format, std::size_t period, std::size_t horizon) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    try {
        return parse_dataset(in, format, period, horizon, path.stem().string());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_long_csv(std::ostream& out, const Dataset& dataset) {
    out << "series_id,value\n";
    for (const TimeSeries& s : dataset.series) {
        for (double v : s.values) out << s.id << ',' << format_number(v) << '\n';
    }
}

SplitDataset split(const Dataset& dataset) {
    std::vector<TrainSeries> whole;
    whole.reserve(dataset.series.size());
    for (const TimeSeries& s : dataset.series) whole.push_back(TrainSeries{s.id, s.values, s.period});
    return split(whole, dataset.horizon);
}

SplitDataset split(const std::vector<TrainSeries>& train, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("split: horizon must be positive");
    std::vector<std::string> too_short;
    for (const TrainSeries& s : train) {
        if (s.values.size() <= horizon) too_short.push_back(s.id);
    }
    if (!too_short.empty()) {
        std::string ids;
        for (const auto& id : too_short) ids += (ids.empty() ? "" : ", ") + id;
        throw std::invalid_argument("split: series not longer than horizon " + std::to_string(horizon) + ": " + ids);
    }
    SplitDataset out;
    out.horizon = horizon;
    for (const TrainSeries& s : train) {
        const auto cut = static_cast<std::ptrdiff_t>(s.values.size() - horizon);
        out.train.push_back(TrainSeries{s.id, {s.values.begin(), s.values.begin() + cut}, s.period});
        out.test.push_back(HeldOutSeries{s.id, {s.values.begin() + cut, s.values.end()}});
    }
    return out;
}

std::vector<std::size_t> window_offsets(std::size_t series_length, std::size_t window_length, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("window stride must be at least 1");
    const std::size_t last = series_length > window_length ? series_length - window_length : 0;
    std::vector<std::size_t> offsets;
    for (std::size_t o = 0; o <= last; o += stride) offsets.push_back(o);
    if (offsets.back() != last) offsets.push_back(last);
    return offsets;
}

double padded_value(const std::vector<double>& series, std::int64_t index) {
    return index < 0 ? series.front() : series[static_cast<std::size_t>(index)];
}

std::vector<Window> make_windows(const std::vector<TrainSeries>& series, const WindowParams& params,
                                 std::uint64_t seed, const std::vector<std::size_t>* labels) {
    if (params.length < 4) {
        throw std::invalid_argument("make_windows: window length " + std::to_string(params.length) +
                                    " < 4 gives a degenerate receptive field");
    }
    if (params.stride == 0) throw std::invalid_argument("make_windows: stride must be at least 1");
    if (params.max_per_series == 0) throw std::invalid_argument("make_windows: max_per_series must be at least 1");
    if (labels && labels->size() != series.size()) {
        throw std::invalid_argument("make_windows: label map size does not match series count");
    }

    std::vector<Window> windows;
    const std::size_t len = params.length;
    for (std::size_t idx = 0; idx < series.size(); ++idx) {
        const std::vector<double>& values = series[idx].values;
        if (values.empty()) throw std::invalid_argument("make_windows: series '" + series[idx].id + "' is empty");
        const std::size_t pad = values.size() < len ? len - values.size() : 0;
        std::vector<std::size_t> offsets = window_offsets(values.size() + pad, len, params.stride);
        if (offsets.size() > params.max_per_series) {
            Rng rng = Rng::stream(seed, "windowing", idx);
            // partial Fisher-Yates: first max_per_series entries become a uniform subset
            for (std::size_t i = 0; i < params.max_per_series; ++i) {
                const std::size_t j = i + rng.index(offsets.size() - i);
                std::swap(offsets[i], offsets[j]);
            }
            offsets.resize(params.max_per_series);
            std::sort(offsets.begin(), offsets.end());
        }
        for (std::size_t offset : offsets) {
            const std::int64_t start = static_cast<std::int64_t>(offset) - static_cast<std::int64_t>(pad);
            std::vector<double> raw(len);
            for (std::size_t i = 0; i < len; ++i) raw[i] = padded_value(values, start + static_cast<std::int64_t>(i));
            Window w;
            w.class_index = labels ? (*labels)[idx] : idx;
            w.series_index = idx;
            w.start = start;
            w.values = normalized(raw, w.norm_mean, w.norm_std);
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

std::size_t default_window_length(const std::vector<TrainSeries>& train, std::size_t period) {
    if (train.empty()) throw std::invalid_argument("default_window_length: no series");
    std::size_t shortest = train.front().values.size();
    for (const TrainSeries& s : train) shortest = std::min(shortest, s.values.size());
    return std::min(std::max<std::size_t>(3 * period, 16), shortest);
}

std::size_t default_stride(std::size_t window_length) { return std::max<std::size_t>(1, window_length / 4); }

std::vector<std::size_t> load_label_map(const std::filesystem::path& path, const std::vector<TrainSeries>& train,
                                        std::size_t* class_count) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open label map '" + path.string() + "'");
    std::unordered_map<std::string, std::string> label_of;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": expected 'series_id,label'");
        if (line_no == 1 && trim(fields[0]) == "series_id") continue;
        label_of[std::string(trim(fields[0]))] = std::string(trim(fields[1]));
    }
    std::map<std::string, std::size_t> dense;
    std::vector<std::size_t> labels;
    std::vector<std::string> order;
    for (const TrainSeries& s : train) {
        auto it = label_of.find(s.id);
        if (it == label_of.end()) throw std::runtime_error(path.string() + ": no label for series '" + s.id + "'");
        auto [pos, inserted] = dense.try_emplace(it->second, dense.size());
        labels.push_back(pos->second);
    }
    if (class_count) *class_count = dense.size();
    return labels;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    Rng rng = Rng::stream(spec.seed, "synthetic");
    Dataset ds;
    ds.name = "synthetic";
    ds.horizon = spec.horizon;
    for (std::size_t i = 0; i < spec.n_series; ++i) {
        const double cycle = 4.0 + 0.9 * static_cast<double>(i);
        const double second_cycle = cycle * (1.7 + 0.35 * static_cast<double>(i % 5));
        const double amp = 1.0 + rng.uniform();
        const double mix = 0.2 + 0.6 * rng.uniform();
        const double slope = (static_cast<double>(i % 4) - 1.5) * 0.01 * amp;
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        const double level = 20.0 * amp;
        TimeSeries s;
        s.id = "S" + std::to_string(i + 1);
        s.period = spec.period;
        for (std::size_t t = 0; t < spec.length; ++t) {
            const double x = static_cast<double>(t);
            const double signal = amp * std::sin(2.0 * std::numbers::pi * x / cycle + phase) +
                                  mix * amp * std::sin(2.0 * std::numbers::pi * x / second_cycle);
            s.values.push_back(level + slope * x + signal + spec.noise * amp * rng.normal());
        }
        ds.series.push_back(std::move(s));
    }
    return ds;
}

}  // namespace frans
