#include "frans/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "frans/csv_io.hpp"
#include "frans/rng.hpp"

namespace frans {

namespace {

void say(const PipelineConfig& config, const std::string& msg) {
    if (config.log) config.log(msg);
}

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

FeatureMatrix static_features(const TrainedExtractor& extractor, const std::vector<TrainSeries>& train,
                              const WindowParams& windows, const PipelineConfig& config, const std::string& phase) {
    StaticFeatureOptions opts;
    opts.windows = windows;
    opts.seed = mix_seed(config.seed, phase + "/extract", 0);
    opts.method = config.aggregation;
    return extract_static_features(extractor, train, opts);
}

void collect_fallbacks(const ForecastSet& set, const std::string& phase, std::vector<FallbackEvent>& out) {
    for (std::size_t i = 0; i < set.models.size(); ++i) {
        if (set.forecasts[i].fallback) out.push_back({phase, set.series_id, set.models[i], set.forecasts[i].note});
    }
}

}  // namespace

double smape(std::span<const double> actual, std::span<const double> forecast, std::size_t* both_zero_terms) {
    if (actual.size() != forecast.size()) {
        throw std::invalid_argument("smape: " + std::to_string(actual.size()) + " actuals vs " +
                                    std::to_string(forecast.size()) + " forecasts");
    }
    if (actual.empty()) throw std::invalid_argument("smape: empty input");
    double sum = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        if (!std::isfinite(actual[t]) || !std::isfinite(forecast[t])) throw std::invalid_argument("smape: non-finite input");
        const double denom = std::abs(actual[t]) + std::abs(forecast[t]);
        if (denom == 0.0) {
            if (both_zero_terms) ++*both_zero_terms;
            continue;
        }
        sum += std::abs(actual[t] - forecast[t]) / denom;
    }
    return 200.0 / static_cast<double>(actual.size()) * sum;
}

WindowParams resolve_windows(const PipelineConfig& config, const std::vector<TrainSeries>& train) {
    WindowParams w;
    const std::size_t period = train.empty() ? 1 : train.front().period;
    w.length = config.window_length ? config.window_length : default_window_length(train, period);
    w.stride = config.stride ? config.stride : default_stride(w.length);
    w.max_per_series = config.max_per_series;
    return w;
}

TrainedExtractor train_extractor_on(const std::vector<TrainSeries>& train, const WindowParams& windows,
                                    const PipelineConfig& config, const std::string& phase) {
    const std::vector<Window> win = make_windows(train, windows, mix_seed(config.seed, phase + "/windows", 0));
    NetworkConfig net = config.network;
    net.n_classes = train.size();
    net.window_length = windows.length;
    TrainOptions opts;
    opts.epochs = config.epochs;
    opts.batch_size = config.batch_size;
    opts.adam.learning_rate = config.learning_rate;
    opts.patience = config.patience;
    opts.seed = mix_seed(config.seed, phase + "/train", 0);
    if (config.log) {
        opts.on_epoch = [&](const EpochLog& e) {
            std::ostringstream os;
            os << phase << " epoch " << e.epoch << " loss " << e.loss << " accuracy " << e.accuracy;
            config.log(os.str());
        };
    }
    return train_extractor(win, net, opts);
}

MetaSet build_meta_training(const Dataset& dataset, const PipelineConfig& config) {
    const SplitDataset outer = in_stage("split", [&] { return split(dataset); });
    MetaSet meta;
    meta.models = config.pool;
    std::vector<TrainSeries> eligible;
    for (const TrainSeries& s : outer.train) {
        if (s.values.size() > 2 * dataset.horizon) {
            eligible.push_back(s);
        } else {
            meta.excluded.push_back(s.id);
        }
    }
    if (eligible.empty()) {
        throw StageError("meta-training", "no series is longer than twice the horizon; meta-set is empty");
    }
    const SplitDataset inner = in_stage("meta-training/split", [&] { return split(eligible, dataset.horizon); });

    for (std::size_t i = 0; i < inner.train.size(); ++i) {
        const TrainSeries& s = inner.train[i];
        const ForecastSet set = in_stage("meta-training/base-forecast", [&] {
            return forecast_pool(s.id, s.values, s.period, dataset.horizon, config.pool);
        });
        collect_fallbacks(set, "validation", meta.fallbacks);
        MetaInstance inst;
        inst.series_id = s.id;
        for (const Forecast& f : set.forecasts) inst.errors.push_back(smape(inner.test[i].values, f.values));
        meta.instances.push_back(std::move(inst));
    }

    meta.windows = in_stage("meta-training/windows", [&] { return resolve_windows(config, inner.train); });
    say(config, "meta-training: window length " + std::to_string(meta.windows.length) + ", " +
                    std::to_string(inner.train.size()) + " series");
    const TrainedExtractor extractor =
        in_stage("meta-training/extractor", [&] { return train_extractor_on(inner.train, meta.windows, config, "phase1"); });
    meta.extractor_report = extractor.report();
    const FeatureMatrix features = in_stage("meta-training/extract", [&] {
        return static_features(extractor, inner.train, meta.windows, config, "phase1");
    });
    for (std::size_t i = 0; i < meta.instances.size(); ++i) meta.instances[i].x = features.rows[i];
    return meta;
}

double MetricReport::mean_of(const std::string& method) const {
    const auto it = std::find(methods.begin(), methods.end(), method);
    if (it == methods.end()) throw std::invalid_argument("no method '" + method + "' in report");
    return mean_smape[static_cast<std::size_t>(it - methods.begin())];
}

MetricReport run_pipeline(const Dataset& dataset, const PipelineConfig& config) {
    if (config.pool.empty()) throw StageError("config", "empty base model pool");
    MetricReport report;

    const MetaSet meta = build_meta_training(dataset, config);
    report.excluded_from_meta = meta.excluded;
    report.meta_instances = meta.instances.size();
    report.meta_windows = meta.windows;
    report.fallbacks = meta.fallbacks;
    const GbdtModel model = in_stage("meta-training/fit", [&] { return fit_gbdt(meta.instances, config.gbdt, config.seed); });
    say(config, "meta-learner: " + std::to_string(model.trees.size()) + " trees");

    const SplitDataset outer = in_stage("split", [&] { return split(dataset); });
    const WindowParams windows = in_stage("forecast/windows", [&] { return resolve_windows(config, outer.train); });
    report.windows = windows;
    const TrainedExtractor extractor =
        in_stage("forecast/extractor", [&] { return train_extractor_on(outer.train, windows, config, "phase2"); });
    const FeatureMatrix features =
        in_stage("forecast/extract", [&] { return static_features(extractor, outer.train, windows, config, "phase2"); });

    report.methods = config.pool;
    report.methods.push_back("combined");
    for (std::size_t i = 0; i < outer.train.size(); ++i) {
        const TrainSeries& s = outer.train[i];
        const ForecastSet set = in_stage("forecast/base-forecast", [&] {
            return forecast_pool(s.id, s.values, s.period, dataset.horizon, config.pool);
        });
        collect_fallbacks(set, "test", report.fallbacks);
        const std::vector<double> w = in_stage("forecast/weights", [&] { return predict_weights(model, features.rows[i]); });
        std::vector<std::vector<double>> per_model;
        for (const Forecast& f : set.forecasts) per_model.push_back(f.values);
        const std::vector<double> combined = combine(w, per_model);

        std::vector<double> row;
        for (const auto& f : per_model) row.push_back(smape(outer.test[i].values, f, &report.both_zero_terms));
        row.push_back(smape(outer.test[i].values, combined, &report.both_zero_terms));
        report.series_ids.push_back(s.id);
        report.smape.push_back(std::move(row));
        report.weights.push_back(w);
        report.combined.push_back(combined);
    }
    report.mean_smape.assign(report.methods.size(), 0.0);
    for (const auto& row : report.smape) {
        for (std::size_t m = 0; m < row.size(); ++m) report.mean_smape[m] += row[m];
    }
    for (double& v : report.mean_smape) v /= static_cast<double>(report.smape.size());
    return report;
}

void write_per_series_csv(std::ostream& out, const MetricReport& report) {
    out << "series_id,method,smape\n";
    for (std::size_t i = 0; i < report.series_ids.size(); ++i) {
        for (std::size_t m = 0; m < report.methods.size(); ++m) {
            out << report.series_ids[i] << ',' << report.methods[m] << ',' << format_number(report.smape[i][m]) << '\n';
        }
    }
}

void write_summary_csv(std::ostream& out, const MetricReport& report) {
    out << "method,mean_smape\n";
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
        out << report.methods[m] << ',' << format_number(report.mean_smape[m]) << '\n';
    }
}

void write_fallback_csv(std::ostream& out, const std::vector<FallbackEvent>& events) {
    out << "phase,series_id,model,note\n";
    for (const FallbackEvent& e : events) out << e.phase << ',' << e.series_id << ',' << e.model << ',' << e.note << '\n';
}

void write_weights_csv(std::ostream& out, const std::vector<std::string>& series_ids,
                       const std::vector<std::string>& models, const std::vector<std::vector<double>>& weights) {
    out << "series_id,model,weight\n";
    for (std::size_t i = 0; i < series_ids.size(); ++i) {
        for (std::size_t m = 0; m < models.size(); ++m) {
            out << series_ids[i] << ',' << models[m] << ',' << format_number(weights[i][m]) << '\n';
        }
    }
}

void write_meta_instances_csv(std::ostream& out, const MetaSet& meta) {
    out << "series_id";
    const std::size_t dims = meta.instances.empty() ? 0 : meta.instances.front().x.size();
    for (std::size_t j = 0; j < dims; ++j) out << ",f" << (j + 1);
    for (const std::string& m : meta.models) out << ",err_" << m;
    out << '\n';
    for (const MetaInstance& inst : meta.instances) {
        out << inst.series_id;
        for (double v : inst.x) out << ',' << format_number(v);
        for (double c : inst.errors) out << ',' << format_number(c);
        out << '\n';
    }
}

}  // namespace frans
