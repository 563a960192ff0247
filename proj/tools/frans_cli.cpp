#include <CLI11.hpp>
#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frans/analysis.hpp"
#include "frans/config.hpp"
#include "frans/csv_io.hpp"
#include "frans/data.hpp"
#include "frans/evaluation.hpp"
#include "frans/extractor.hpp"
#include "frans/forecasters.hpp"
#include "frans/metalearner.hpp"
#include "frans/rng.hpp"

namespace fs = std::filesystem;
using namespace frans;

namespace {

struct Options {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<std::size_t> period;
    std::optional<std::size_t> horizon;
    std::optional<std::size_t> threads;
    std::optional<std::string> data;
    std::vector<std::string> overrides;
    bool quiet = false;
};

RunConfig resolve(const Options& o) {
    RunConfig c;
    if (!o.config_file.empty()) apply_config_file(c, o.config_file);
    for (const std::string& kv : o.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        c.set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
    }
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.format) c.set("format", *o.format);
    if (o.period) c.period = *o.period;
    if (o.horizon) c.horizon = *o.horizon;
    if (o.threads) c.threads = *o.threads;
    if (o.data) c.data = *o.data;
    if (c.threads == 0) throw std::invalid_argument("--threads must be at least 1");
    return c;
}

fs::path stage_dir(const RunConfig& c, const std::string& stage) { return fs::path(c.out) / stage; }

fs::path require(const RunConfig& c, const std::string& stage, const std::string& file) {
    const fs::path p = stage_dir(c, stage) / file;
    if (!fs::exists(p)) {
        throw std::runtime_error("missing " + p.string() + "; run `frans " + stage + "` with the same --out first");
    }
    return p;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return in;
}

class StageWriter {
public:
    StageWriter(const RunConfig& config, std::string stage) : config_(config), manifest_(stage), dir_(stage_dir(config, stage)) {
        fs::create_directories(dir_);
    }

    template <typename F>
    void file(const std::string& name, F&& write) {
        const fs::path p = dir_ / name;
        {
            std::ofstream out(p, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + p.string());
            write(out);
            if (!out) throw std::runtime_error("write failed for " + p.string());
        }
        manifest_.artifact(name, p);
    }

    Manifest& manifest() { return manifest_; }

    void finish() {
        std::ofstream out(dir_ / "run_manifest.txt", std::ios::binary);
        manifest_.write(out, config_);
    }

private:
    const RunConfig& config_;
    Manifest manifest_;
    fs::path dir_;
};

Dataset load_data(const RunConfig& c) {
    if (c.data.empty()) throw std::invalid_argument("no dataset given; pass --data or set data in the config file");
    if (c.horizon == 0) throw std::invalid_argument("horizon must be set (--horizon)");
    return ingest(c.data, input_format_from_string(c.format), c.period, c.horizon);
}

void record_windows(Manifest& m, const WindowParams& w) {
    m.record("window_length", w.length);
    m.record("stride", w.stride);
    m.record("max_per_series", w.max_per_series);
}

std::function<void(const std::string&)> logger(bool quiet) {
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

void cmd_synth(const RunConfig& c, std::size_t n_series, std::size_t length, double noise) {
    SyntheticSpec spec;
    spec.n_series = n_series;
    spec.length = length;
    spec.period = c.period > 1 ? c.period : spec.period;
    spec.horizon = c.horizon ? c.horizon : spec.horizon;
    spec.noise = noise;
    spec.seed = c.seed;
    const Dataset d = make_synthetic_dataset(spec);
    StageWriter w(c, "synth");
    w.file("synthetic.csv", [&](std::ostream& o) { write_long_csv(o, d); });
    w.manifest().record("series", d.series.size());
    w.manifest().record("length", length);
    w.manifest().record("noise", format_number(noise));
    w.finish();
}

void cmd_ingest_check(const RunConfig& c) {
    const Dataset d = load_data(c);
    const SplitDataset s = split(d);
    PipelineConfig p = c.pipeline();
    const WindowParams win = resolve_windows(p, s.train);
    std::size_t min_len = SIZE_MAX, max_len = 0;
    for (const auto& ts : d.series) {
        min_len = std::min(min_len, ts.values.size());
        max_len = std::max(max_len, ts.values.size());
    }
    StageWriter w(c, "ingest-check");
    w.file("dataset.csv", [&](std::ostream& o) { write_long_csv(o, d); });
    w.manifest().record("input_checksum", "fnv1a64:" + file_checksum(c.data));
    w.manifest().record("series", d.series.size());
    w.manifest().record("min_length", min_len);
    w.manifest().record("max_length", max_len);
    record_windows(w.manifest(), win);
    w.finish();
    std::cout << "ok: " << d.series.size() << " series, lengths " << min_len << ".." << max_len << ", window length "
              << win.length << '\n';
}

std::vector<std::size_t> labels_for(const RunConfig& c, const std::vector<TrainSeries>& train, std::size_t* classes) {
    if (c.label_map.empty()) {
        *classes = train.size();
        return {};
    }
    return load_label_map(c.label_map, train, classes);
}

void cmd_train_extractor(const RunConfig& c, bool quiet) {
    const Dataset d = load_data(c);
    const SplitDataset s = split(d);
    const PipelineConfig p = c.pipeline();
    const WindowParams win = resolve_windows(p, s.train);
    std::size_t classes = 0;
    const std::vector<std::size_t> labels = labels_for(c, s.train, &classes);
    const std::vector<Window> windows =
        make_windows(s.train, win, mix_seed(c.seed, "phase2/windows", 0), labels.empty() ? nullptr : &labels);
    NetworkConfig net = p.network;
    net.n_classes = classes;
    net.window_length = win.length;
    TrainOptions opts;
    opts.epochs = p.epochs;
    opts.batch_size = p.batch_size;
    opts.adam.learning_rate = p.learning_rate;
    opts.patience = p.patience;
    opts.seed = mix_seed(c.seed, "phase2/train", 0);
    if (!quiet) {
        opts.on_epoch = [](const EpochLog& e) {
            std::cerr << "epoch " << e.epoch << " loss " << e.loss << " accuracy " << e.accuracy << '\n';
        };
    }
    const TrainedExtractor ex = train_extractor(windows, net, opts);
    StageWriter w(c, "train-extractor");
    w.file("extractor.txt", [&](std::ostream& o) { save_extractor(o, ex); });
    w.file("training_log.csv", [&](std::ostream& o) {
        o << "epoch,loss,accuracy\n";
        for (const EpochLog& e : ex.report().history) {
            o << e.epoch << ',' << format_number(e.loss) << ',' << format_number(e.accuracy) << '\n';
        }
    });
    record_windows(w.manifest(), win);
    w.manifest().record("classes", classes);
    w.manifest().record("windows", windows.size());
    w.manifest().record("epochs_run", ex.report().epochs_run);
    w.manifest().record("final_loss", format_number(ex.report().final_loss));
    w.manifest().record("train_accuracy", format_number(ex.report().accuracy));
    w.finish();
}

void cmd_extract(const RunConfig& c) {
    const fs::path ex_path = require(c, "train-extractor", "extractor.txt");
    auto in = open_in(ex_path);
    const TrainedExtractor ex = load_extractor(in);
    const Dataset d = load_data(c);
    const SplitDataset s = split(d);
    WindowParams win = resolve_windows(c.pipeline(), s.train);
    if (win.length != ex.config().window_length) {
        if (!c.transfer) {
            throw std::invalid_argument("window length " + std::to_string(win.length) + " differs from the extractor's " +
                                        std::to_string(ex.config().window_length));
        }
        win.length = ex.config().window_length;
        win.stride = c.stride ? c.stride : default_stride(win.length);
    }
    const bool transfer = c.transfer || !c.label_map.empty();
    if (!transfer && s.train.size() != ex.config().n_classes) {
        throw std::invalid_argument("extractor was trained on " + std::to_string(ex.config().n_classes) + " classes but " +
                                    std::to_string(s.train.size()) + " series were given; set transfer = true");
    }
    const Aggregation method = aggregation_from_string(c.aggregation);
    const std::vector<Window> windows = make_windows(s.train, win, mix_seed(c.seed, "phase2/extract", 0));
    std::vector<std::string> ids;
    for (const auto& t : s.train) ids.push_back(t.id);
    const std::vector<FeatureVector> per_window = extract_window_features(ex, windows, ids);
    FeatureMatrix features;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < s.train.size(); ++i) {
        std::size_t end = begin;
        while (end < windows.size() && windows[end].series_index == i) ++end;
        features.ids.push_back(ids[i]);
        features.rows.push_back(aggregate(std::span(per_window).subspan(begin, end - begin), method).values);
        begin = end;
    }

    StageWriter w(c, "extract");
    w.file("features.csv", [&](std::ostream& o) { write_feature_csv(o, features); });
    w.file("window_features.csv", [&](std::ostream& o) { write_window_feature_csv(o, per_window); });
    record_windows(w.manifest(), win);
    w.manifest().record("aggregation", c.aggregation);
    w.manifest().record("transfer", transfer ? "true" : "false");
    w.manifest().record("windows", per_window.size());
    w.finish();
}

void cmd_base_forecast(const RunConfig& c) {
    const Dataset d = load_data(c);
    const SplitDataset s = split(d);
    std::vector<ForecastSet> sets;
    std::vector<FallbackEvent> fallbacks;
    for (const TrainSeries& t : s.train) {
        sets.push_back(forecast_pool(t.id, t.values, t.period, d.horizon, c.pool));
        const ForecastSet& set = sets.back();
        for (std::size_t i = 0; i < set.models.size(); ++i) {
            if (set.forecasts[i].fallback) fallbacks.push_back({"test", t.id, set.models[i], set.forecasts[i].note});
        }
    }
    StageWriter w(c, "base-forecast");
    w.file("forecasts.csv", [&](std::ostream& o) { write_forecast_csv(o, sets); });
    w.file("fallbacks.csv", [&](std::ostream& o) { write_fallback_csv(o, fallbacks); });
    w.manifest().record("series", sets.size());
    w.manifest().record("fallbacks", fallbacks.size());
    w.finish();
}

void cmd_train_meta(const RunConfig& c, bool quiet) {
    const Dataset d = load_data(c);
    PipelineConfig p = c.pipeline();
    p.log = logger(quiet);
    const MetaSet meta = build_meta_training(d, p);
    const GbdtModel model = fit_gbdt(meta.instances, p.gbdt, c.seed);
    StageWriter w(c, "train-meta");
    w.file("meta_instances.csv", [&](std::ostream& o) { write_meta_instances_csv(o, meta); });
    w.file("meta_model.txt", [&](std::ostream& o) { save_gbdt(o, model, meta.models); });
    w.file("fallbacks.csv", [&](std::ostream& o) { write_fallback_csv(o, meta.fallbacks); });
    w.file("meta_loss.csv", [&](std::ostream& o) {
        o << "round,loss\n";
        for (std::size_t r = 0; r < model.training_loss.size(); ++r) {
            o << (r + 1) << ',' << format_number(model.training_loss[r]) << '\n';
        }
    });
    record_windows(w.manifest(), meta.windows);
    w.manifest().record("instances", meta.instances.size());
    w.manifest().record("excluded", meta.excluded.size());
    w.manifest().record("extractor_accuracy", format_number(meta.extractor_report.accuracy));
    w.finish();
}

void cmd_forecast(const RunConfig& c) {
    auto model_in = open_in(require(c, "train-meta", "meta_model.txt"));
    std::vector<std::string> model_names;
    const GbdtModel model = load_gbdt(model_in, &model_names);
    auto feat_in = open_in(require(c, "extract", "features.csv"));
    const FeatureMatrix features = read_feature_csv(feat_in);
    auto fc_in = open_in(require(c, "base-forecast", "forecasts.csv"));
    const std::vector<ForecastSet> sets = read_forecast_csv(fc_in);

    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < features.ids.size(); ++i) row_of[features.ids[i]] = i;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> combined;
    for (const ForecastSet& set : sets) {
        const auto it = row_of.find(set.series_id);
        if (it == row_of.end()) throw std::runtime_error("series '" + set.series_id + "' has no extracted features");
        if (set.models != model_names) {
            throw std::runtime_error("base forecasts for '" + set.series_id + "' do not match the meta-learner's model pool");
        }
        const std::vector<double> wts = predict_weights(model, features.rows[it->second]);
        std::vector<std::vector<double>> per_model;
        for (const Forecast& f : set.forecasts) per_model.push_back(f.values);
        ids.push_back(set.series_id);
        combined.push_back(combine(wts, per_model));
        weights.push_back(wts);
    }
    StageWriter w(c, "forecast");
    w.file("weights.csv", [&](std::ostream& o) { write_weights_csv(o, ids, model_names, weights); });
    w.file("combined_forecast.csv", [&](std::ostream& o) {
        o << "series_id,k,forecast\n";
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t k = 0; k < combined[i].size(); ++k) {
                o << ids[i] << ',' << (k + 1) << ',' << format_number(combined[i][k]) << '\n';
            }
        }
    });
    w.manifest().record("series", ids.size());
    w.finish();
}

void cmd_evaluate(const RunConfig& c, bool quiet) {
    const Dataset d = load_data(c);
    PipelineConfig p = c.pipeline();
    p.log = logger(quiet);
    const MetricReport r = run_pipeline(d, p);
    StageWriter w(c, "evaluate");
    w.file("per_series.csv", [&](std::ostream& o) { write_per_series_csv(o, r); });
    w.file("summary.csv", [&](std::ostream& o) { write_summary_csv(o, r); });
    w.file("fallbacks.csv", [&](std::ostream& o) { write_fallback_csv(o, r.fallbacks); });
    std::vector<std::string> pool(r.methods.begin(), r.methods.end() - 1);
    w.file("weights.csv", [&](std::ostream& o) { write_weights_csv(o, r.series_ids, pool, r.weights); });
    w.manifest().record("series", r.series_ids.size());
    w.manifest().record("meta_window_length", r.meta_windows.length);
    w.manifest().record("meta_stride", r.meta_windows.stride);
    record_windows(w.manifest(), r.windows);
    w.manifest().record("meta_instances", r.meta_instances);
    w.manifest().record("excluded_from_meta", r.excluded_from_meta.size());
    w.manifest().record("both_zero_smape_terms", r.both_zero_terms);
    w.finish();
    for (std::size_t m = 0; m < r.methods.size(); ++m) {
        std::cout << r.methods[m] << ' ' << format_number(r.mean_smape[m]) << '\n';
    }
}

void cmd_analyze(const RunConfig& c) {
    auto feat_in = open_in(require(c, "extract", "features.csv"));
    const FeatureMatrix features = read_feature_csv(feat_in);
    auto win_in = open_in(require(c, "extract", "window_features.csv"));
    const std::vector<FeatureVector> per_window = read_window_feature_csv(win_in);

    const std::vector<StabilityRecord> stab = stability(per_window);
    const std::vector<HistogramBin> hist = stability_histogram(stab, c.histogram_bins);
    const std::size_t n = features.rows.size();
    StageWriter w(c, "analyze");
    w.file("stability.csv", [&](std::ostream& o) { write_stability_csv(o, stab); });
    w.file("stability_histogram.csv", [&](std::ostream& o) { write_histogram_csv(o, hist); });
    if (n >= 3) {
        const std::size_t k_max = std::min(c.k_max, n - 1);
        const std::size_t k_min = std::min(c.k_min, k_max);
        const std::vector<ElbowRow> elbow = elbow_sweep(features.rows, k_min, k_max, c.restarts, c.seed);
        std::size_t best_k = elbow.front().k;
        double best_s = elbow.front().silhouette;
        for (const ElbowRow& r : elbow) {
            if (r.silhouette > best_s) {
                best_s = r.silhouette;
                best_k = r.k;
            }
        }
        const ClusterReport clusters = kmeans_pp(features.rows, best_k, c.restarts, c.seed);
        const Projection proj = pca_2d(features.rows);
        w.file("elbow.csv", [&](std::ostream& o) { write_elbow_csv(o, elbow); });
        w.file("clusters.csv", [&](std::ostream& o) { write_assignments_csv(o, features.ids, clusters); });
        w.file("cluster_profile.csv", [&](std::ostream& o) { write_cluster_profile_csv(o, clusters); });
        w.file("projection.csv", [&](std::ostream& o) { write_projection_csv(o, features.ids, proj); });
        w.manifest().record("profile_k", best_k);
        w.manifest().record("projection_rank_deficient", proj.rank_deficient ? "true" : "false");
    }
    if (n >= 2) {
        const Extremes ext = similarity_extremes(features.rows, features.ids);
        w.file("extremes.csv", [&](std::ostream& o) { write_extremes_csv(o, features.ids, ext); });
    }
    w.manifest().record("series", n);
    w.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frans: learned time-series features for forecast model averaging"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--format", o.format, "input format: long-csv, one-row-per-series or tsf");
    app.add_option("--m", o.period, "seasonal period");
    app.add_option("--horizon", o.horizon, "forecast horizon");
    app.add_option("--threads", o.threads, "thread cap (default 1)");
    app.add_option("--data", o.data, "dataset path");
    app.add_option("--set", o.overrides, "override any config key, key=value (repeatable)");
    app.add_flag("--quiet", o.quiet, "suppress progress on stderr");

    std::size_t synth_series = 20, synth_length = 240;
    double synth_noise = 0.05;
    auto* synth = app.add_subcommand("synth", "write the bundled-style synthetic dataset");
    synth->add_option("--series", synth_series, "number of series");
    synth->add_option("--length", synth_length, "points per series");
    synth->add_option("--noise", synth_noise, "noise level relative to amplitude");
    const std::vector<std::pair<std::string, std::string>> stages = {
        {"ingest-check", "parse and validate a dataset"},
        {"train-extractor", "train the window classifier on the training region"},
        {"extract", "static and per-window features from a trained extractor"},
        {"base-forecast", "run the base forecaster pool"},
        {"train-meta", "build the validation meta-set and fit the meta-learner"},
        {"forecast", "combine base forecasts with meta-learner weights"},
        {"evaluate", "full two-phase pipeline with sMAPE report"},
        {"analyze", "feature stability, clustering, projection and extremes"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : stages) subs[name] = app.add_subcommand(name, help);

    CLI11_PARSE(app, argc, argv);

    std::string stage = "config";
    try {
        const RunConfig config = resolve(o);
        Eigen::setNbThreads(static_cast<int>(config.threads));
        if (synth->parsed()) {
            stage = "synth";
            cmd_synth(config, synth_series, synth_length, synth_noise);
            return 0;
        }
        for (const auto& [name, sub] : subs) {
            if (!sub->parsed()) continue;
            stage = name;
            if (name == "ingest-check") cmd_ingest_check(config);
            if (name == "train-extractor") cmd_train_extractor(config, o.quiet);
            if (name == "extract") cmd_extract(config);
            if (name == "base-forecast") cmd_base_forecast(config);
            if (name == "train-meta") cmd_train_meta(config, o.quiet);
            if (name == "forecast") cmd_forecast(config);
            if (name == "evaluate") cmd_evaluate(config, o.quiet);
            if (name == "analyze") cmd_analyze(config);
        }
    } catch (const std::exception& e) {
        std::cerr << "frans " << stage << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}
