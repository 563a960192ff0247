#include "frans/forecasters.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "frans/csv_io.hpp"

namespace frans {

namespace {

constexpr double kSeasonalityCritical = 1.645;

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Forecast flagged_naive(std::span<const double> train, std::size_t h, std::string note) {
    Forecast f = naive(train, h);
    f.fallback = true;
    f.note = std::move(note);
    return f;
}

double ols_slope(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double t_mean = (n + 1.0) / 2.0;
    double y_mean = 0.0;
    for (double v : x) y_mean += v;
    y_mean /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dt = static_cast<double>(i + 1) - t_mean;
        num += dt * (x[i] - y_mean);
        den += dt * dt;
    }
    return den > 0.0 ? num / den : 0.0;
}

bool any_nonpositive(std::span<const double> x) {
    return std::any_of(x.begin(), x.end(), [](double v) { return v <= 0.0; });
}

// Seasonal adjustment shared by naive2 and theta.
struct Adjusted {
    std::vector<double> values;
    std::vector<double> indices;  // empty when not seasonal
    bool skipped_nonpositive = false;
};

Adjusted seasonally_adjust(std::span<const double> train, std::size_t m) {
    Adjusted a;
    a.values.assign(train.begin(), train.end());
    if (!seasonality_test(train, m)) return a;
    if (any_nonpositive(train)) {
        a.skipped_nonpositive = true;
        return a;
    }
    a.indices = seasonal_indices(train, m);
    for (std::size_t t = 0; t < a.values.size(); ++t) a.values[t] /= a.indices[t % m];
    return a;
}

void reseasonalize(std::vector<double>& forecast, const Adjusted& adj, std::size_t n) {
    if (adj.indices.empty()) return;
    const std::size_t m = adj.indices.size();
    for (std::size_t k = 1; k <= forecast.size(); ++k) forecast[k - 1] *= adj.indices[(n - 1 + k) % m];
}

const std::vector<double>& smoothing_grid() {
    static const std::vector<double> g = [] {
        std::vector<double> v;
        for (int i = 1; i <= 19; ++i) v.push_back(i / 20.0);
        return v;
    }();
    return g;
}

const std::vector<double>& damping_grid() {
    static const std::vector<double> g = [] {
        std::vector<double> v;
        for (int i = 0; i < 10; ++i) v.push_back((80 + 2 * i) / 100.0);
        return v;
    }();
    return g;
}

// States after the last observation plus the SSE over t >= start (0-based).
struct EtsRun {
    double sse = 0.0;
    double level = 0.0;
    double trend = 0.0;
    std::vector<double> season;  // last m seasonal states, season[j] applies to position (n + j) relative
};

EtsRun run_trend(std::span<const double> y, double alpha, double beta, double phi, bool has_trend, std::size_t start) {
    EtsRun r;
    double level = y[0];
    double trend = has_trend ? y[1] - y[0] : 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) {
        const double pred = level + phi * trend;
        const double err = y[t] - pred;
        if (t >= start) r.sse += err * err;
        const double new_level = pred + alpha * err;
        if (has_trend) trend = beta * (new_level - level) + (1.0 - beta) * phi * trend;
        level = new_level;
    }
    r.level = level;
    r.trend = trend;
    return r;
}

EtsRun run_holt_winters(std::span<const double> y, std::size_t m, double alpha, double beta, double gamma,
                        std::size_t start) {
    EtsRun r;
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        first += y[i];
        second += y[m + i];
    }
    first /= static_cast<double>(m);
    second /= static_cast<double>(m);
    double trend = (second - first) / static_cast<double>(m);
    double level = first + trend * (static_cast<double>(m) - 1.0) / 2.0;
    std::vector<double> season(y.size() + m, 0.0);  // season[t] is the state for time t
    for (std::size_t i = 0; i < m; ++i) {
        season[i] = y[i] - (level - static_cast<double>(m - 1 - i) * trend);
    }
    for (std::size_t t = m; t < y.size(); ++t) {
        const double s_prev = season[t - m];
        const double pred = level + trend + s_prev;
        const double err = y[t] - pred;
        if (t >= start) r.sse += err * err;
        const double new_level = alpha * (y[t] - s_prev) + (1.0 - alpha) * (level + trend);
        season[t] = gamma * (y[t] - level - trend) + (1.0 - gamma) * s_prev;
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        level = new_level;
    }
    r.level = level;
    r.trend = trend;
    r.season.assign(season.begin() + static_cast<std::ptrdiff_t>(y.size() - m),
                    season.begin() + static_cast<std::ptrdiff_t>(y.size()));
    return r;
}

double aicc(double sse, double floor, std::size_t n, std::size_t k) {
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    return nn * std::log(std::max(sse, floor) / nn) + 2.0 * kk + 2.0 * kk * (kk + 1.0) / (nn - kk - 1.0);
}

}  // namespace

Forecast naive(std::span<const double> train, std::size_t h) {
    if (train.empty()) throw std::invalid_argument("naive: empty training series");
    return Forecast{std::vector<double>(h, train.back()), false, {}};
}

Forecast seasonal_naive(std::span<const double> train, std::size_t m, std::size_t h) {
    if (train.empty()) throw std::invalid_argument("seasonal_naive: empty training series");
    if (m == 0 || m > train.size()) return flagged_naive(train, h, "seasonal period exceeds series length");
    const std::size_t n = train.size();
    Forecast f;
    for (std::size_t k = 1; k <= h; ++k) {
        const std::size_t seasons = (k + m - 1) / m;
        f.values.push_back(train[n + k - m * seasons - 1]);
    }
    return f;
}

Forecast rw_drift(std::span<const double> train, std::size_t h) {
    if (train.empty()) throw std::invalid_argument("rw_drift: empty training series");
    if (train.size() < 2) return flagged_naive(train, h, "rw_drift needs 2 observations");
    const double drift = (train.back() - train.front()) / static_cast<double>(train.size() - 1);
    Forecast f;
    for (std::size_t k = 1; k <= h; ++k) f.values.push_back(train.back() + static_cast<double>(k) * drift);
    return f;
}

std::vector<double> acf(std::span<const double> x, std::size_t max_lag) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : x) denom += (v - mean) * (v - mean);
    std::vector<double> r(max_lag, 0.0);
    if (denom <= 0.0) return r;
    for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
        double num = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) num += (x[t] - mean) * (x[t + k] - mean);
        r[k - 1] = num / denom;
    }
    return r;
}

bool seasonality_test(std::span<const double> train, std::size_t m) {
    if (m <= 1 || train.size() < 3 * m) return false;
    const std::vector<double> r = acf(train, m);
    double sum_sq = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) sum_sq += r[k] * r[k];
    const double limit = kSeasonalityCritical * std::sqrt((1.0 + 2.0 * sum_sq) / static_cast<double>(train.size()));
    return std::abs(r[m - 1]) > limit;
}

std::vector<double> seasonal_indices(std::span<const double> train, std::size_t m) {
    const std::size_t n = train.size();
    if (m < 2 || n < 2 * m) throw std::invalid_argument("seasonal_indices: need at least two full seasons");
    const std::size_t half = m / 2;
    std::vector<double> sum(m, 0.0);
    std::vector<std::size_t> count(m, 0);
    for (std::size_t t = half; t + half < n; ++t) {
        double trend = 0.0;
        if (m % 2 == 1) {
            for (std::size_t j = t - half; j <= t + half; ++j) trend += train[j];
            trend /= static_cast<double>(m);
        } else {
            trend = 0.5 * train[t - half] + 0.5 * train[t + half];
            for (std::size_t j = t - half + 1; j < t + half; ++j) trend += train[j];
            trend /= static_cast<double>(m);
        }
        sum[t % m] += train[t] / trend;
        ++count[t % m];
    }
    std::vector<double> idx(m);
    double total = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
        idx[p] = sum[p] / static_cast<double>(count[p]);
        total += idx[p];
    }
    const double mean = total / static_cast<double>(m);
    for (double& v : idx) v /= mean;
    return idx;
}

Forecast naive2(std::span<const double> train, std::size_t m, std::size_t h) {
    if (train.empty()) throw std::invalid_argument("naive2: empty training series");
    if (train.size() < 3) return flagged_naive(train, h, "naive2 needs 3 observations");
    const Adjusted adj = seasonally_adjust(train, m);
    if (adj.skipped_nonpositive) return flagged_naive(train, h, "nonpositive values: multiplicative decomposition skipped");
    Forecast f;
    f.values.assign(h, adj.values.back());
    reseasonalize(f.values, adj, train.size());
    return f;
}

double ses_sse(std::span<const double> x, double alpha, double* final_level) {
    double level = x[0];
    double sse = 0.0;
    for (std::size_t t = 1; t < x.size(); ++t) {
        const double err = x[t] - level;
        sse += err * err;
        level += alpha * err;
    }
    if (final_level) *final_level = level;
    return sse;
}

SesFit fit_ses(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("fit_ses: empty series");
    SesFit best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 99; ++i) {
        const double alpha = i / 100.0;
        double level = 0.0;
        const double sse = ses_sse(x, alpha, &level);
        if (sse < best.sse) best = SesFit{alpha, level, sse};
    }
    return best;
}

ThetaFit fit_theta(std::span<const double> train, std::size_t m) {
    const Adjusted adj = seasonally_adjust(train, m);
    ThetaFit fit;
    fit.seasonal = !adj.indices.empty();
    const SesFit ses = fit_ses(adj.values);
    fit.alpha = ses.alpha;
    fit.level = ses.level;
    fit.slope = ols_slope(adj.values);
    return fit;
}

Forecast theta(std::span<const double> train, std::size_t m, std::size_t h) {
    if (train.empty()) throw std::invalid_argument("theta: empty training series");
    if (train.size() < 4) return flagged_naive(train, h, "theta needs 4 observations");
    const Adjusted adj = seasonally_adjust(train, m);
    const SesFit ses = fit_ses(adj.values);
    const double slope = ols_slope(adj.values);
    Forecast f;
    for (std::size_t k = 1; k <= h; ++k) {
        f.values.push_back(ses.level + (static_cast<double>(k) - 1.0 + 1.0 / ses.alpha) * (slope / 2.0));
    }
    reseasonalize(f.values, adj, train.size());
    if (adj.skipped_nonpositive) {
        f.fallback = true;
        f.note = "nonpositive values: multiplicative decomposition skipped";
    }
    return f;
}

std::string to_string(EtsModel model) {
    switch (model) {
        case EtsModel::ses: return "ses";
        case EtsModel::holt: return "holt";
        case EtsModel::damped_holt: return "damped_holt";
        case EtsModel::holt_winters: return "holt_winters";
    }
    return "unknown";
}

EtsFit fit_ets(std::span<const double> y, std::size_t m) {
    const std::size_t n = y.size();
    EtsFit fit;
    if (n < 3) return fit;
    const bool seasonal = m > 1 && n >= 2 * m + 2;
    fit.error_start = seasonal ? m : 1;
    const std::size_t n_eff = n - fit.error_start;

    double scale = 0.0;
    for (double v : y) scale = std::max(scale, std::abs(v));
    // noiseless fits tie at this floor; the parameter penalty then prefers the simpler model
    const double floor = static_cast<double>(n_eff) * (1e-10 * scale) * (1e-10 * scale) + std::numeric_limits<double>::min();

    auto finish = [&](EtsCandidate c, std::size_t k) {
        if (!std::isfinite(c.sse) || n_eff <= k + 1) {
            c.valid = false;
            return c;
        }
        c.aicc = aicc(c.sse, floor, n_eff, k);
        c.valid = std::isfinite(c.aicc);
        return c;
    };

    const auto& g = smoothing_grid();
    {
        EtsCandidate best{EtsModel::ses};
        best.sse = std::numeric_limits<double>::infinity();
        for (double a : g) {
            const double sse = run_trend(y, a, 0.0, 1.0, false, fit.error_start).sse;
            if (sse < best.sse) {
                best.alpha = a;
                best.sse = sse;
            }
        }
        fit.candidates.push_back(finish(best, 2));
    }
    {
        EtsCandidate best{EtsModel::holt};
        best.sse = std::numeric_limits<double>::infinity();
        for (double a : g) {
            for (double b : g) {
                const double sse = run_trend(y, a, b, 1.0, true, fit.error_start).sse;
                if (sse < best.sse) {
                    best.alpha = a;
                    best.beta = b;
                    best.sse = sse;
                }
            }
        }
        fit.candidates.push_back(finish(best, 4));
    }
    {
        EtsCandidate best{EtsModel::damped_holt};
        best.sse = std::numeric_limits<double>::infinity();
        for (double a : g) {
            for (double b : g) {
                for (double phi : damping_grid()) {
                    const double sse = run_trend(y, a, b, phi, true, fit.error_start).sse;
                    if (sse < best.sse) {
                        best.alpha = a;
                        best.beta = b;
                        best.phi = phi;
                        best.sse = sse;
                    }
                }
            }
        }
        fit.candidates.push_back(finish(best, 5));
    }
    if (seasonal) {
        EtsCandidate best{EtsModel::holt_winters};
        best.sse = std::numeric_limits<double>::infinity();
        for (double a : g) {
            for (double b : g) {
                for (double gm : g) {
                    const double sse = run_holt_winters(y, m, a, b, gm, fit.error_start).sse;
                    if (sse < best.sse) {
                        best.alpha = a;
                        best.beta = b;
                        best.gamma = gm;
                        best.sse = sse;
                    }
                }
            }
        }
        fit.candidates.push_back(finish(best, 6));
    }
    for (const EtsCandidate& c : fit.candidates) {
        if (c.valid && (!fit.chosen.valid || c.aicc < fit.chosen.aicc)) fit.chosen = c;
    }
    return fit;
}

Forecast ets(std::span<const double> train, std::size_t m, std::size_t h) {
    if (train.empty()) throw std::invalid_argument("ets: empty training series");
    const EtsFit fit = fit_ets(train, m);
    if (!fit.chosen.valid) return flagged_naive(train, h, "no ETS candidate could be fitted");
    const EtsCandidate& c = fit.chosen;
    Forecast f;
    switch (c.model) {
        case EtsModel::ses:
        case EtsModel::holt:
        case EtsModel::damped_holt: {
            const bool trend = c.model != EtsModel::ses;
            const EtsRun r = run_trend(train, c.alpha, c.beta, c.phi, trend, fit.error_start);
            double damp_sum = 0.0, phi_pow = 1.0;
            for (std::size_t k = 1; k <= h; ++k) {
                phi_pow *= c.phi;
                damp_sum += phi_pow;
                f.values.push_back(r.level + (trend ? damp_sum * r.trend : 0.0));
            }
            break;
        }
        case EtsModel::holt_winters: {
            const EtsRun r = run_holt_winters(train, m, c.alpha, c.beta, c.gamma, fit.error_start);
            for (std::size_t k = 1; k <= h; ++k) {
                f.values.push_back(r.level + static_cast<double>(k) * r.trend + r.season[(k - 1) % m]);
            }
            break;
        }
    }
    return f;
}

const std::vector<std::string>& default_pool() {
    static const std::vector<std::string> pool{"naive2", "seasonal_naive", "rw_drift", "theta", "ets"};
    return pool;
}

Forecast run_model(const std::string& name, std::span<const double> train, std::size_t m, std::size_t h) {
    Forecast f;
    if (name == "naive2") {
        f = naive2(train, m, h);
    } else if (name == "seasonal_naive") {
        f = seasonal_naive(train, m, h);
    } else if (name == "rw_drift") {
        f = rw_drift(train, h);
    } else if (name == "theta") {
        f = theta(train, m, h);
    } else if (name == "ets") {
        f = ets(train, m, h);
    } else if (name == "naive") {
        f = naive(train, h);
    } else {
        throw std::invalid_argument("unknown base model '" + name + "'");
    }
    if (f.values.size() != h || !all_finite(f.values)) {
        return flagged_naive(train, h, name + " produced a non-finite forecast");
    }
    return f;
}

ForecastSet forecast_pool(const std::string& series_id, std::span<const double> train, std::size_t m, std::size_t h,
                          const std::vector<std::string>& pool) {
    ForecastSet set;
    set.series_id = series_id;
    set.horizon = h;
    for (const std::string& name : pool) {
        set.models.push_back(name);
        set.forecasts.push_back(run_model(name, train, m, h));
    }
    return set;
}

void write_forecast_csv(std::ostream& out, const std::vector<ForecastSet>& sets) {
    out << "series_id,model,k,forecast\n";
    for (const ForecastSet& s : sets) {
        for (std::size_t i = 0; i < s.models.size(); ++i) {
            for (std::size_t k = 0; k < s.forecasts[i].values.size(); ++k) {
                out << s.series_id << ',' << s.models[i] << ',' << (k + 1) << ','
                    << format_number(s.forecasts[i].values[k]) << '\n';
            }
        }
    }
}

std::vector<ForecastSet> read_forecast_csv(std::istream& in) {
    std::vector<ForecastSet> sets;
    std::map<std::string, std::size_t> set_index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() != 4 || trim(fields[0]) != "series_id") throw std::runtime_error("forecast CSV: missing header");
            continue;
        }
        if (fields.size() != 4) throw std::runtime_error("forecast CSV: line " + std::to_string(line_no) + " malformed");
        const std::string id(trim(fields[0]));
        const std::string model(trim(fields[1]));
        const std::size_t k = std::stoul(std::string(trim(fields[2])));
        const double v = std::stod(std::string(trim(fields[3])));
        auto [it, inserted] = set_index.try_emplace(id, sets.size());
        if (inserted) sets.push_back(ForecastSet{id, 0, {}, {}});
        ForecastSet& s = sets[it->second];
        auto pos = std::find(s.models.begin(), s.models.end(), model);
        if (pos == s.models.end()) {
            s.models.push_back(model);
            s.forecasts.emplace_back();
            pos = s.models.end() - 1;
        }
        Forecast& f = s.forecasts[static_cast<std::size_t>(pos - s.models.begin())];
        if (k != f.values.size() + 1) throw std::runtime_error("forecast CSV: line " + std::to_string(line_no) + " out of order");
        f.values.push_back(v);
        s.horizon = std::max(s.horizon, k);
    }
    return sets;
}

}  // namespace frans
