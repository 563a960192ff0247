#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace frans {

/// Point forecast of one base model. `fallback` marks a degraded path (plain naive or a
/// skipped decomposition); `note` says why.
struct Forecast {
    std::vector<double> values;
    bool fallback = false;
    std::string note;
};

Forecast naive(std::span<const double> train, std::size_t h);
Forecast seasonal_naive(std::span<const double> train, std::size_t m, std::size_t h);
Forecast rw_drift(std::span<const double> train, std::size_t h);
Forecast naive2(std::span<const double> train, std::size_t m, std::size_t h);
Forecast theta(std::span<const double> train, std::size_t m, std::size_t h);
Forecast ets(std::span<const double> train, std::size_t m, std::size_t h);

/// 90% ACF test at lag m against the Bartlett bound; false for m <= 1 or fewer than 3m points.
bool seasonality_test(std::span<const double> train, std::size_t m);

/// Sample autocorrelations r_1..r_max_lag.
std::vector<double> acf(std::span<const double> x, std::size_t max_lag);

/// Multiplicative classical decomposition indices by position t mod m, normalized to mean 1.
std::vector<double> seasonal_indices(std::span<const double> train, std::size_t m);

struct SesFit {
    double alpha = 0.0;
    double level = 0.0;  // level after the last observation
    double sse = 0.0;
};

/// SES with l_1 = y_1 and alpha on the grid 0.01..0.99; SSE of one-step errors from t = 2.
SesFit fit_ses(std::span<const double> x);
double ses_sse(std::span<const double> x, double alpha, double* final_level = nullptr);

struct ThetaFit {
    bool seasonal = false;
    double alpha = 0.0;
    double level = 0.0;
    double slope = 0.0;  // OLS slope of the (deseasonalized) series
};

ThetaFit fit_theta(std::span<const double> train, std::size_t m);

enum class EtsModel { ses, holt, damped_holt, holt_winters };
std::string to_string(EtsModel model);

struct EtsCandidate {
    EtsModel model = EtsModel::ses;
    double alpha = 0.0, beta = 0.0, phi = 1.0, gamma = 0.0;
    double sse = 0.0;
    double aicc = 0.0;
    bool valid = false;
};

struct EtsFit {
    EtsCandidate chosen;
    std::vector<EtsCandidate> candidates;  // best grid point per model family
    std::size_t error_start = 0;           // first 0-based index whose one-step error is scored
};

/// Grid-fit SES, Holt, damped Holt and (m > 1, n >= 2m+2) additive Holt-Winters on a common
/// error window; select by AICc with parameter counts 2, 4, 5, 6. Ties keep the simpler model.
EtsFit fit_ets(std::span<const double> train, std::size_t m);

const std::vector<std::string>& default_pool();

/// Runs a named pool member; any non-finite output is replaced by a flagged naive forecast.
Forecast run_model(const std::string& name, std::span<const double> train, std::size_t m, std::size_t h);

struct ForecastSet {
    std::string series_id;
    std::size_t horizon = 0;
    std::vector<std::string> models;
    std::vector<Forecast> forecasts;  // parallel to models
};

ForecastSet forecast_pool(const std::string& series_id, std::span<const double> train, std::size_t m, std::size_t h,
                          const std::vector<std::string>& pool);

void write_forecast_csv(std::ostream& out, const std::vector<ForecastSet>& sets);
std::vector<ForecastSet> read_forecast_csv(std::istream& in);

}  // namespace frans
