#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "frans/forecasters.hpp"
#include "frans/rng.hpp"

using namespace frans;

namespace {

using Vec = std::vector<double>;

void check_close(const Vec& a, const Vec& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol * std::max(1.0, std::abs(b[i])));
}

Vec noisy_series(std::uint64_t seed, std::size_t n, double level = 50.0, double slope = 0.3, std::size_t m = 1,
                 double season_amp = 0.0) {
    Rng rng(seed);
    Vec y;
    for (std::size_t t = 0; t < n; ++t) {
        const double s = m > 1 ? season_amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t % m) / static_cast<double>(m)) : 0.0;
        y.push_back(level + slope * static_cast<double>(t) + s + rng.normal());
    }
    return y;
}

// Independent classical multiplicative decomposition.
Vec oracle_indices(const Vec& y, std::size_t m) {
    const std::size_t n = y.size();
    Vec ma(n, std::nan(""));
    for (std::size_t t = 0; t < n; ++t) {
        if (m % 2 == 1) {
            const std::size_t h = (m - 1) / 2;
            if (t < h || t + h >= n) continue;
            double s = 0;
            for (std::size_t j = t - h; j <= t + h; ++j) s += y[j];
            ma[t] = s / static_cast<double>(m);
        } else {
            const std::size_t h = m / 2;
            if (t < h || t + h >= n) continue;
            // 2 x m moving average = mean of two adjacent m-term averages
            double a = 0, b = 0;
            for (std::size_t j = t - h; j < t + h; ++j) a += y[j];
            for (std::size_t j = t - h + 1; j <= t + h; ++j) b += y[j];
            ma[t] = (a + b) / (2.0 * static_cast<double>(m));
        }
    }
    Vec sum(m, 0.0), cnt(m, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        if (std::isnan(ma[t])) continue;
        sum[t % m] += y[t] / ma[t];
        cnt[t % m] += 1.0;
    }
    Vec idx(m);
    double mean = 0;
    for (std::size_t p = 0; p < m; ++p) mean += (idx[p] = sum[p] / cnt[p]);
    mean /= static_cast<double>(m);
    for (double& v : idx) v /= mean;
    return idx;
}

}  // namespace

TEST_CASE("seasonal naive") {
    CHECK(seasonal_naive(Vec{1, 2, 3, 4}, 2, 4).values == Vec{3, 4, 3, 4});
    CHECK(seasonal_naive(Vec{1, 2, 3, 4}, 1, 3).values == Vec{4, 4, 4});
    CHECK(seasonal_naive(Vec{5, 7, 9}, 3, 2).values == Vec{5, 7});
    const Forecast f = seasonal_naive(Vec{1, 2}, 5, 3);
    CHECK(f.fallback);
    CHECK(f.values == Vec{2, 2, 2});
}

TEST_CASE("random walk with drift") {
    CHECK(rw_drift(Vec{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 3).values == Vec{11, 12, 13});
    CHECK(rw_drift(Vec{4, 4, 4, 4}, 2).values == Vec{4, 4});
    CHECK(rw_drift(Vec{0, 2}, 2).values == Vec{4, 6});
}

TEST_CASE("seasonality test matches the Bartlett-bound formula") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = 2 + rng.index(11);
        const Vec y = noisy_series(100 + trial, 3 * m + rng.index(40), 10.0, 0.0, m, trial % 2 ? 3.0 : 0.0);
        const std::size_t n = y.size();
        double mean = 0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(n);
        auto r = [&](std::size_t k) {
            double num = 0, den = 0;
            for (std::size_t t = 0; t < n; ++t) den += (y[t] - mean) * (y[t] - mean);
            for (std::size_t t = 0; t + k < n; ++t) num += (y[t] - mean) * (y[t + k] - mean);
            return num / den;
        };
        double s = 0;
        for (std::size_t k = 1; k < m; ++k) s += r(k) * r(k);
        const bool expect = std::abs(r(m)) > 1.645 * std::sqrt((1 + 2 * s) / static_cast<double>(n));
        CHECK(seasonality_test(y, m) == expect);
    }
    CHECK_FALSE(seasonality_test(noisy_series(1, 50), 1));
    CHECK_FALSE(seasonality_test(noisy_series(1, 20, 10, 0, 12, 5), 12));  // fewer than 3m points
}

TEST_CASE("seasonal indices match an independent decomposition") {
    for (std::size_t m : {4u, 7u, 12u}) {
        Vec y = noisy_series(9 + m, 10 * m, 40.0, 0.1, m, 6.0);
        check_close(seasonal_indices(y, m), oracle_indices(y, m), 1e-12);
    }
}

TEST_CASE("naive2") {
    SUBCASE("white noise equals plain naive") {
        Rng rng(4);
        Vec y;
        for (int t = 0; t < 60; ++t) y.push_back(100 + rng.normal());
        REQUIRE_FALSE(seasonality_test(y, 12));
        CHECK(naive2(y, 12, 6).values == naive(y, 6).values);
    }
    SUBCASE("m = 1 is plain naive") {
        const Vec y = noisy_series(5, 30);
        CHECK(naive2(y, 1, 4).values == Vec(4, y.back()));
    }
    SUBCASE("exact periodic pattern is reproduced") {
        const Vec pattern{10, 14, 9, 6, 12, 11};
        Vec y;
        for (int c = 0; c < 6; ++c) y.insert(y.end(), pattern.begin(), pattern.end());
        REQUIRE(seasonality_test(y, 6));
        const Forecast f = naive2(y, 6, 12);
        Vec expect;
        for (int c = 0; c < 2; ++c) expect.insert(expect.end(), pattern.begin(), pattern.end());
        check_close(f.values, expect, 1e-10);
        CHECK_FALSE(f.fallback);
    }
    SUBCASE("nonpositive seasonal data falls back to naive and is flagged") {
        Vec y;
        for (int t = 0; t < 48; ++t) y.push_back(5.0 * std::sin(2 * std::numbers::pi * t / 6.0));
        REQUIRE(seasonality_test(y, 6));
        const Forecast f = naive2(y, 6, 3);
        CHECK(f.fallback);
        CHECK(f.values == Vec(3, y.back()));
    }
}

TEST_CASE("theta") {
    SUBCASE("noiseless line: OLS slope recovered and drift equals half the slope") {
        Vec y;
        for (int t = 1; t <= 40; ++t) y.push_back(2.0 * t);
        const ThetaFit fit = fit_theta(y, 1);
        CHECK(std::abs(fit.slope - 2.0) < 1e-6);
        const Forecast f = theta(y, 1, 5);
        for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs((f.values[k] - f.values[k - 1]) - fit.slope / 2.0) < 1e-9);
        // oracle: SES level after the data plus the (k - 1 + 1/alpha) b/2 drift
        double level = y[0];
        for (std::size_t t = 1; t < y.size(); ++t) level += fit.alpha * (y[t] - level);
        for (std::size_t k = 1; k <= 5; ++k) {
            CHECK(f.values[k - 1] == doctest::Approx(level + (k - 1.0 + 1.0 / fit.alpha) * 1.0).epsilon(1e-12));
        }
    }
    SUBCASE("constant series give a constant forecast") {
        const Forecast f = theta(Vec(20, 7.5), 4, 6);
        for (double v : f.values) CHECK(v == doctest::Approx(7.5).epsilon(1e-12));
    }
    SUBCASE("alpha is the exhaustive grid minimizer") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const Vec y = noisy_series(seed, 50, 30.0, 0.1 * static_cast<double>(seed));
            double best_sse = std::numeric_limits<double>::infinity(), best_alpha = 0;
            for (int i = 1; i <= 99; ++i) {
                const double a = i / 100.0;
                double level = y[0], sse = 0;
                for (std::size_t t = 1; t < y.size(); ++t) {
                    sse += (y[t] - level) * (y[t] - level);
                    level += a * (y[t] - level);
                }
                if (sse < best_sse) {
                    best_sse = sse;
                    best_alpha = a;
                }
            }
            CHECK(fit_ses(y).alpha == best_alpha);
            CHECK(fit_theta(y, 1).alpha == best_alpha);
        }
    }
}

TEST_CASE("ets") {
    SUBCASE("constant series selects SES") {
        const EtsFit fit = fit_ets(Vec(30, 12.0), 1);
        CHECK(fit.chosen.model == EtsModel::ses);
        for (double v : ets(Vec(30, 12.0), 1, 5).values) CHECK(v == doctest::Approx(12.0).epsilon(1e-12));
    }
    SUBCASE("noiseless trend selects Holt and extrapolates the slope") {
        Vec y;
        for (int t = 0; t < 40; ++t) y.push_back(5.0 + 1.5 * t);
        const EtsFit fit = fit_ets(y, 1);
        CHECK(fit.chosen.model == EtsModel::holt);
        const Forecast f = ets(y, 1, 6);
        for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(f.values[k] - (5.0 + 1.5 * (40 + k))) < 1e-3);
    }
    SUBCASE("seasonal plus trend: Holt-Winters beats SES in-sample") {
        const Vec pattern{3, -1, 2, -4};
        Vec y;
        for (int t = 0; t < 40; ++t) y.push_back(20.0 + 0.5 * t + pattern[t % 4]);
        const EtsFit fit = fit_ets(y, 4);
        const EtsCandidate* ses = nullptr;
        const EtsCandidate* hw = nullptr;
        for (const auto& c : fit.candidates) {
            if (c.model == EtsModel::ses) ses = &c;
            if (c.model == EtsModel::holt_winters) hw = &c;
        }
        REQUIRE(ses);
        REQUIRE(hw);
        CHECK(hw->sse < ses->sse);
        CHECK(fit.chosen.model == EtsModel::holt_winters);
    }
    SUBCASE("short series skip the seasonal candidate") {
        const EtsFit fit = fit_ets(noisy_series(2, 9), 4);
        for (const auto& c : fit.candidates) CHECK(c.model != EtsModel::holt_winters);
    }
    SUBCASE("too short to fit falls back to flagged naive") {
        const Forecast f = ets(Vec{1, 2}, 1, 3);
        CHECK(f.fallback);
        CHECK(f.values == Vec{2, 2, 2});
    }
}

TEST_CASE("scale equivariance of every pool member") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Vec y = noisy_series(seed, 48, 60.0, 0.2, 12, 8.0);
        Vec scaled;
        for (double v : y) scaled.push_back(3.7 * v);
        for (const std::string& model : default_pool()) {
            const Forecast a = run_model(model, y, 12, 12);
            const Forecast b = run_model(model, scaled, 12, 12);
            for (std::size_t k = 0; k < 12; ++k) {
                CHECK_MESSAGE(std::abs(b.values[k] - 3.7 * a.values[k]) <= 1e-9 * std::abs(b.values[k]), model);
            }
        }
    }
}

TEST_CASE("shift equivariance of the additive models") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Vec y = noisy_series(seed, 40, 10.0, 0.4);
        Vec shifted;
        for (double v : y) shifted.push_back(v + 250.0);
        auto shift_ok = [&](const Vec& a, const Vec& b) {
            for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(b[k] - (a[k] + 250.0)) < 1e-9 * 260.0);
        };
        shift_ok(rw_drift(y, 6).values, rw_drift(shifted, 6).values);
        shift_ok(seasonal_naive(y, 4, 6).values, seasonal_naive(shifted, 4, 6).values);
        shift_ok(ets(y, 1, 6).values, ets(shifted, 1, 6).values);
    }
}

TEST_CASE("pool output shape and finiteness") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.index(80);
        const std::size_t m = 1 + rng.index(12);
        const std::size_t h = 1 + rng.index(20);
        Vec y;
        for (std::size_t t = 0; t < n; ++t) y.push_back(trial % 3 == 0 ? rng.normal() : 5 + rng.uniform());
        const ForecastSet set = forecast_pool("x", y, m, h, default_pool());
        REQUIRE(set.forecasts.size() == 5);
        for (const Forecast& f : set.forecasts) {
            CHECK(f.values.size() == h);
            for (double v : f.values) CHECK(std::isfinite(v));
            if (f.fallback) CHECK_FALSE(f.note.empty());
        }
    }
    CHECK_THROWS_AS(run_model("arima", Vec{1, 2, 3}, 1, 2), std::invalid_argument);
}

TEST_CASE("forecast CSV round-trip") {
    std::vector<ForecastSet> sets{forecast_pool("a", noisy_series(1, 30), 4, 3, default_pool()),
                                  forecast_pool("b", noisy_series(2, 30), 4, 3, default_pool())};
    std::ostringstream os;
    write_forecast_csv(os, sets);
    CHECK(os.str().rfind("series_id,model,k,forecast\n", 0) == 0);
    std::istringstream is(os.str());
    const auto back = read_forecast_csv(is);
    REQUIRE(back.size() == 2);
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(back[s].series_id == sets[s].series_id);
        CHECK(back[s].models == sets[s].models);
        for (std::size_t m = 0; m < 5; ++m) CHECK(back[s].forecasts[m].values == sets[s].forecasts[m].values);
    }
}
