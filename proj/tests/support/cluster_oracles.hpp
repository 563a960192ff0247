#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "frans/analysis.hpp"
#include "frans/rng.hpp"

namespace frans::testing {

struct Blobs {
    Points points;
    std::vector<std::size_t> labels;
};

/// `per_blob` Gaussian points (sd `spread`) around `blobs` centres spaced `gap` apart on the diagonal.
inline Blobs make_blobs(std::size_t blobs, std::size_t per_blob, std::size_t dim, double gap, double spread,
                        std::uint64_t seed) {
    Rng rng(seed);
    Blobs out;
    for (std::size_t b = 0; b < blobs; ++b) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            std::vector<double> p(dim);
            for (std::size_t d = 0; d < dim; ++d) {
                const double centre = (d % blobs == b) ? gap : 0.0;
                p[d] = centre + spread * rng.normal();
            }
            out.points.push_back(std::move(p));
            out.labels.push_back(b);
        }
    }
    return out;
}

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

/// Hubert-Arabie adjusted Rand index from the contingency table.
inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, n] : table) index += choose2(n);
    for (const auto& [key, n] : rows) sum_rows += choose2(n);
    for (const auto& [key, n] : cols) sum_cols += choose2(n);
    const double expected = sum_rows * sum_cols / choose2(static_cast<double>(a.size()));
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) return 1.0;
    return (index - expected) / (maximum - expected);
}

inline double partition_inertia(const Points& points, const std::vector<std::size_t>& labels, std::size_t k) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> mean(points[0].size(), 0.0);
        double count = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (labels[i] != c) continue;
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += points[i][d];
            count += 1.0;
        }
        for (auto& v : mean) v /= count;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (labels[i] != c) continue;
            for (std::size_t d = 0; d < mean.size(); ++d) total += (points[i][d] - mean[d]) * (points[i][d] - mean[d]);
        }
    }
    return total;
}

/// Minimum inertia over every split of the points into two non-empty groups.
inline double best_two_partition_inertia(const Points& points) {
    const std::size_t n = points.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
        std::vector<std::size_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1U;
        best = std::min(best, partition_inertia(points, labels, 2));
    }
    return best;
}

}  // namespace frans::testing
