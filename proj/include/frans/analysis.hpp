#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "frans/extractor.hpp"

namespace frans {

using Points = std::vector<std::vector<double>>;

struct StabilityRecord {
    std::string series_id;
    std::size_t windows = 0;
    std::vector<std::optional<double>> ratios;  // std / |mean| per feature; empty when |mean| < 1e-12
    std::optional<double> aggregate;            // mean of the defined ratios
    bool flagged = false;                       // fewer than 2 windows or any undefined ratio
};

/// Population std over a series' window features divided by their absolute mean, per feature.
std::vector<StabilityRecord> stability(const std::vector<FeatureVector>& window_features);

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

std::vector<HistogramBin> stability_histogram(const std::vector<StabilityRecord>& records, std::size_t bins);

enum class ClusterInit { kmeans_pp, random };

struct ClusterReport {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
    double silhouette = 0.0;
    Points centroids;
    Points cluster_means;
    Points cluster_stds;
    std::vector<std::size_t> cluster_sizes;
};

/// Best-of-`restarts` Lloyd clustering (shift < 1e-9 or 300 iterations) by inertia.
ClusterReport kmeans(const Points& points, std::size_t k, std::size_t restarts, std::uint64_t seed,
                     ClusterInit init = ClusterInit::kmeans_pp);

inline ClusterReport kmeans_pp(const Points& points, std::size_t k, std::size_t restarts, std::uint64_t seed) {
    return kmeans(points, k, restarts, seed, ClusterInit::kmeans_pp);
}

double inertia(const Points& points, const std::vector<std::size_t>& assignments);

/// Mean silhouette with Euclidean distance; singleton clusters contribute 0.
double silhouette(const Points& points, const std::vector<std::size_t>& assignments, std::size_t k);

struct ElbowRow {
    std::size_t k = 0;
    double inertia = 0.0;
    double silhouette = 0.0;
};

std::vector<ElbowRow> elbow_sweep(const Points& points, std::size_t k_min, std::size_t k_max, std::size_t restarts,
                                  std::uint64_t seed);

struct Projection {
    Points coords;  // [n][2]
    std::vector<double> explained_variance;  // top-2 eigenvalues
    bool rank_deficient = false;
};

/// Projection onto the top two principal components of the covariance; each component's
/// largest-magnitude loading is positive.
Projection pca_2d(const Points& points);

struct PairDistance {
    std::size_t first = 0;
    std::size_t second = 0;
    double distance = 0.0;
};

struct Extremes {
    PairDistance closest;
    PairDistance farthest;
};

/// Closest and farthest pairs; ties resolve to the lexicographically smallest (id, id) pair.
Extremes similarity_extremes(const Points& points, const std::vector<std::string>& ids);

/// Indices of the `count` points nearest to a location in the projection plane.
std::vector<std::size_t> nearest_to(const Points& coords, double x, double y, std::size_t count);

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);

void write_stability_csv(std::ostream& out, const std::vector<StabilityRecord>& records);
void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins);
void write_elbow_csv(std::ostream& out, const std::vector<ElbowRow>& rows);
void write_assignments_csv(std::ostream& out, const std::vector<std::string>& ids, const ClusterReport& report);
void write_cluster_profile_csv(std::ostream& out, const ClusterReport& report);
void write_projection_csv(std::ostream& out, const std::vector<std::string>& ids, const Projection& projection);
void write_extremes_csv(std::ostream& out, const std::vector<std::string>& ids, const Extremes& extremes);

}  // namespace frans
