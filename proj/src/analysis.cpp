#include "frans/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include "frans/csv_io.hpp"
#include "frans/rng.hpp"

namespace frans {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

std::size_t nearest_centroid(const std::vector<double>& p, const Points& centroids, double* dist = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

Points seed_centroids(const Points& points, std::size_t k, Rng& rng, ClusterInit init) {
    Points centroids;
    if (init == ClusterInit::random) {
        std::vector<std::size_t> idx(points.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
        for (std::size_t i = 0; i < k; ++i) centroids.push_back(points[idx[i]]);
        return centroids;
    }
    centroids.push_back(points[rng.index(points.size())]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            nearest_centroid(points[i], centroids, &d2[i]);
            total += d2[i];
        }
        const double target = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            pick = i;
            if (acc > target) break;
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

struct LloydResult {
    std::vector<std::size_t> assignments;
    Points centroids;
    double inertia = 0.0;
};

LloydResult lloyd(const Points& points, Points centroids) {
    const std::size_t n = points.size(), k = centroids.size(), dim = points.front().size();
    std::vector<std::size_t> assign(n, 0);
    for (int iter = 0; iter < 300; ++iter) {
        for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_centroid(points[i], centroids);
        Points next(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) next[assign[i]][d] += points[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) {
                // empty cluster takes over the point worst served by its centroid
                std::size_t worst = 0;
                double worst_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = squared_distance(points[i], centroids[assign[i]]);
                    if (d > worst_d) {
                        worst_d = d;
                        worst = i;
                    }
                }
                next[c] = points[worst];
                continue;
            }
            for (double& v : next[c]) v /= static_cast<double>(count[c]);
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(next[c], centroids[c])));
        centroids = std::move(next);
        if (shift < 1e-9) break;
    }
    LloydResult r;
    r.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        r.assignments[i] = nearest_centroid(points[i], centroids, &d);
        r.inertia += d;
    }
    r.centroids = std::move(centroids);
    return r;
}

void check_points(const Points& points, const char* who) {
    if (points.empty()) throw std::invalid_argument(std::string(who) + ": no points");
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw std::invalid_argument(std::string(who) + ": inconsistent point dimensions");
    }
}

}  // namespace

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
    return std::sqrt(squared_distance(a, b));
}

std::vector<StabilityRecord> stability(const std::vector<FeatureVector>& window_features) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const FeatureVector*>> groups;
    for (const FeatureVector& f : window_features) {
        auto [it, inserted] = groups.try_emplace(f.series_id);
        if (inserted) order.push_back(f.series_id);
        it->second.push_back(&f);
    }
    std::vector<StabilityRecord> records;
    for (const std::string& id : order) {
        const auto& members = groups[id];
        StabilityRecord rec;
        rec.series_id = id;
        rec.windows = members.size();
        rec.flagged = members.size() < 2;
        const std::size_t dim = members.front()->values.size();
        double sum_ratio = 0.0;
        std::size_t defined = 0;
        for (std::size_t j = 0; j < dim; ++j) {
            double mean = 0.0;
            for (const FeatureVector* f : members) mean += f->values[j];
            mean /= static_cast<double>(members.size());
            double var = 0.0;
            for (const FeatureVector* f : members) var += (f->values[j] - mean) * (f->values[j] - mean);
            var /= static_cast<double>(members.size());
            if (std::abs(mean) < 1e-12) {
                rec.ratios.emplace_back(std::nullopt);
                rec.flagged = true;
                continue;
            }
            const double ratio = std::sqrt(var) / std::abs(mean);
            rec.ratios.emplace_back(ratio);
            sum_ratio += ratio;
            ++defined;
        }
        if (defined > 0) rec.aggregate = sum_ratio / static_cast<double>(defined);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<HistogramBin> stability_histogram(const std::vector<StabilityRecord>& records, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("stability_histogram: need at least one bin");
    double top = 0.0;
    for (const auto& r : records) {
        if (r.aggregate) top = std::max(top, *r.aggregate);
    }
    if (top <= 0.0) top = 1.0;
    const double width = top / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lower = width * static_cast<double>(b);
        out[b].upper = b + 1 == bins ? top : width * static_cast<double>(b + 1);
    }
    for (const auto& r : records) {
        if (!r.aggregate) continue;
        std::size_t b = static_cast<std::size_t>(*r.aggregate / width);
        out[std::min(b, bins - 1)].count++;
    }
    return out;
}

double inertia(const Points& points, const std::vector<std::size_t>& assignments) {
    std::map<std::size_t, std::vector<double>> sums;
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& s = sums[assignments[i]];
        if (s.empty()) s.assign(points[i].size(), 0.0);
        for (std::size_t d = 0; d < points[i].size(); ++d) s[d] += points[i][d];
        ++counts[assignments[i]];
    }
    for (auto& [c, s] : sums) {
        for (double& v : s) v /= static_cast<double>(counts[c]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) total += squared_distance(points[i], sums[assignments[i]]);
    return total;
}

double silhouette(const Points& points, const std::vector<std::size_t>& assignments, std::size_t k) {
    const std::size_t n = points.size();
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : assignments) ++sizes[a];
    double total = 0.0;
    std::vector<double> dist_sum(k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = assignments[i];
        if (sizes[own] <= 1) continue;
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dist_sum[assignments[j]] += euclidean_distance(points[i], points[j]);
        }
        const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && sizes[c] > 0) b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
        }
        if (!std::isfinite(b)) continue;
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

ClusterReport kmeans(const Points& points, std::size_t k, std::size_t restarts, std::uint64_t seed, ClusterInit init) {
    check_points(points, "kmeans");
    if (k < 2) throw std::invalid_argument("kmeans: k must be at least 2");
    if (k > points.size()) throw std::invalid_argument("kmeans: k exceeds the number of points");
    std::set<std::vector<double>> distinct(points.begin(), points.end());
    if (distinct.size() < k) {
        throw std::invalid_argument("kmeans: only " + std::to_string(distinct.size()) + " distinct points for k = " +
                                    std::to_string(k));
    }
    if (restarts == 0) restarts = 1;

    LloydResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng = Rng::stream(seed, init == ClusterInit::kmeans_pp ? "clustering" : "clustering-random", r);
        LloydResult run = lloyd(points, seed_centroids(points, k, rng, init));
        if (run.inertia < best.inertia) best = std::move(run);
    }

    ClusterReport report;
    report.k = k;
    report.assignments = best.assignments;
    report.inertia = best.inertia;
    report.centroids = best.centroids;
    report.silhouette = silhouette(points, best.assignments, k);
    const std::size_t dim = points.front().size();
    report.cluster_sizes.assign(k, 0);
    report.cluster_means.assign(k, std::vector<double>(dim, 0.0));
    report.cluster_stds.assign(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t c = best.assignments[i];
        ++report.cluster_sizes[c];
        for (std::size_t d = 0; d < dim; ++d) report.cluster_means[c][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (report.cluster_sizes[c] == 0) continue;
        for (double& v : report.cluster_means[c]) v /= static_cast<double>(report.cluster_sizes[c]);
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t c = best.assignments[i];
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = points[i][d] - report.cluster_means[c][d];
            report.cluster_stds[c][d] += diff * diff;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (report.cluster_sizes[c] == 0) continue;
        for (double& v : report.cluster_stds[c]) v = std::sqrt(v / static_cast<double>(report.cluster_sizes[c]));
    }
    return report;
}

std::vector<ElbowRow> elbow_sweep(const Points& points, std::size_t k_min, std::size_t k_max, std::size_t restarts,
                                  std::uint64_t seed) {
    check_points(points, "elbow_sweep");
    if (k_min < 2 || k_max + 1 > points.size() || k_min > k_max) {
        throw std::invalid_argument("elbow_sweep: k range must lie within [2, n-1]");
    }
    std::vector<ElbowRow> rows;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const ClusterReport r = kmeans_pp(points, k, restarts, seed);
        rows.push_back({k, r.inertia, r.silhouette});
    }
    return rows;
}

Projection pca_2d(const Points& points) {
    check_points(points, "pca_2d");
    if (points.size() < 3) throw std::invalid_argument("pca_2d: need at least 3 points");
    const auto n = static_cast<Eigen::Index>(points.size());
    const auto dim = static_cast<Eigen::Index>(points.front().size());
    if (dim < 2) throw std::invalid_argument("pca_2d: need at least 2 feature dimensions");
    Eigen::MatrixXd x(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) x(i, d) = points[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_2d: eigen-decomposition failed");

    Projection out;
    const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
    Eigen::MatrixXd components(dim, 2);
    for (int c = 0; c < 2; ++c) {
        const Eigen::Index col = dim - 1 - c;
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        for (Eigen::Index d = 1; d < dim; ++d) {
            if (std::abs(v(d)) > std::abs(v(arg))) arg = d;
        }
        if (v(arg) < 0.0) v = -v;
        components.col(c) = v;
        out.explained_variance.push_back(std::max(values(col), 0.0));
    }
    const double top = std::max(out.explained_variance[0], std::numeric_limits<double>::min());
    if (out.explained_variance[1] <= 1e-12 * top) {
        out.rank_deficient = true;
        components.col(1).setZero();
    }
    const Eigen::MatrixXd proj = x * components;
    out.coords.assign(points.size(), std::vector<double>(2, 0.0));
    for (Eigen::Index i = 0; i < n; ++i) {
        out.coords[static_cast<std::size_t>(i)][0] = proj(i, 0);
        out.coords[static_cast<std::size_t>(i)][1] = proj(i, 1);
    }
    return out;
}

Extremes similarity_extremes(const Points& points, const std::vector<std::string>& ids) {
    check_points(points, "similarity_extremes");
    if (points.size() < 2) throw std::invalid_argument("similarity_extremes: need at least 2 series");
    if (ids.size() != points.size()) throw std::invalid_argument("similarity_extremes: id count mismatch");
    auto ordered = [&](std::size_t a, std::size_t b) { return ids[a] <= ids[b] ? std::pair{a, b} : std::pair{b, a}; };
    auto key = [&](const PairDistance& p) { return std::pair{ids[p.first], ids[p.second]}; };
    Extremes e;
    bool first = true;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const auto [a, b] = ordered(i, j);
            const PairDistance p{a, b, euclidean_distance(points[i], points[j])};
            if (first) {
                e.closest = e.farthest = p;
                first = false;
                continue;
            }
            if (p.distance < e.closest.distance || (p.distance == e.closest.distance && key(p) < key(e.closest))) e.closest = p;
            if (p.distance > e.farthest.distance || (p.distance == e.farthest.distance && key(p) < key(e.farthest))) e.farthest = p;
        }
    }
    return e;
}

std::vector<std::size_t> nearest_to(const Points& coords, double x, double y, std::size_t count) {
    std::vector<std::size_t> idx(coords.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto d = [&](std::size_t i) { return (coords[i][0] - x) * (coords[i][0] - x) + (coords[i][1] - y) * (coords[i][1] - y); };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d(a) < d(b); });
    idx.resize(std::min(count, idx.size()));
    return idx;
}

void write_stability_csv(std::ostream& out, const std::vector<StabilityRecord>& records) {
    out << "series_id,windows,flagged,aggregate";
    const std::size_t dim = records.empty() ? 0 : records.front().ratios.size();
    for (std::size_t j = 0; j < dim; ++j) out << ",ratio_f" << (j + 1);
    out << '\n';
    for (const StabilityRecord& r : records) {
        out << r.series_id << ',' << r.windows << ',' << (r.flagged ? 1 : 0) << ','
            << (r.aggregate ? format_number(*r.aggregate) : "NA");
        for (const auto& v : r.ratios) out << ',' << (v ? format_number(*v) : "NA");
        out << '\n';
    }
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
    out << "lower,upper,count\n";
    for (const HistogramBin& b : bins) out << format_number(b.lower) << ',' << format_number(b.upper) << ',' << b.count << '\n';
}

void write_elbow_csv(std::ostream& out, const std::vector<ElbowRow>& rows) {
    out << "k,inertia,silhouette\n";
    for (const ElbowRow& r : rows) out << r.k << ',' << format_number(r.inertia) << ',' << format_number(r.silhouette) << '\n';
}

void write_assignments_csv(std::ostream& out, const std::vector<std::string>& ids, const ClusterReport& report) {
    out << "series_id,cluster\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << report.assignments[i] << '\n';
}

void write_cluster_profile_csv(std::ostream& out, const ClusterReport& report) {
    out << "cluster,size,feature,mean,sd\n";
    for (std::size_t c = 0; c < report.k; ++c) {
        for (std::size_t d = 0; d < report.cluster_means[c].size(); ++d) {
            out << c << ',' << report.cluster_sizes[c] << ",f" << (d + 1) << ',' << format_number(report.cluster_means[c][d])
                << ',' << format_number(report.cluster_stds[c][d]) << '\n';
        }
    }
}

void write_projection_csv(std::ostream& out, const std::vector<std::string>& ids, const Projection& projection) {
    out << "series_id,pc1,pc2\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << ',' << format_number(projection.coords[i][0]) << ',' << format_number(projection.coords[i][1]) << '\n';
    }
}

void write_extremes_csv(std::ostream& out, const std::vector<std::string>& ids, const Extremes& extremes) {
    out << "kind,series_a,series_b,distance\n";
    out << "closest," << ids[extremes.closest.first] << ',' << ids[extremes.closest.second] << ','
        << format_number(extremes.closest.distance) << '\n';
    out << "farthest," << ids[extremes.farthest.first] << ',' << ids[extremes.farthest.second] << ','
        << format_number(extremes.farthest.distance) << '\n';
}

}  // namespace frans
