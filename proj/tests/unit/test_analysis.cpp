#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "../support/cluster_oracles.hpp"
#include "frans/analysis.hpp"
#include "frans/rng.hpp"

using namespace frans;
using frans::testing::adjusted_rand_index;
using frans::testing::make_blobs;

namespace {

FeatureVector window(const std::string& id, std::vector<double> values) {
    FeatureVector f;
    f.series_id = id;
    f.values = std::move(values);
    return f;
}

Points random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    Points p(n, std::vector<double>(dim));
    for (auto& row : p) {
        for (auto& v : row) v = rng.normal();
    }
    return p;
}

}  // namespace

TEST_CASE("stability ratios") {
    SUBCASE("identical windows give zero ratios") {
        const auto r = stability({window("a", {1, 2}), window("a", {1, 2}), window("a", {1, 2})});
        REQUIRE(r.size() == 1);
        CHECK(r[0].windows == 3);
        CHECK(*r[0].ratios[0] == 0.0);
        CHECK(*r[0].ratios[1] == 0.0);
        CHECK(*r[0].aggregate == 0.0);
        CHECK_FALSE(r[0].flagged);
    }
    SUBCASE("population standard deviation over the mean") {
        const auto r = stability({window("a", {1, -1}), window("a", {3, -3})});
        CHECK(*r[0].ratios[0] == doctest::Approx(0.5));
        CHECK(*r[0].ratios[1] == doctest::Approx(0.5));
    }
    SUBCASE("zero-mean feature and single window are flagged") {
        const auto r = stability({window("a", {1, 5}), window("b", {2, 2}), window("a", {-1, 5})});
        REQUIRE(r.size() == 2);
        CHECK(r[0].series_id == "a");
        CHECK_FALSE(r[0].ratios[0].has_value());
        CHECK(*r[0].ratios[1] == 0.0);
        CHECK(r[0].flagged);
        CHECK(r[1].series_id == "b");
        CHECK(r[1].flagged);
    }
    SUBCASE("ratios are non-negative and the histogram counts every defined aggregate") {
        Rng rng(1);
        std::vector<FeatureVector> w;
        for (int s = 0; s < 10; ++s) {
            for (int i = 0; i < 6; ++i) w.push_back(window("s" + std::to_string(s), {rng.normal(), 1 + rng.uniform()}));
        }
        const auto records = stability(w);
        std::size_t defined = 0;
        for (const auto& rec : records) {
            for (const auto& v : rec.ratios) {
                if (v) CHECK(*v >= 0.0);
            }
            if (rec.aggregate) ++defined;
        }
        const auto bins = stability_histogram(records, 5);
        REQUIRE(bins.size() == 5);
        std::size_t total = 0;
        for (const auto& b : bins) total += b.count;
        CHECK(total == defined);
        CHECK(bins.front().lower == 0.0);
    }
}

TEST_CASE("kmeans") {
    SUBCASE("separated blobs are recovered") {
        const auto blobs = make_blobs(3, 30, 16, 10.0, 1.0, 2);
        const ClusterReport r = kmeans_pp(blobs.points, 3, 10, 1);
        CHECK(adjusted_rand_index(r.assignments, blobs.labels) >= 0.95);
        CHECK(r.silhouette > 0.8);
        CHECK(r.assignments.size() == blobs.points.size());
        CHECK(std::accumulate(r.cluster_sizes.begin(), r.cluster_sizes.end(), std::size_t{0}) == 90);
        CHECK(r.inertia == doctest::Approx(inertia(blobs.points, r.assignments)));
    }
    SUBCASE("k equal to n gives zero inertia") {
        const Points p = random_points(6, 3, 3);
        CHECK(kmeans_pp(p, 6, 3, 1).inertia == 0.0);
    }
    SUBCASE("four points match exhaustive two-partition search") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const Points p = random_points(4, 3, seed);
            CHECK(kmeans_pp(p, 2, 10, seed).inertia == doctest::Approx(frans::testing::best_two_partition_inertia(p)));
        }
    }
    SUBCASE("preconditions") {
        const Points dup{{1, 1}, {1, 1}, {1, 1}, {2, 2}};
        CHECK_THROWS_AS(kmeans_pp(dup, 3, 2, 1), std::invalid_argument);
        CHECK_THROWS_AS(kmeans_pp(dup, 1, 2, 1), std::invalid_argument);
        CHECK_THROWS_AS(kmeans_pp(dup, 5, 2, 1), std::invalid_argument);
    }
    SUBCASE("seeded runs are reproducible") {
        const Points p = random_points(40, 4, 4);
        CHECK(kmeans_pp(p, 4, 5, 9).assignments == kmeans_pp(p, 4, 5, 9).assignments);
    }
    SUBCASE("plus-plus seeding is at least as good as random seeding") {
        std::size_t wins = 0;
        const std::size_t trials = 20;
        for (std::uint64_t t = 0; t < trials; ++t) {
            const auto blobs = make_blobs(5, 12, 6, 4.0, 1.0, 100 + t);
            const double pp = kmeans(blobs.points, 5, 3, t, ClusterInit::kmeans_pp).inertia;
            const double rnd = kmeans(blobs.points, 5, 3, t, ClusterInit::random).inertia;
            if (pp <= rnd + 1e-9) ++wins;
        }
        CHECK(static_cast<double>(wins) / trials >= 0.5);
    }
}

TEST_CASE("silhouette") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Points p = random_points(15, 3, 200 + static_cast<std::uint64_t>(trial));
        std::vector<std::size_t> labels(15);
        for (auto& l : labels) l = rng.index(3);
        const double s = silhouette(p, labels, 3);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }
    // direct evaluation for two clusters on a line
    const Points line{{0}, {1}, {10}, {12}};
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    const double s0 = 1.0 - 1.0 / 11.0;
    const double s1 = 1.0 - 1.0 / 10.0;
    const double s2 = 1.0 - 2.0 / 9.5;
    const double s3 = 1.0 - 2.0 / 11.5;
    CHECK(silhouette(line, labels, 2) == doctest::Approx((s0 + s1 + s2 + s3) / 4.0));
}

TEST_CASE("elbow sweep") {
    const auto blobs = make_blobs(3, 20, 8, 8.0, 1.0, 6);
    const auto rows = elbow_sweep(blobs.points, 2, 5, 10, 1);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].k == i + 2);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].inertia <= rows[i - 1].inertia * (1.0 + 1e-6));
    const auto best = std::max_element(rows.begin(), rows.end(),
                                       [](const ElbowRow& a, const ElbowRow& b) { return a.silhouette < b.silhouette; });
    CHECK(best->k == 3);
    CHECK_THROWS_AS(elbow_sweep(blobs.points, 1, 3, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(elbow_sweep(blobs.points, 2, 60, 2, 1), std::invalid_argument);
}

TEST_CASE("principal component projection") {
    Rng rng(7);
    // orthonormal u, v in 16 dimensions
    std::vector<double> u(16), v(16);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    for (auto& x : u) x /= nu;
    const double uv = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
    for (std::size_t i = 0; i < 16; ++i) v[i] -= uv * u[i];
    const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= nv;

    Points plane;
    for (int i = 0; i < 30; ++i) {
        const double a = rng.normal() * 3.0, b = rng.normal();
        std::vector<double> p(16);
        for (std::size_t d = 0; d < 16; ++d) p[d] = 5.0 + a * u[d] + b * v[d];
        plane.push_back(p);
    }
    const Projection proj = pca_2d(plane);
    REQUIRE(proj.coords.size() == 30);
    CHECK_FALSE(proj.rank_deficient);
    for (std::size_t i = 0; i < plane.size(); ++i) {
        for (std::size_t j = i + 1; j < plane.size(); ++j) {
            CHECK(std::abs(euclidean_distance(proj.coords[i], proj.coords[j]) - euclidean_distance(plane[i], plane[j])) <
                  1e-9);
        }
    }
    // all variance is captured by two components
    double trace = 0.0;
    for (std::size_t d = 0; d < 16; ++d) {
        double mean = 0.0;
        for (const auto& p : plane) mean += p[d];
        mean /= 30.0;
        for (const auto& p : plane) trace += (p[d] - mean) * (p[d] - mean) / 29.0;
    }
    CHECK(proj.explained_variance[0] + proj.explained_variance[1] == doctest::Approx(trace).epsilon(1e-10));
    CHECK(proj.explained_variance[0] >= proj.explained_variance[1]);

    SUBCASE("duplicated points share coordinates") {
        Points twice = random_points(10, 5, 8);
        const Points copy = twice;
        twice.insert(twice.end(), copy.begin(), copy.end());
        const Projection p = pca_2d(twice);
        for (std::size_t i = 0; i < 10; ++i) CHECK(p.coords[i] == p.coords[i + 10]);
    }
    SUBCASE("collinear points are rank deficient") {
        Points line;
        for (int i = 0; i < 5; ++i) line.push_back({static_cast<double>(i), 2.0 * i, -1.0 * i});
        const Projection p = pca_2d(line);
        CHECK(p.rank_deficient);
        for (const auto& c : p.coords) CHECK(c[1] == 0.0);
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(pca_2d(random_points(2, 4, 1)), std::invalid_argument);
        CHECK_THROWS_AS(pca_2d(random_points(5, 1, 1)), std::invalid_argument);
    }
}

TEST_CASE("similarity extremes") {
    SUBCASE("identical rows are the closest pair") {
        const Points p{{1, 2}, {5, 5}, {1, 2}};
        const Extremes e = similarity_extremes(p, {"a", "b", "c"});
        CHECK(e.closest.distance == 0.0);
        CHECK(e.closest.first == 0);
        CHECK(e.closest.second == 2);
    }
    SUBCASE("collinear midpoint") {
        const Extremes e = similarity_extremes(Points{{0, 0}, {1, 1}, {2, 2}}, {"A", "B", "C"});
        CHECK(e.farthest.first == 0);
        CHECK(e.farthest.second == 2);
    }
    SUBCASE("exhaustive scan oracle") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const Points p = random_points(20, 16, seed);
            std::vector<std::string> ids;
            for (int i = 0; i < 20; ++i) ids.push_back("id" + std::to_string(100 + i));
            double lo = 1e300, hi = -1.0;
            for (std::size_t i = 0; i < 20; ++i) {
                for (std::size_t j = i + 1; j < 20; ++j) {
                    double d = 0.0;
                    for (std::size_t k = 0; k < 16; ++k) d += (p[i][k] - p[j][k]) * (p[i][k] - p[j][k]);
                    lo = std::min(lo, std::sqrt(d));
                    hi = std::max(hi, std::sqrt(d));
                }
            }
            const Extremes e = similarity_extremes(p, ids);
            CHECK(e.closest.distance == doctest::Approx(lo).epsilon(1e-14));
            CHECK(e.farthest.distance == doctest::Approx(hi).epsilon(1e-14));
        }
    }
    SUBCASE("ties resolve to the smallest id pair") {
        const Points square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        const Extremes e = similarity_extremes(square, {"d", "c", "b", "a"});
        // every edge has length 1; the smallest id pair among edges is (a, b) = rows 3 and 2
        CHECK(((e.closest.first == 3 && e.closest.second == 2) || (e.closest.first == 2 && e.closest.second == 3)));
    }
    CHECK_THROWS_AS(similarity_extremes(Points{{1}}, {"a"}), std::invalid_argument);
}

TEST_CASE("diagnostics follow row permutations") {
    const auto blobs = make_blobs(3, 10, 5, 8.0, 1.0, 9);
    std::vector<std::size_t> perm(blobs.points.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(10);
    rng.shuffle(perm);
    Points permuted;
    std::vector<std::string> ids, permuted_ids;
    for (std::size_t i = 0; i < blobs.points.size(); ++i) ids.push_back("s" + std::to_string(i));
    for (std::size_t i : perm) {
        permuted.push_back(blobs.points[i]);
        permuted_ids.push_back(ids[i]);
    }

    const Projection a = pca_2d(blobs.points);
    const Projection b = pca_2d(permuted);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(std::abs(a.coords[perm[i]][0] - b.coords[i][0]) < 1e-9);
        CHECK(std::abs(a.coords[perm[i]][1] - b.coords[i][1]) < 1e-9);
    }

    const Extremes ea = similarity_extremes(blobs.points, ids);
    const Extremes eb = similarity_extremes(permuted, permuted_ids);
    auto names = [](const PairDistance& p, const std::vector<std::string>& n) {
        return std::minmax(n[p.first], n[p.second]);
    };
    CHECK(names(ea.closest, ids) == names(eb.closest, permuted_ids));
    CHECK(names(ea.farthest, ids) == names(eb.farthest, permuted_ids));

    const ClusterReport ka = kmeans_pp(blobs.points, 3, 10, 1);
    const ClusterReport kb = kmeans_pp(permuted, 3, 10, 1);
    std::vector<std::size_t> back(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = kb.assignments[i];
    CHECK(adjusted_rand_index(ka.assignments, back) == doctest::Approx(1.0));
}

TEST_CASE("diagnostic CSV headers") {
    std::ostringstream os;
    write_elbow_csv(os, {{2, 1.5, 0.25}});
    CHECK(os.str().rfind("k,inertia,silhouette\n", 0) == 0);
}
