#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "frans/data.hpp"
#include "frans/rng.hpp"

using namespace frans;

namespace {

Dataset parse(const std::string& text, InputFormat format, std::size_t m = 1, std::size_t h = 2) {
    std::istringstream in(text);
    return parse_dataset(in, format, m, h);
}

std::vector<double> iota(double from, double to) {
    std::vector<double> v;
    for (double x = from; x <= to; x += 1.0) v.push_back(x);
    return v;
}

}  // namespace

TEST_CASE("one-row-per-series input") {
    const Dataset d = parse("T1,1,2,3\n", InputFormat::wide);
    REQUIRE(d.series.size() == 1);
    CHECK(d.series[0].id == "T1");
    CHECK(d.series[0].values == std::vector<double>{1, 2, 3});
}

TEST_CASE("long CSV groups interleaved ids in temporal order") {
    const Dataset d = parse("series_id,value\nA,1\nB,10\nA,2\nB,20\nA,3\nB,30\n", InputFormat::long_csv);
    REQUIRE(d.series.size() == 2);
    CHECK(d.series[0].id == "A");
    CHECK(d.series[0].values == std::vector<double>{1, 2, 3});
    CHECK(d.series[1].id == "B");
    CHECK(d.series[1].values == std::vector<double>{10, 20, 30});
}

TEST_CASE("ingest errors") {
    CHECK_THROWS_WITH(parse("series_id,value\nA,1\nA,abc\n", InputFormat::long_csv), doctest::Contains("line 3"));
    CHECK_THROWS_WITH(parse("A,1,2\nA,3,4\n", InputFormat::wide), doctest::Contains("duplicate"));
    CHECK_THROWS_WITH(parse("A,1\n", InputFormat::wide), doctest::Contains("A"));
    CHECK_THROWS(parse("A,1,nan,3\n", InputFormat::wide));
    CHECK_THROWS(parse("A,1,inf,3\n", InputFormat::wide));
    CHECK_THROWS_AS(input_format_from_string("xlsx"), std::invalid_argument);
}

TEST_CASE("tsf input") {
    const std::string text =
        "# comment\n@relation demo\n@attribute series_name string\n@frequency daily\n@data\n"
        "T1:1,2,3,4\nT2:5,6,7,8\n";
    const Dataset d = parse(text, InputFormat::tsf, 7, 2);
    REQUIRE(d.series.size() == 2);
    CHECK(d.series[1].id == "T2");
    CHECK(d.series[1].values == std::vector<double>{5, 6, 7, 8});
    CHECK(d.series[1].period == 7);
    CHECK_THROWS(parse("@data\nT1:1,?,3\n", InputFormat::tsf));
}

TEST_CASE("write_long_csv round-trips") {
    Dataset d = parse("A,1.5,2.25,-3\nB,1e-7,2,3\n", InputFormat::wide);
    std::ostringstream os;
    write_long_csv(os, d);
    const Dataset back = parse(os.str(), InputFormat::long_csv);
    REQUIRE(back.series.size() == 2);
    CHECK(back.series[0].values == d.series[0].values);
    CHECK(back.series[1].values == d.series[1].values);
}

TEST_CASE("split") {
    SUBCASE("monthly horizon 8") {
        Dataset d;
        d.horizon = 8;
        d.series.push_back({"M", iota(1, 20), 12});
        const SplitDataset s = split(d);
        CHECK(s.train[0].values == iota(1, 12));
        CHECK(s.test[0].values == iota(13, 20));
    }
    SUBCASE("weekly horizon 7 takes the final seven points") {
        Dataset d;
        d.horizon = 7;
        d.series.push_back({"W", iota(1, 30), 1});
        const SplitDataset s = split(d);
        CHECK(s.test[0].values == iota(24, 30));
        CHECK(s.train[0].values.size() + s.test[0].values.size() == 30);
    }
    SUBCASE("zero horizon is rejected") {
        Dataset d;
        d.horizon = 0;
        d.series.push_back({"A", iota(1, 5), 1});
        CHECK_THROWS_AS(split(d), std::invalid_argument);
    }
    SUBCASE("short series are listed") {
        Dataset d;
        d.horizon = 5;
        d.series.push_back({"ok", iota(1, 10), 1});
        d.series.push_back({"tiny", iota(1, 5), 1});
        d.series.push_back({"small", iota(1, 3), 1});
        CHECK_THROWS_WITH(split(d), doctest::Contains("tiny, small"));
    }
}

TEST_CASE("window offsets and shapes") {
    SUBCASE("exact tiling") {
        CHECK(window_offsets(10, 5, 5) == std::vector<std::size_t>{0, 5});
    }
    SUBCASE("final offset is always present") {
        CHECK(window_offsets(11, 5, 5) == std::vector<std::size_t>{0, 5, 6});
    }
    SUBCASE("constant series give all-zero windows") {
        const std::vector<TrainSeries> train{{"c", std::vector<double>(20, 3.5), 1}};
        for (const Window& w : make_windows(train, {6, 2, 64}, 1)) {
            for (double v : w.values) CHECK(v == 0.0);
            CHECK(w.norm_std == 0.0);
            CHECK(w.norm_mean == 3.5);
        }
    }
    SUBCASE("length below 4 is rejected") {
        const std::vector<TrainSeries> train{{"a", iota(1, 10), 1}};
        CHECK_THROWS_AS(make_windows(train, {3, 1, 64}, 1), std::invalid_argument);
    }
}

TEST_CASE("seeded subsample keeps exactly max_per_series windows") {
    std::vector<double> values;
    for (int t = 0; t < 100; ++t) values.push_back(std::sin(0.3 * t) + 0.01 * t);
    const std::vector<TrainSeries> train{{"s", values, 1}};
    const WindowParams p{24, 1, 10};
    const auto a = make_windows(train, p, 77);
    const auto b = make_windows(train, p, 77);
    REQUIRE(a.size() == 10);
    std::vector<std::int64_t> sa, sb;
    for (const auto& w : a) sa.push_back(w.start);
    for (const auto& w : b) sb.push_back(w.start);
    CHECK(sa == sb);
    CHECK(std::is_sorted(sa.begin(), sa.end()));
    CHECK(std::set<std::int64_t>(sa.begin(), sa.end()).size() == 10);

    // oracle: partial Fisher-Yates over the 77 candidate offsets with the per-series stream
    std::vector<std::size_t> offsets(77);
    for (std::size_t i = 0; i < offsets.size(); ++i) offsets[i] = i;
    Rng rng = Rng::stream(77, "windowing", 0);
    for (std::size_t i = 0; i < 10; ++i) std::swap(offsets[i], offsets[i + rng.index(offsets.size() - i)]);
    offsets.resize(10);
    std::sort(offsets.begin(), offsets.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(sa[i] == static_cast<std::int64_t>(offsets[i]));

    const auto c = make_windows(train, p, 78);
    std::vector<std::int64_t> sc;
    for (const auto& w : c) sc.push_back(w.start);
    CHECK(sc != sa);
}

TEST_CASE("window invariants on random series") {
    Rng rng(3);
    std::vector<TrainSeries> train;
    for (int s = 0; s < 6; ++s) {
        std::vector<double> v;
        const std::size_t len = 8 + rng.index(60);
        for (std::size_t t = 0; t < len; ++t) v.push_back(100.0 * s + rng.normal());
        train.push_back({"s" + std::to_string(s), v, 1});
    }
    const WindowParams p{16, 4, 5};
    const auto windows = make_windows(train, p, 9);
    std::vector<std::size_t> per_class(train.size(), 0);
    for (const Window& w : windows) {
        REQUIRE(w.values.size() == 16);
        ++per_class[w.class_index];
        CHECK(w.class_index == w.series_index);
        const auto& series = train[w.series_index].values;
        CHECK(w.start + 16 <= static_cast<std::int64_t>(std::max<std::size_t>(series.size(), 16)));
        double mean = 0.0, sq = 0.0;
        for (double v : w.values) mean += v;
        mean /= 16;
        for (double v : w.values) sq += (v - mean) * (v - mean);
        if (w.norm_std > 0) {
            CHECK(std::abs(mean) < 1e-9);
            CHECK(std::abs(std::sqrt(sq / 16) - 1.0) < 1e-9);
        }
        for (std::size_t i = 0; i < 16; ++i) {
            const double raw = padded_value(series, w.start + static_cast<std::int64_t>(i));
            CHECK(std::abs(w.values[i] * w.norm_std + w.norm_mean - raw) < 1e-9);
        }
    }
    for (std::size_t c : per_class) {
        CHECK(c >= 1);
        CHECK(c <= 5);
    }
}

TEST_CASE("short series are left-padded with their first value") {
    const std::vector<TrainSeries> train{{"short", {5, 6, 7, 8, 9, 10}, 1}};
    const auto w = make_windows(train, {8, 2, 64}, 1);
    REQUIRE(w.size() == 1);
    CHECK(w[0].start == -2);
    CHECK(padded_value(train[0].values, -2) == 5.0);
}

TEST_CASE("default window length clamp") {
    auto train_of = [](std::size_t shortest) {
        return std::vector<TrainSeries>{{"a", std::vector<double>(shortest + 50, 1.0), 1},
                                        {"b", std::vector<double>(shortest, 1.0), 1}};
    };
    CHECK(default_window_length(train_of(112), 12) == 36);
    CHECK(default_window_length(train_of(11), 1) == 11);
    CHECK(default_window_length(train_of(97), 1) == 16);
    CHECK(default_stride(36) == 9);
    CHECK(default_stride(3) == 1);
}

TEST_CASE("label map groups several series into one class") {
    const auto path = std::filesystem::temp_directory_path() / "frans_label_map_test.csv";
    {
        std::ofstream out(path);
        out << "series_id,label\na,north\nb,south\nc,north\n";
    }
    const std::vector<TrainSeries> train{{"a", iota(1, 20), 1}, {"b", iota(1, 20), 1}, {"c", iota(1, 20), 1}};
    std::size_t classes = 0;
    const auto labels = load_label_map(path, train, &classes);
    CHECK(classes == 2);
    CHECK(labels == std::vector<std::size_t>{0, 1, 0});
    const auto windows = make_windows(train, {8, 4, 64}, 1, &labels);
    for (const Window& w : windows) CHECK(w.class_index == labels[w.series_index]);
    std::filesystem::remove(path);
}

TEST_CASE("synthetic dataset is reproducible and positive") {
    const Dataset a = make_synthetic_dataset({});
    const Dataset b = make_synthetic_dataset({});
    REQUIRE(a.series.size() == 20);
    for (std::size_t i = 0; i < a.series.size(); ++i) {
        CHECK(a.series[i].values == b.series[i].values);
        CHECK(a.series[i].values.size() == 240);
        CHECK(*std::min_element(a.series[i].values.begin(), a.series[i].values.end()) > 0.0);
    }
}
