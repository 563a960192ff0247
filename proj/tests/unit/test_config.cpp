#include <doctest.h>

#include <sstream>

#include "frans/config.hpp"

using namespace frans;

TEST_CASE("config keys") {
    RunConfig c;
    c.set("epochs", "7");
    c.set("meta_eta", "0.25");
    c.set("conv_blocks", "4x3,8x2");
    c.set("pool", "theta,ets");
    c.set("m", "12");
    CHECK(c.epochs == 7);
    CHECK(c.meta_eta == 0.25);
    CHECK(c.conv_blocks.size() == 2);
    CHECK(c.pool == std::vector<std::string>{"theta", "ets"});
    CHECK(c.period == 12);
    CHECK_THROWS_AS(c.set("no_such_key", "1"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("epochs", "seven"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("epochs", "-3"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("pool", "arima"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("conv_blocks", "4y3"), std::invalid_argument);

    // every listed key round-trips through its textual value
    RunConfig copy;
    for (const auto& [k, v] : c.entries()) copy.set(k, v);
    CHECK(copy.entries() == c.entries());
    CHECK(c.entries().size() == config_keys().size());
}

TEST_CASE("config stream") {
    RunConfig c;
    std::istringstream good("# comment\n\nepochs = 3\nseed=9  \n");
    apply_config_stream(c, good, "run.cfg");
    CHECK(c.epochs == 3);
    CHECK(c.seed == 9);
    std::istringstream bad("epochs = 3\nbogus = 1\n");
    try {
        apply_config_stream(c, bad, "run.cfg");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
    }
}

TEST_CASE("pipeline conversion") {
    RunConfig c;
    c.set("meta_rounds", "12");
    c.set("patience", "3");
    c.set("aggregation", "medoid");
    const PipelineConfig p = c.pipeline();
    CHECK(p.gbdt.rounds == 12);
    CHECK(p.patience == 3);
    CHECK(p.aggregation == Aggregation::medoid);
    CHECK(p.seed == 42);
}

TEST_CASE("conv block text") {
    const auto blocks = parse_blocks("128x8,256x5,128x3");
    CHECK(format_blocks(blocks) == "128x8,256x5,128x3");
    CHECK_THROWS_AS(parse_blocks(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_blocks("0x3"), std::invalid_argument);
}

TEST_CASE("manifest") {
    RunConfig c;
    Manifest m("extract");
    m.record("windows", std::size_t{12});
    std::ostringstream os;
    m.write(os, c);
    const std::string text = os.str();
    CHECK(text.find("stage = extract\n") != std::string::npos);
    CHECK(text.find("config.seed = 42\n") != std::string::npos);
    CHECK(text.find("windows = 12\n") != std::string::npos);
}
