#include <filesystem>
#include <fstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "tetris/errors.hpp"
#include "tetris/run_config.hpp"

using namespace tetris;

TEST_CASE("defaults describe the standard configuration") {
    RunConfig c;
    CHECK(c.engine == "tetris-fp16");
    CHECK(c.ks == 16);
    CHECK(c.tree_latency == 1);
    CHECK_FALSE(c.tree_overlap);
    CHECK(c.splitters_per_unit == 16);
    CHECK(c.relu);
    CHECK(c.jobs == 1);
    CHECK(c.seed == 1);
    CHECK(c.stride == 1);
    CHECK(c.pad == 0);
    CHECK(c.format == "json");
    CHECK(c.ks_list == std::vector<uint32_t>{8, 10, 16, 20, 32});
    CHECK_FALSE(c.weights_synth.present);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("flat keys map onto fields") {
    nlohmann::json j = {
        {"engine", "mac"},         {"ks", 4},
        {"tree_latency", 3},       {"tree_overlap", true},
        {"splitters_per_unit", 8}, {"relu", false},
        {"jobs", 2},               {"seed", 99},
        {"stride", 2},             {"pad", 1},
        {"act_frac_bits", 6},      {"weights", "w.fxt"},
        {"input", "x.fxt"},        {"out", "results"},
        {"format", "csv"},         {"energy_model", "e.json"},
        {"ks_list", {1, 2, 3}},
    };
    RunConfig c = run_config_from_json(j);
    CHECK(c.engine == "mac");
    CHECK(c.ks == 4);
    CHECK(c.tree_latency == 3);
    CHECK(c.tree_overlap);
    CHECK(c.splitters_per_unit == 8);
    CHECK_FALSE(c.relu);
    CHECK(c.jobs == 2);
    CHECK(c.seed == 99);
    CHECK(c.stride == 2);
    CHECK(c.pad == 1);
    CHECK(c.act_frac_bits == 6);
    CHECK(c.weights_path == "w.fxt");
    CHECK(c.input_path == "x.fxt");
    CHECK(c.out_dir == "results");
    CHECK(c.format == "csv");
    CHECK(c.energy_model_path == "e.json");
    CHECK(c.ks_list == std::vector<uint32_t>{1, 2, 3});
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(run_config_from_json({{"engines", "mac"}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"kneading_stride", 16}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json::array()), std::invalid_argument);
}

TEST_CASE("synthesis blocks parse from prefixed keys") {
    nlohmann::json j = {
        {"weights_synth_shape", {4, 2, 3, 3}},
        {"weights_synth_dist", "sparse"},
        {"weights_synth_p_zero", 0.6},
        {"weights_synth_bitwidth", 8},
        {"weights_synth_frac_bits", 7},
        {"input_synth_shape", {1, 2, 8, 8}},
        {"input_synth_dist", "per-bit-bernoulli"},
        {"input_synth_density", 0.311},
    };
    RunConfig c = run_config_from_json(j);
    REQUIRE(c.weights_synth.present);
    CHECK(c.weights_synth.shape == std::vector<uint32_t>{4, 2, 3, 3});
    CHECK(c.weights_synth.to_dist().kind == DistKind::Sparse);
    CHECK(c.weights_synth.to_dist().p_zero == 0.6);
    CHECK(c.weights_synth.to_spec().bitwidth == 8);
    REQUIRE(c.input_synth.present);
    CHECK(c.input_synth.to_dist().kind == DistKind::PerBitBernoulli);
    CHECK(c.input_synth.to_dist().density == 0.311);
    CHECK_THROWS_AS([&] {
        SynthSpec s;
        s.dist = "gaussian";
        s.to_dist();
    }(), std::invalid_argument);
}

TEST_CASE("network layers parse with per-layer conv parameters") {
    nlohmann::json j = {{"network",
                         {{{"weights", "l0.fxt"}, {"stride", 2}},
                          {{"weights", "l1.fxt"}, {"pad", 1}}}}};
    RunConfig c = run_config_from_json(j);
    REQUIRE(c.network.size() == 2);
    CHECK(c.network[0].weights_path == "l0.fxt");
    CHECK(c.network[0].stride == 2);
    CHECK(c.network[0].pad == 0);
    CHECK(c.network[1].weights_path == "l1.fxt");
    CHECK(c.network[1].stride == 1);
    CHECK(c.network[1].pad == 1);
}

TEST_CASE("validate guards the value ranges") {
    RunConfig c;
    c.engine = "warp";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.ks = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.format = "yaml";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.jobs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.ks_list = {4, 0};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config echo covers every effective field") {
    RunConfig c;
    c.engine = "bitserial";
    c.seed = 7;
    nlohmann::json j = c.to_json();
    CHECK(j["engine"] == "bitserial");
    CHECK(j["seed"] == 7);
    CHECK(j["ks"] == 16);
    CHECK(j["relu"] == true);
    // An echoed config parses back to an equivalent one.
    RunConfig back = run_config_from_json(j);
    CHECK(back.engine == c.engine);
    CHECK(back.seed == c.seed);
    CHECK(back.ks_list == c.ks_list);
}

TEST_CASE("config files load with clear errors") {
    namespace fs = std::filesystem;
    fs::path good = fs::temp_directory_path() / "tetris_cfg_good.json";
    {
        std::ofstream out(good);
        out << R"({"engine": "mac", "ks": 2})";
    }
    RunConfig c = load_run_config(good.string());
    CHECK(c.engine == "mac");
    CHECK(c.ks == 2);
    fs::remove(good);

    CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), FormatError);

    fs::path bad = fs::temp_directory_path() / "tetris_cfg_bad.json";
    {
        std::ofstream out(bad);
        out << "{not json";
    }
    CHECK_THROWS_AS(load_run_config(bad.string()), std::invalid_argument);
    fs::remove(bad);
}

TEST_CASE("comma lists parse strictly") {
    CHECK(parse_uint_list("8,16,32") == std::vector<uint32_t>{8, 16, 32});
    CHECK(parse_uint_list("5") == std::vector<uint32_t>{5});
    CHECK(parse_uint_list("1,2,") == std::vector<uint32_t>{1, 2});
    CHECK_THROWS_AS(parse_uint_list("a,b"), std::invalid_argument);
    CHECK_THROWS_AS(parse_uint_list("3x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_uint_list(""), std::invalid_argument);
}
