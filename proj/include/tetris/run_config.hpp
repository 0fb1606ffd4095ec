#ifndef TETRIS_RUN_CONFIG_HPP
#define TETRIS_RUN_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tetris/fixed_tensor.hpp"

namespace tetris {

// Synthetic tensor request, config-file driven ("weights_synth_*" keys).
struct SynthSpec {
    bool present = false;
    std::vector<uint32_t> shape;
    std::string dist = "uniform";  // uniform | per-bit-bernoulli | sparse
    double density = 0.5;
    double p_zero = 0.0;
    std::string base = "uniform";
    int bitwidth = 16;
    int frac_bits = 15;

    SynthDist to_dist() const;
    QuantSpec to_spec() const;
};

struct NetLayerSpec {
    std::string weights_path;
    uint32_t stride = 1;
    uint32_t pad = 0;
};

/// Effective experiment configuration: JSON config file with flat keys,
// overridden field-by-field by command-line flags. Echoed into every
// report for provenance.
struct RunConfig {
    std::string engine = "tetris-fp16";
    uint32_t ks = 16;
    uint64_t tree_latency = 1;
    bool tree_overlap = false;
    uint32_t splitters_per_unit = 16;
    bool relu = true;
    uint32_t jobs = 1;
    uint64_t seed = 1;
    uint32_t stride = 1;
    uint32_t pad = 0;
    int act_frac_bits = -1;  // -1: activation default for the bitwidth
    std::string weights_path;
    std::string input_path;
    std::string out_dir = "out";
    std::string format = "json";  // json | csv
    std::string energy_model_path;
    std::vector<uint32_t> ks_list = {8, 10, 16, 20, 32};
    SynthSpec weights_synth;
    SynthSpec input_synth;
    std::vector<NetLayerSpec> network;

    void validate() const;
    nlohmann::json to_json() const;
};

// Parses a config file; unknown keys are rejected.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const nlohmann::json& j);

std::vector<uint32_t> parse_uint_list(const std::string& csv);

}  // namespace tetris

#endif
