#include "tetris/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tetris/engines.hpp"
#include "tetris/errors.hpp"

namespace tetris {

namespace {

DistKind dist_from_name(const std::string& name) {
    if (name == "uniform") return DistKind::Uniform;
    if (name == "per-bit-bernoulli") return DistKind::PerBitBernoulli;
    if (name == "sparse") return DistKind::Sparse;
    throw std::invalid_argument("unknown distribution: " + name);
}

SynthSpec synth_from_json(const nlohmann::json& j, const std::string& prefix) {
    SynthSpec s;
    if (!j.contains(prefix + "_shape")) return s;
    s.present = true;
    s.shape = j.at(prefix + "_shape").get<std::vector<uint32_t>>();
    if (j.contains(prefix + "_dist")) s.dist = j.at(prefix + "_dist").get<std::string>();
    if (j.contains(prefix + "_density")) s.density = j.at(prefix + "_density").get<double>();
    if (j.contains(prefix + "_p_zero")) s.p_zero = j.at(prefix + "_p_zero").get<double>();
    if (j.contains(prefix + "_base")) s.base = j.at(prefix + "_base").get<std::string>();
    if (j.contains(prefix + "_bitwidth")) s.bitwidth = j.at(prefix + "_bitwidth").get<int>();
    if (j.contains(prefix + "_frac_bits")) s.frac_bits = j.at(prefix + "_frac_bits").get<int>();
    return s;
}

const std::vector<std::string> kKnownKeys = {
    "engine",        "ks",          "tree_latency",  "tree_overlap", "splitters_per_unit",
    "relu",          "jobs",        "seed",          "stride",       "pad",
    "act_frac_bits", "weights",     "input",         "out",          "format",
    "energy_model",  "ks_list",     "network",
};

bool known_key(const std::string& key) {
    for (const auto& k : kKnownKeys)
        if (key == k) return true;
    for (const char* prefix : {"weights_synth_", "input_synth_"})
        if (key.rfind(prefix, 0) == 0) return true;
    return false;
}

}  // namespace

SynthDist SynthSpec::to_dist() const {
    SynthDist d;
    d.kind = dist_from_name(dist);
    d.density = density;
    d.p_zero = p_zero;
    d.base = dist_from_name(base);
    return d;
}

QuantSpec SynthSpec::to_spec() const { return QuantSpec{bitwidth, frac_bits}; }

void RunConfig::validate() const {
    engine_from_name(engine);
    if (ks < 1) throw std::invalid_argument("ks must be >= 1");
    if (splitters_per_unit < 1) throw std::invalid_argument("splitters_per_unit must be >= 1");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    if (format != "json" && format != "csv")
        throw std::invalid_argument("format must be json or csv");
    for (uint32_t k : ks_list)
        if (k < 1) throw std::invalid_argument("every ks in ks_list must be >= 1");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["engine"] = engine;
    j["ks"] = ks;
    j["tree_latency"] = tree_latency;
    j["tree_overlap"] = tree_overlap;
    j["splitters_per_unit"] = splitters_per_unit;
    j["relu"] = relu;
    j["jobs"] = jobs;
    j["seed"] = seed;
    j["stride"] = stride;
    j["pad"] = pad;
    j["act_frac_bits"] = act_frac_bits;
    j["weights"] = weights_path;
    j["input"] = input_path;
    j["out"] = out_dir;
    j["format"] = format;
    j["energy_model"] = energy_model_path;
    j["ks_list"] = ks_list;
    if (!network.empty()) {
        nlohmann::json layers = nlohmann::json::array();
        for (const NetLayerSpec& l : network)
            layers.push_back(
                {{"weights", l.weights_path}, {"stride", l.stride}, {"pad", l.pad}});
        j["network"] = std::move(layers);
    }
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known_key(key)) throw std::invalid_argument("unknown config key: " + key);
    }
    RunConfig c;
    if (j.contains("engine")) c.engine = j.at("engine").get<std::string>();
    if (j.contains("ks")) c.ks = j.at("ks").get<uint32_t>();
    if (j.contains("tree_latency")) c.tree_latency = j.at("tree_latency").get<uint64_t>();
    if (j.contains("tree_overlap")) c.tree_overlap = j.at("tree_overlap").get<bool>();
    if (j.contains("splitters_per_unit"))
        c.splitters_per_unit = j.at("splitters_per_unit").get<uint32_t>();
    if (j.contains("relu")) c.relu = j.at("relu").get<bool>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<uint32_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("stride")) c.stride = j.at("stride").get<uint32_t>();
    if (j.contains("pad")) c.pad = j.at("pad").get<uint32_t>();
    if (j.contains("act_frac_bits")) c.act_frac_bits = j.at("act_frac_bits").get<int>();
    if (j.contains("weights")) c.weights_path = j.at("weights").get<std::string>();
    if (j.contains("input")) c.input_path = j.at("input").get<std::string>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("format")) c.format = j.at("format").get<std::string>();
    if (j.contains("energy_model")) c.energy_model_path = j.at("energy_model").get<std::string>();
    if (j.contains("ks_list")) c.ks_list = j.at("ks_list").get<std::vector<uint32_t>>();
    c.weights_synth = synth_from_json(j, "weights_synth");
    c.input_synth = synth_from_json(j, "input_synth");
    if (j.contains("network")) {
        for (const auto& layer : j.at("network")) {
            NetLayerSpec l;
            l.weights_path = layer.at("weights").get<std::string>();
            if (layer.contains("stride")) l.stride = layer.at("stride").get<uint32_t>();
            if (layer.contains("pad")) l.pad = layer.at("pad").get<uint32_t>();
            c.network.push_back(std::move(l));
        }
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrc::IoFailure, "cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

std::vector<uint32_t> parse_uint_list(const std::string& csv) {
    std::vector<uint32_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        size_t pos = 0;
        unsigned long v = std::stoul(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("bad integer in list: " + item);
        out.push_back(uint32_t(v));
    }
    if (out.empty()) throw std::invalid_argument("empty integer list");
    return out;
}

}  // namespace tetris
