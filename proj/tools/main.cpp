// tetris-sim: drives the kneading + SAC pipeline and its baselines over
// FXT1 tensors, emitting cycle, bit-statistics, and sweep reports.

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tetris/bitstats.hpp"
#include "tetris/energy.hpp"
#include "tetris/engines.hpp"
#include "tetris/errors.hpp"
#include "tetris/fixed_tensor.hpp"
#include "tetris/kneading.hpp"
#include "tetris/run_config.hpp"
#include "tetris/sac.hpp"
#include "tetris/sim.hpp"

namespace fs = std::filesystem;
using namespace tetris;

namespace {

// Exit code categories (documented in the README).
constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitIo = 3;
constexpr int kExitConfig = 4;
constexpr int kExitOverflow = 5;

struct OutputFile {
    fs::path path;
    std::string bytes;
};

// All outputs of one action are staged in memory and flushed together, so
// a failing run leaves no partial files behind.
class OutputStage {
public:
    void add(fs::path path, std::string bytes) {
        files_.push_back({std::move(path), std::move(bytes)});
    }
    void flush() {
        for (const OutputFile& f : files_) {
            if (f.path.has_parent_path()) fs::create_directories(f.path.parent_path());
            fs::path tmp = f.path;
            tmp += ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw FormatError(FormatErrc::IoFailure,
                                            "cannot open for writing: " + tmp.string());
                out.write(f.bytes.data(), std::streamsize(f.bytes.size()));
                if (!out)
                    throw FormatError(FormatErrc::IoFailure, "write failed: " + tmp.string());
            }
            fs::rename(tmp, f.path);
        }
    }

private:
    std::vector<OutputFile> files_;
};

std::string tensor_bytes(const FixedTensor& t) {
    std::vector<uint8_t> b = encode_fxt1(t);
    return std::string(b.begin(), b.end());
}

// Distinct deterministic stream for input synthesis under one seed.
uint64_t input_seed(uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ull; }

struct CommonCli {
    std::string config_path;
    RunConfig flags;     // flag values (defaults overwritten by CLI11)
    std::string ks_csv;  // sweep only

    CLI::Option* o_engine = nullptr;
    CLI::Option* o_ks = nullptr;
    CLI::Option* o_ks_csv = nullptr;
    CLI::Option* o_tree_latency = nullptr;
    CLI::Option* o_tree_overlap = nullptr;
    CLI::Option* o_splitters = nullptr;
    CLI::Option* o_relu = nullptr;
    CLI::Option* o_jobs = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_stride = nullptr;
    CLI::Option* o_pad = nullptr;
    CLI::Option* o_act_frac = nullptr;
    CLI::Option* o_weights = nullptr;
    CLI::Option* o_input = nullptr;
    CLI::Option* o_out = nullptr;
    CLI::Option* o_format = nullptr;
    CLI::Option* o_energy = nullptr;

    void attach(CLI::App* cmd, bool sweep_ks_list = false) {
        cmd->add_option("--config", config_path, "JSON config file (flags override it)");
        o_engine = cmd->add_option("--engine", flags.engine,
                                   "engine: tetris-fp16|tetris-int8|mac|bitserial");
        if (sweep_ks_list) {
            o_ks_csv = cmd->add_option("--ks", ks_csv, "comma-separated kneading strides");
        } else {
            o_ks = cmd->add_option("--ks", flags.ks, "kneading stride");
        }
        o_tree_latency =
            cmd->add_option("--tree-latency", flags.tree_latency, "rear tree charge per lane");
        o_tree_overlap = cmd->add_flag("--tree-overlap", flags.tree_overlap,
                                       "overlap rear tree with the next lane");
        o_splitters = cmd->add_option("--splitters-per-unit", flags.splitters_per_unit,
                                      "lanes per PE step in the wall-cycle estimate");
        o_relu = cmd->add_flag("--relu,!--no-relu", flags.relu, "apply ReLU to layer outputs");
        o_jobs = cmd->add_option("--jobs", flags.jobs, "worker threads (1 = reference order)");
        o_seed = cmd->add_option("--seed", flags.seed, "64-bit seed for synthetic tensors");
        o_stride = cmd->add_option("--stride", flags.stride, "convolution stride");
        o_pad = cmd->add_option("--pad", flags.pad, "zero padding");
        o_act_frac = cmd->add_option("--act-frac-bits", flags.act_frac_bits,
                                     "fraction bits of requantized activations");
        o_weights = cmd->add_option("--weights", flags.weights_path, "FXT1 weight tensor (FCKK)");
        o_input = cmd->add_option("--input", flags.input_path, "FXT1 input tensor (NCHW)");
        o_out = cmd->add_option("--out", flags.out_dir, "output directory");
        o_format = cmd->add_option("--format", flags.format, "report format: json|csv");
        o_energy = cmd->add_option("--energy-model", flags.energy_model_path,
                                   "JSON per-event cost table");
    }

    RunConfig merged() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        auto take = [](CLI::Option* o) { return o != nullptr && o->count() > 0; };
        if (take(o_engine)) cfg.engine = flags.engine;
        if (take(o_ks)) cfg.ks = flags.ks;
        if (take(o_ks_csv)) cfg.ks_list = parse_uint_list(ks_csv);
        if (take(o_tree_latency)) cfg.tree_latency = flags.tree_latency;
        if (take(o_tree_overlap)) cfg.tree_overlap = flags.tree_overlap;
        if (take(o_splitters)) cfg.splitters_per_unit = flags.splitters_per_unit;
        if (take(o_relu)) cfg.relu = flags.relu;
        if (take(o_jobs)) cfg.jobs = flags.jobs;
        if (take(o_seed)) cfg.seed = flags.seed;
        if (take(o_stride)) cfg.stride = flags.stride;
        if (take(o_pad)) cfg.pad = flags.pad;
        if (take(o_act_frac)) cfg.act_frac_bits = flags.act_frac_bits;
        if (take(o_weights)) cfg.weights_path = flags.weights_path;
        if (take(o_input)) cfg.input_path = flags.input_path;
        if (take(o_out)) cfg.out_dir = flags.out_dir;
        if (take(o_format)) cfg.format = flags.format;
        if (take(o_energy)) cfg.energy_model_path = flags.energy_model_path;
        cfg.validate();
        return cfg;
    }
};

SimConfig sim_config(const RunConfig& cfg) {
    SimConfig s;
    s.engine = engine_from_name(cfg.engine);
    s.ks = cfg.ks;
    s.tree_latency = cfg.tree_latency;
    s.tree_overlap = cfg.tree_overlap;
    s.splitters_per_unit = cfg.splitters_per_unit;
    s.relu = cfg.relu;
    s.jobs = cfg.jobs;
    return s;
}

FixedTensor load_weights(const RunConfig& cfg) {
    if (!cfg.weights_path.empty()) return load_tensor(cfg.weights_path);
    if (cfg.weights_synth.present)
        return synth_tensor(cfg.weights_synth.shape, cfg.weights_synth.to_spec(),
                            cfg.weights_synth.to_dist(), cfg.seed);
    throw std::invalid_argument("no weights: give --weights or a weights_synth_* config");
}

FixedTensor load_input(const RunConfig& cfg) {
    if (!cfg.input_path.empty()) return load_tensor(cfg.input_path);
    if (cfg.input_synth.present)
        return synth_tensor(cfg.input_synth.shape, cfg.input_synth.to_spec(),
                            cfg.input_synth.to_dist(), input_seed(cfg.seed));
    throw std::invalid_argument("no input: give --input or an input_synth_* config");
}

QuantSpec act_spec_for(const RunConfig& cfg, int bitwidth) {
    QuantSpec s = QuantSpec::activation_default(bitwidth);
    if (cfg.act_frac_bits >= 0) s.frac_bits = cfg.act_frac_bits;
    s.validate();
    return s;
}

std::string config_csv_comment(const RunConfig& cfg) {
    std::string out;
    nlohmann::json j = cfg.to_json();
    out += "# config " + j.dump() + "\n";
    return out;
}

// ---------------------------------------------------------------- synth --

struct SynthCli {
    std::string shape_csv;
    std::string dist = "uniform";
    double density = 0.5;
    double p_zero = 0.0;
    std::string base = "uniform";
    int bitwidth = 16;
    int frac_bits = -1;
    uint64_t seed = 1;
    std::string out_dir = "out";
    std::string name = "synth.fxt";
};

int cmd_synth(const SynthCli& c) {
    SynthSpec s;
    s.present = true;
    for (uint32_t d : parse_uint_list(c.shape_csv)) s.shape.push_back(d);
    s.dist = c.dist;
    s.density = c.density;
    s.p_zero = c.p_zero;
    s.base = c.base;
    s.bitwidth = c.bitwidth;
    s.frac_bits = c.frac_bits >= 0 ? c.frac_bits : c.bitwidth - 1;

    FixedTensor t = synth_tensor(s.shape, s.to_spec(), s.to_dist(), c.seed);
    OutputStage stage;
    fs::path path = fs::path(c.out_dir) / c.name;
    stage.add(path, tensor_bytes(t));
    stage.flush();
    std::cout << "wrote " << path.string() << " (" << t.size() << " elements, B="
              << t.bitwidth() << ", f=" << t.frac_bits() << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------- stats --

int cmd_stats(const CommonCli& cli) {
    RunConfig cfg = cli.merged();
    FixedTensor t = load_weights(cfg);
    BitReport r = bit_report(t);

    std::string body;
    std::string filename;
    if (cfg.format == "csv") {
        body = config_csv_comment(cfg) + bit_report_csv(r);
        filename = "stats.csv";
    } else {
        nlohmann::json j = nlohmann::json::parse(bit_report_json(r));
        j["config"] = cfg.to_json();
        body = j.dump(2) + "\n";
        filename = "stats.json";
    }
    std::cout << body;
    if (cli.o_out->count() > 0 || !cfg.out_dir.empty()) {
        OutputStage stage;
        stage.add(fs::path(cfg.out_dir) / filename, body);
        stage.flush();
    }
    return kExitOk;
}

// ---------------------------------------------------------------- knead --

int cmd_knead(const CommonCli& cli, bool dump_lanes) {
    RunConfig cfg = cli.merged();
    FixedTensor t = load_weights(cfg);

    // A 4-D FCKK tensor kneads one lane per filter; anything else is a
    // single lane over the flat data.
    uint64_t lanes = t.ndim() == 4 ? t.dim(0) : 1;
    uint64_t lane_len = t.size() / lanes;
    int columns = t.magnitude_bits();

    uint64_t total_words = 0, total_entries = 0, total_bits = 0;
    nlohmann::json lane_dump = nlohmann::json::array();
    std::vector<std::array<uint64_t, 2>> per_lane;  // words, entries
    for (uint64_t li = 0; li < lanes; ++li) {
        std::span<const int16_t> w = t.values().subspan(li * lane_len, lane_len);
        KneadedLane lane = knead_lane(w, cfg.ks, columns);
        if (auto v = validate_kneading(w, lane)) {
            std::cerr << "kneading validation failed at lane " << li << " group " << v->group
                      << " column " << v->column << ": " << v->detail << "\n";
            return kExitOther;
        }
        uint64_t words = lane.word_count();
        uint64_t entries = 0;
        for (const KneadedGroup& g : lane.groups)
            for (const KneadedWord& word : g.words) entries += uint64_t(word.entry_count());
        total_words += words;
        total_entries += entries;
        per_lane.push_back({words, entries});
        if (dump_lanes) lane_dump.push_back(nlohmann::json::parse(kneaded_lane_json(lane)));
    }
    for (int16_t v : t.values()) {
        uint32_t mag = uint32_t(v < 0 ? -int32_t(v) : int32_t(v));
        total_bits += uint64_t(std::popcount(mag));
    }

    nlohmann::json j;
    j["lanes"] = lanes;
    j["lane_length"] = lane_len;
    j["ks"] = cfg.ks;
    j["pointer_bits"] = pointer_bits(cfg.ks);
    j["total_weights"] = t.size();
    j["essential_bits"] = total_bits;
    j["kneaded_words"] = total_words;
    j["kneaded_entries"] = total_entries;
    j["words_per_weight"] = t.size() == 0 ? 0.0 : double(total_words) / double(t.size());
    j["validated"] = true;
    j["config"] = cfg.to_json();

    std::string body;
    std::string filename;
    if (cfg.format == "csv") {
        std::string csv = config_csv_comment(cfg);
        csv += "lane,words,entries\n";
        for (uint64_t li = 0; li < per_lane.size(); ++li)
            csv += std::to_string(li) + "," + std::to_string(per_lane[li][0]) + "," +
                   std::to_string(per_lane[li][1]) + "\n";
        body = csv;
        filename = "knead.csv";
    } else {
        body = j.dump(2) + "\n";
        filename = "knead.json";
    }
    std::cout << body;

    OutputStage stage;
    stage.add(fs::path(cfg.out_dir) / filename, body);
    if (dump_lanes)
        stage.add(fs::path(cfg.out_dir) / "lanes.json", lane_dump.dump(2) + "\n");
    stage.flush();
    return kExitOk;
}

// ------------------------------------------------------------------ run --

int cmd_run(const CommonCli& cli) {
    RunConfig cfg = cli.merged();
    SimConfig sim = sim_config(cfg);
    FixedTensor input = load_input(cfg);
    OutputStage stage;

    std::vector<CycleReport> reports;
    FixedTensor final_out;
    if (!cfg.network.empty()) {
        std::vector<NetLayer> layers;
        for (const NetLayerSpec& l : cfg.network)
            layers.push_back(NetLayer{load_tensor(l.weights_path),
                                      ConvParams{l.stride, l.pad}});
        QuantSpec act = act_spec_for(cfg, input.bitwidth());
        NetworkResult net = run_network(layers, input, sim, act);
        reports = std::move(net.reports);
        final_out = std::move(net.activations);
    } else {
        FixedTensor weights = load_weights(cfg);
        LayerResult lr = run_layer(input, weights, ConvParams{cfg.stride, cfg.pad}, sim);
        QuantSpec act = act_spec_for(cfg, input.bitwidth());
        final_out = requantize(lr.output, weights.frac_bits() + input.frac_bits(), act);
        reports.push_back(std::move(lr.report));
    }

    if (cfg.format == "csv") {
        std::string csv = config_csv_comment(cfg) + cycle_report_csv_header() + "\n";
        for (const CycleReport& r : reports) csv += cycle_report_csv_row(r) + "\n";
        stage.add(fs::path(cfg.out_dir) / "report.csv", csv);
    } else {
        nlohmann::json j;
        j["config"] = cfg.to_json();
        nlohmann::json layers = nlohmann::json::array();
        for (const CycleReport& r : reports) layers.push_back(cycle_report_json(r));
        j["layers"] = std::move(layers);
        stage.add(fs::path(cfg.out_dir) / "report.json", j.dump(2) + "\n");
    }
    for (size_t i = 0; i < reports.size(); ++i)
        stage.add(fs::path(cfg.out_dir) / ("lanes_layer" + std::to_string(i) + ".csv"),
                  config_csv_comment(cfg) + lane_log_csv(reports[i]));
    stage.add(fs::path(cfg.out_dir) / "output.fxt", tensor_bytes(final_out));
    stage.flush();

    uint64_t cycles = 0;
    for (const CycleReport& r : reports) cycles += r.cycles;
    std::cout << "engine " << cfg.engine << ": " << reports.size() << " layer(s), " << cycles
              << " cycles, output " << (fs::path(cfg.out_dir) / "output.fxt").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- sweep --

int cmd_sweep(const CommonCli& cli) {
    RunConfig cfg = cli.merged();
    SimConfig sim = sim_config(cfg);
    FixedTensor input = load_input(cfg);
    FixedTensor weights = load_weights(cfg);

    std::vector<SweepRow> rows =
        sweep_ks(input, weights, ConvParams{cfg.stride, cfg.pad}, cfg.ks_list, sim);

    std::string csv = config_csv_comment(cfg) + "ks,cycles,ratio\n";
    char buf[64];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%u,%llu,%.17g\n", r.ks,
                      static_cast<unsigned long long>(r.cycles), r.ratio);
        csv += buf;
    }
    OutputStage stage;
    if (cfg.format == "csv") {
        stage.add(fs::path(cfg.out_dir) / "sweep.csv", csv);
    } else {
        nlohmann::json j;
        j["config"] = cfg.to_json();
        nlohmann::json jrows = nlohmann::json::array();
        for (const SweepRow& r : rows)
            jrows.push_back({{"ks", r.ks}, {"cycles", r.cycles}, {"ratio", r.ratio}});
        j["rows"] = std::move(jrows);
        stage.add(fs::path(cfg.out_dir) / "sweep.json", j.dump(2) + "\n");
    }
    stage.flush();
    std::cout << "ks,cycles,ratio\n";
    for (const SweepRow& r : rows)
        std::cout << r.ks << "," << r.cycles << "," << r.ratio << "\n";
    return kExitOk;
}

// -------------------------------------------------------------- compare --

int cmd_compare(const CommonCli& cli) {
    RunConfig cfg = cli.merged();
    FixedTensor input = load_input(cfg);
    FixedTensor weights = load_weights(cfg);
    EnergyModel energy = cfg.energy_model_path.empty()
                             ? EnergyModel{}
                             : EnergyModel::from_json_file(cfg.energy_model_path);

    std::vector<EngineKind> engines = {EngineKind::MacParallel, EngineKind::BitSerialEssential,
                                       weights.bitwidth() == 8 ? EngineKind::TetrisInt8
                                                               : EngineKind::TetrisFp16};
    ConvParams conv{cfg.stride, cfg.pad};

    std::vector<LayerResult> results;
    for (EngineKind e : engines) {
        SimConfig sim = sim_config(cfg);
        sim.engine = e;
        results.push_back(run_layer(input, weights, conv, sim));
    }

    // Engines differ only in cycles; outputs must agree with the oracle.
    AccumTensor ref = reference_conv(input, weights, conv);
    if (sim_config(cfg).relu) ref = relu(ref);
    for (size_t i = 0; i < results.size(); ++i) {
        if (!(results[i].output == ref))
            throw std::runtime_error("engine " + engine_name(engines[i]) +
                                     " diverged from the reference convolution");
    }

    double mac_cycles = double(results[0].report.cycles);
    double mac_edp = edp(results[0].report, energy);
    nlohmann::json j;
    j["config"] = cfg.to_json();
    j["energy_model"] = energy.to_json();
    j["outputs_identical"] = true;
    nlohmann::json jengines = nlohmann::json::array();
    std::string csv = config_csv_comment(cfg) +
                      "engine,cycles,pe_step_cycles,speedup_vs_mac,edp,edp_vs_mac\n";
    for (size_t i = 0; i < results.size(); ++i) {
        const CycleReport& r = results[i].report;
        double e = edp(r, energy);
        nlohmann::json je = cycle_report_json(r);
        je["speedup_vs_mac"] = mac_cycles / double(r.cycles);
        je["edp"] = e;
        je["edp_vs_mac"] = mac_edp == 0.0 ? 0.0 : e / mac_edp;
        jengines.push_back(std::move(je));
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%.6g,%.6g,%.6g\n",
                      engine_name(engines[i]).c_str(),
                      static_cast<unsigned long long>(r.cycles),
                      static_cast<unsigned long long>(r.pe_step_cycles),
                      mac_cycles / double(r.cycles), e, mac_edp == 0.0 ? 0.0 : e / mac_edp);
        csv += buf;
    }
    j["engines"] = std::move(jengines);

    OutputStage stage;
    if (cfg.format == "csv") {
        stage.add(fs::path(cfg.out_dir) / "compare.csv", csv);
    } else {
        stage.add(fs::path(cfg.out_dir) / "compare.json", j.dump(2) + "\n");
    }
    stage.flush();

    std::cout << "engine,cycles,speedup_vs_mac,edp_vs_mac\n";
    for (size_t i = 0; i < results.size(); ++i) {
        const CycleReport& r = results[i].report;
        double e = edp(r, energy);
        std::cout << engine_name(engines[i]) << "," << r.cycles << ","
                  << mac_cycles / double(r.cycles) << ","
                  << (mac_edp == 0.0 ? 0.0 : e / mac_edp) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cycle-level model of the kneading + split-and-accumulate conv pipeline"};
    app.require_subcommand(1);

    SynthCli synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate an FXT1 tensor");
    synth_cmd->add_option("--shape", synth.shape_csv, "comma-separated dims")->required();
    synth_cmd->add_option("--dist", synth.dist, "uniform|per-bit-bernoulli|sparse");
    synth_cmd->add_option("--density", synth.density, "per-bit-bernoulli bit density");
    synth_cmd->add_option("--p-zero", synth.p_zero, "sparse zero probability");
    synth_cmd->add_option("--base", synth.base, "sparse base distribution");
    synth_cmd->add_option("--bitwidth", synth.bitwidth, "8 or 16");
    synth_cmd->add_option("--frac-bits", synth.frac_bits, "fraction bits (default B-1)");
    synth_cmd->add_option("--seed", synth.seed, "64-bit seed");
    synth_cmd->add_option("--out", synth.out_dir, "output directory");
    synth_cmd->add_option("--name", synth.name, "output file name");

    CommonCli stats_cli, knead_cli, run_cli, sweep_cli, compare_cli;
    bool dump_lanes = false;

    CLI::App* stats_cmd = app.add_subcommand("stats", "bit statistics of a tensor");
    stats_cli.attach(stats_cmd);
    CLI::App* knead_cmd = app.add_subcommand("knead", "knead weights and report metrics");
    knead_cli.attach(knead_cmd);
    knead_cmd->add_flag("--dump-lanes", dump_lanes, "also dump kneaded lanes as JSON");
    CLI::App* run_cmd = app.add_subcommand("run", "run a layer or network on one engine");
    run_cli.attach(run_cmd);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "kneading-stride sweep");
    sweep_cli.attach(sweep_cmd, /*sweep_ks_list=*/true);
    CLI::App* compare_cmd = app.add_subcommand("compare", "all engines side by side");
    compare_cli.attach(compare_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (stats_cmd->parsed()) return cmd_stats(stats_cli);
        if (knead_cmd->parsed()) return cmd_knead(knead_cli, dump_lanes);
        if (run_cmd->parsed()) return cmd_run(run_cli);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_cli);
        if (compare_cmd->parsed()) return cmd_compare(compare_cli);
    } catch (const OverflowError& e) {
        std::cerr << "overflow error: " << e.what() << "\n";
        return kExitOverflow;
    } catch (const FormatError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
