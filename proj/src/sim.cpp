#include "tetris/sim.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tetris/errors.hpp"
#include "tetris/kneading.hpp"
#include "tetris/sac.hpp"

namespace tetris {

namespace {

// Runs fn(begin, end) over [0, n) on `jobs` threads with contiguous
// partitions; results must be written to per-index slots so the reduction
// stays deterministic.
template <typename Fn>
void parallel_ranges(uint64_t n, uint32_t jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        fn(uint64_t{0}, n);
        return;
    }
    uint32_t workers = uint32_t(std::min<uint64_t>(jobs, n));
    uint64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    for (uint32_t t = 0; t < workers; ++t) {
        uint64_t begin = uint64_t(t) * chunk;
        uint64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

void check_engine_bitwidth(EngineKind engine, int bitwidth) {
    if (engine == EngineKind::TetrisFp16 && bitwidth != 16)
        throw std::invalid_argument("tetris-fp16 needs 16-bit tensors");
    if (engine == EngineKind::TetrisInt8 && bitwidth != 8)
        throw std::invalid_argument("tetris-int8 needs 8-bit tensors");
}

struct UnitResult {
    uint64_t cycles = 0;
    EventCounts events;
};

}  // namespace

LaneStream lower_conv(const FixedTensor& input, const FixedTensor& weights,
                      const ConvParams& params) {
    LayerGeometry g = conv_geometry(input, weights, params);
    if (input.bitwidth() != weights.bitwidth())
        throw std::invalid_argument("input and weight bitwidths differ");

    LaneStream stream;
    stream.geom = g;
    stream.lanes.resize(g.lane_count());
    uint64_t len = g.lane_length();

    parallel_ranges(g.lane_count(), 1, [&](uint64_t begin, uint64_t end) {
        for (uint64_t li = begin; li < end; ++li) {
            uint32_t ox = uint32_t(li % g.w_out);
            uint32_t oy = uint32_t(li / g.w_out % g.h_out);
            uint32_t f = uint32_t(li / (uint64_t(g.w_out) * g.h_out) % g.f);
            uint32_t n = uint32_t(li / (uint64_t(g.w_out) * g.h_out * g.f));

            Lane& lane = stream.lanes[li];
            lane.weights.reserve(len);
            lane.activations.reserve(len);
            for (uint32_t c = 0; c < g.c; ++c)
                for (uint32_t ky = 0; ky < g.k; ++ky)
                    for (uint32_t kx = 0; kx < g.k; ++kx) {
                        lane.weights.push_back(
                            weights[((size_t(f) * g.c + c) * g.k + ky) * g.k + kx]);
                        int64_t iy = int64_t(oy) * g.stride + ky - g.pad;
                        int64_t ix = int64_t(ox) * g.stride + kx - g.pad;
                        bool inside = iy >= 0 && iy < g.h && ix >= 0 && ix < g.w;
                        lane.activations.push_back(
                            inside ? input[((size_t(n) * g.c + c) * g.h + size_t(iy)) * g.w +
                                           size_t(ix)]
                                   : int16_t{0});
                    }
        }
    });
    return stream;
}

CycleReport run_lanes(const LaneStream& stream, const SimConfig& cfg, std::vector<int64_t>* sums) {
    if (cfg.ks < 1) throw std::invalid_argument("kneading stride must be >= 1");
    if (cfg.splitters_per_unit < 1)
        throw std::invalid_argument("splitters per unit must be >= 1");

    const LayerGeometry& g = stream.geom;
    uint64_t lane_count = stream.lanes.size();
    bool int8_mode = cfg.engine == EngineKind::TetrisInt8;
    bool tetris = int8_mode || cfg.engine == EngineKind::TetrisFp16;

    CycleReport report;
    report.engine = cfg.engine;
    report.lanes = lane_count;
    report.ks = cfg.ks;
    report.tree_latency = cfg.tree_latency;
    report.splitters_per_unit = cfg.splitters_per_unit;
    report.tree_overlap = cfg.tree_overlap;
    report.lane_accum_cycles.assign(lane_count, 0);

    for (const Lane& lane : stream.lanes) report.pairs += lane.weights.size();
    if (sums) sums->assign(lane_count, 0);

    SacConfig sac_cfg{cfg.tree_overlap ? 0 : cfg.tree_latency};
    uint64_t unit_count = int8_mode ? (lane_count + 1) / 2 : lane_count;
    std::vector<UnitResult> units(unit_count);

    int columns = int8_mode ? 7 : 15;

    // Filters knead once; every lane of filter f reuses the kneaded form
    // against its own activation window.
    std::vector<KneadedLane> filter_lanes;
    if (tetris) {
        filter_lanes.resize(g.f);
        uint64_t per_image = uint64_t(g.h_out) * g.w_out;
        std::vector<bool> done(g.f, false);
        for (uint64_t li = 0; li < lane_count; ++li) {
            uint32_t f = uint32_t(li / per_image % g.f);
            if (!done[f]) {
                filter_lanes[f] = knead_lane(stream.lanes[li].weights, cfg.ks, columns);
                done[f] = true;
            }
        }
    }
    auto filter_of = [&](uint64_t li) {
        return uint32_t(li / (uint64_t(g.h_out) * g.w_out) % g.f);
    };

    parallel_ranges(unit_count, cfg.jobs, [&](uint64_t begin, uint64_t end) {
        for (uint64_t u = begin; u < end; ++u) {
            UnitResult& unit = units[u];
            switch (cfg.engine) {
                case EngineKind::MacParallel: {
                    const Lane& lane = stream.lanes[u];
                    BaselineLaneRun r = mac_lane(lane.activations, lane.weights);
                    unit.cycles = r.cycles;
                    unit.events = r.events;
                    report.lane_accum_cycles[u] = r.cycles;
                    if (sums) (*sums)[u] = r.sum;
                    break;
                }
                case EngineKind::BitSerialEssential: {
                    const Lane& lane = stream.lanes[u];
                    BaselineLaneRun r = bitserial_lane(lane.activations, lane.weights);
                    unit.cycles = r.cycles;
                    unit.events = r.events;
                    report.lane_accum_cycles[u] = r.cycles;
                    if (sums) (*sums)[u] = r.sum;
                    break;
                }
                case EngineKind::TetrisFp16: {
                    const Lane& lane = stream.lanes[u];
                    LaneRun r = run_lane_fp16(filter_lanes[filter_of(u)], lane.activations,
                                              sac_cfg);
                    unit.cycles = r.cycles;
                    unit.events = r.events;
                    report.lane_accum_cycles[u] = r.accum_cycles;
                    if (sums) (*sums)[u] = r.sum;
                    break;
                }
                case EngineKind::TetrisInt8: {
                    uint64_t la = 2 * u;
                    uint64_t lb = 2 * u + 1;
                    const Lane& lane_a = stream.lanes[la];
                    KneadedLane empty_lane;
                    empty_lane.ks = cfg.ks;
                    empty_lane.columns = 7;
                    const std::vector<int16_t> no_acts;
                    bool has_b = lb < lane_count;
                    const KneadedLane& ka = filter_lanes[filter_of(la)];
                    const KneadedLane& kb = has_b ? filter_lanes[filter_of(lb)] : empty_lane;
                    LaneRunInt8 r = run_lane_int8(
                        ka, kb, lane_a.activations,
                        has_b ? std::span<const int16_t>(stream.lanes[lb].activations)
                              : std::span<const int16_t>(no_acts),
                        sac_cfg);
                    unit.cycles = r.cycles;
                    unit.events = r.events;
                    report.lane_accum_cycles[la] = ka.word_count();
                    if (has_b) report.lane_accum_cycles[lb] = kb.word_count();
                    if (sums) {
                        (*sums)[la] = r.sum_a;
                        if (has_b) (*sums)[lb] = r.sum_b;
                    }
                    break;
                }
            }
        }
    });

    report.unit_cycles.resize(unit_count);
    for (uint64_t u = 0; u < unit_count; ++u) {
        report.unit_cycles[u] = units[u].cycles;
        report.cycles += units[u].cycles;
        report.events += units[u].events;
    }
    report.accum_cycles = report.cycles - report.events.tree_firings * sac_cfg.tree_latency;

    if (cfg.tree_overlap && tetris && report.events.tree_firings > 0) {
        // Pipelined rear tree: one drain charge at the end of the layer.
        report.cycles += cfg.tree_latency;
    }

    // Wall-cycle estimate with splitters_per_unit units in lockstep.
    for (uint64_t u = 0; u < unit_count; u += cfg.splitters_per_unit) {
        uint64_t hi = 0;
        for (uint64_t i = u; i < std::min<uint64_t>(unit_count, u + cfg.splitters_per_unit); ++i)
            hi = std::max(hi, report.unit_cycles[i]);
        report.pe_step_cycles += hi;
    }
    if (cfg.tree_overlap && tetris && report.events.tree_firings > 0)
        report.pe_step_cycles += cfg.tree_latency;

    return report;
}

LayerResult run_layer(const FixedTensor& input, const FixedTensor& weights,
                      const ConvParams& params, const SimConfig& cfg) {
    check_engine_bitwidth(cfg.engine, weights.bitwidth());
    LaneStream stream = lower_conv(input, weights, params);

    LayerResult result;
    std::vector<int64_t> sums;
    result.report = run_lanes(stream, cfg, &sums);
    result.output.shape = {stream.geom.n, stream.geom.f, stream.geom.h_out, stream.geom.w_out};
    result.output.data = std::move(sums);
    if (cfg.relu) result.output = relu(result.output);
    return result;
}

AccumTensor relu(const AccumTensor& t) {
    AccumTensor out = t;
    for (int64_t& v : out.data) v = std::max<int64_t>(v, 0);
    return out;
}

FixedTensor requantize(const AccumTensor& t, int source_frac_bits, const QuantSpec& out_spec) {
    out_spec.validate();
    if (source_frac_bits < 0) throw std::invalid_argument("source frac bits must be >= 0");
    int shift = source_frac_bits - out_spec.frac_bits;
    int64_t max = out_spec.range_max();

    std::vector<int16_t> data(t.size());
    for (size_t i = 0; i < t.data.size(); ++i) {
        int64_t v = t.data[i];
        int64_t q;
        if (shift <= 0) {
            if (shift < -48 || __builtin_mul_overflow(v, int64_t{1} << -shift, &q))
                throw OverflowError("requantize scale overflow");
        } else {
            // Floor division then round-half-even on the remainder.
            int64_t div = v >> shift;
            int64_t rem = v - (div << shift);
            int64_t half = int64_t{1} << (shift - 1);
            q = div;
            if (rem > half || (rem == half && (div & 1))) q += 1;
        }
        q = std::clamp(q, -max, max);
        data[i] = int16_t(q);
    }
    return FixedTensor::from_values(t.shape, std::move(data), out_spec);
}

std::vector<SweepRow> sweep_ks(const FixedTensor& input, const FixedTensor& weights,
                               const ConvParams& params, std::span<const uint32_t> ks_list,
                               const SimConfig& cfg) {
    if (ks_list.empty()) throw std::invalid_argument("ks list must be non-empty");
    if (cfg.engine != EngineKind::TetrisFp16 && cfg.engine != EngineKind::TetrisInt8)
        throw std::invalid_argument("ks sweep needs a tetris engine");
    check_engine_bitwidth(cfg.engine, weights.bitwidth());

    LaneStream stream = lower_conv(input, weights, params);
    uint64_t t_base = 0;  // kneading disabled: one MAC-equivalent pair per cycle
    for (const Lane& lane : stream.lanes) t_base += lane.weights.size();

    std::vector<SweepRow> rows;
    rows.reserve(ks_list.size());
    for (uint32_t ks : ks_list) {
        if (ks < 1) throw std::invalid_argument("every ks must be >= 1");
        SimConfig run_cfg = cfg;
        run_cfg.ks = ks;
        CycleReport r = run_lanes(stream, run_cfg, nullptr);
        rows.push_back(SweepRow{ks, r.cycles, t_base == 0 ? 0.0 : double(r.cycles) / double(t_base)});
    }
    return rows;
}

NetworkResult run_network(std::span<const NetLayer> layers, const FixedTensor& input,
                          const SimConfig& cfg, const QuantSpec& act_spec) {
    if (layers.empty()) throw std::invalid_argument("network needs at least one layer");
    NetworkResult result;
    FixedTensor current = input;
    for (const NetLayer& layer : layers) {
        LayerResult lr = run_layer(current, layer.weights, layer.conv, cfg);
        result.reports.push_back(std::move(lr.report));
        int source_frac = layer.weights.frac_bits() + current.frac_bits();
        current = requantize(lr.output, source_frac, act_spec);
    }
    result.activations = std::move(current);
    return result;
}

nlohmann::json cycle_report_json(const CycleReport& r) {
    nlohmann::json j;
    j["engine"] = engine_name(r.engine);
    j["cycles"] = r.cycles;
    j["accum_cycles"] = r.accum_cycles;
    j["pe_step_cycles"] = r.pe_step_cycles;
    j["lanes"] = r.lanes;
    j["pairs"] = r.pairs;
    j["events"] = {{"macs", r.events.macs},
                   {"words", r.events.words},
                   {"splitter_decodes", r.events.splitter_decodes},
                   {"segment_adds", r.events.segment_adds},
                   {"tree_firings", r.events.tree_firings},
                   {"buffer_reads", r.events.buffer_reads}};
    j["config"] = {{"ks", r.ks},
                   {"tree_latency", r.tree_latency},
                   {"splitters_per_unit", r.splitters_per_unit},
                   {"tree_overlap", r.tree_overlap}};
    return j;
}

std::string cycle_report_csv_header() {
    return "engine,cycles,accum_cycles,pe_step_cycles,lanes,pairs,macs,words,"
           "splitter_decodes,segment_adds,tree_firings,buffer_reads,ks,tree_latency";
}

std::string cycle_report_csv_row(const CycleReport& r) {
    std::ostringstream out;
    out << engine_name(r.engine) << "," << r.cycles << "," << r.accum_cycles << ","
        << r.pe_step_cycles << "," << r.lanes << "," << r.pairs << "," << r.events.macs << ","
        << r.events.words << "," << r.events.splitter_decodes << "," << r.events.segment_adds
        << "," << r.events.tree_firings << "," << r.events.buffer_reads << "," << r.ks << ","
        << r.tree_latency;
    return out.str();
}

std::string lane_log_csv(const CycleReport& r) {
    std::ostringstream out;
    out << "lane,accum_cycles,unit,unit_cycles\n";
    bool int8_mode = r.engine == EngineKind::TetrisInt8;
    for (uint64_t li = 0; li < r.lane_accum_cycles.size(); ++li) {
        uint64_t unit = int8_mode ? li / 2 : li;
        out << li << "," << r.lane_accum_cycles[li] << "," << unit << ","
            << r.unit_cycles[unit] << "\n";
    }
    return out.str();
}

}  // namespace tetris
