#ifndef TETRIS_SIM_HPP
#define TETRIS_SIM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tetris/engines.hpp"
#include "tetris/events.hpp"
#include "tetris/fixed_tensor.hpp"

namespace tetris {

// One lane = the ordered weight/activation pairs reduced into one output
// element (all kernel taps across all input channels). Out-of-bounds taps
// appear as explicit zero-activation pairs so lane length stays uniform.
struct Lane {
    std::vector<int16_t> weights;
    std::vector<int16_t> activations;
};

struct LaneStream {
    LayerGeometry geom;
    std::vector<Lane> lanes;  // ordered (n, f, h_out, w_out); pairs ordered (c, kh, kw)
};

LaneStream lower_conv(const FixedTensor& input, const FixedTensor& weights,
                      const ConvParams& params);

struct SimConfig {
    EngineKind engine = EngineKind::TetrisFp16;
    uint32_t ks = 16;
    uint64_t tree_latency = 1;
    bool tree_overlap = false;       // hide the rear tree behind the next unit
    uint32_t splitters_per_unit = 16;
    bool relu = true;
    uint32_t jobs = 1;
};

// Cycle totals follow the lane-serial convention: `cycles` is the sum of
// per-execution-unit cycles (a unit is one lane, or one lane pair in int8
// mode). `pe_step_cycles` additionally models splitters_per_unit lanes
// running in lockstep, charging the max unit time per step.
struct CycleReport {
    EngineKind engine = EngineKind::MacParallel;
    uint64_t cycles = 0;
    uint64_t accum_cycles = 0;   // cycles minus rear-tree charges
    uint64_t pe_step_cycles = 0;
    uint64_t lanes = 0;
    uint64_t pairs = 0;
    std::vector<uint64_t> unit_cycles;        // per execution unit, in order
    std::vector<uint64_t> lane_accum_cycles;  // per lane, in order
    EventCounts events;

    // config echo
    uint32_t ks = 0;
    uint64_t tree_latency = 0;
    uint32_t splitters_per_unit = 0;
    bool tree_overlap = false;
};

struct LayerResult {
    AccumTensor output;  // reference-exact sums, ReLU applied when configured
    CycleReport report;
};

// Runs every lane of one conv layer through the configured engine.
// All engines produce output bit-identical to reference_conv.
LayerResult run_layer(const FixedTensor& input, const FixedTensor& weights,
                      const ConvParams& params, const SimConfig& cfg);

// Engine run over an already-lowered stream (no output tensor assembly).
CycleReport run_lanes(const LaneStream& stream, const SimConfig& cfg,
                      std::vector<int64_t>* sums = nullptr);

AccumTensor relu(const AccumTensor& t);

// Rescale raw conv sums (carrying weight_frac + activation_frac fractional
// bits) onto the given activation grid, round-half-even with saturation.
FixedTensor requantize(const AccumTensor& t, int source_frac_bits, const QuantSpec& out_spec);

struct SweepRow {
    uint32_t ks = 0;
    uint64_t cycles = 0;
    double ratio = 0.0;  // cycles / T_base, T_base = pair count with kneading disabled
};

std::vector<SweepRow> sweep_ks(const FixedTensor& input, const FixedTensor& weights,
                               const ConvParams& params, std::span<const uint32_t> ks_list,
                               const SimConfig& cfg);

struct NetLayer {
    FixedTensor weights;
    ConvParams conv;
};

struct NetworkResult {
    FixedTensor activations;  // final layer output on the activation grid
    std::vector<CycleReport> reports;
};

// Conv/ReLU stack; intermediate activations are requantized to act_spec
// between layers.
NetworkResult run_network(std::span<const NetLayer> layers, const FixedTensor& input,
                          const SimConfig& cfg, const QuantSpec& act_spec);

nlohmann::json cycle_report_json(const CycleReport& r);
std::string cycle_report_csv_row(const CycleReport& r);  // per-layer summary row
std::string cycle_report_csv_header();
std::string lane_log_csv(const CycleReport& r);  // one row per lane

}  // namespace tetris

#endif
