#ifndef TETRIS_ENGINES_HPP
#define TETRIS_ENGINES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tetris/events.hpp"
#include "tetris/fixed_tensor.hpp"

namespace tetris {

enum class EngineKind { TetrisFp16, TetrisInt8, MacParallel, BitSerialEssential };

std::string engine_name(EngineKind kind);          // "tetris-fp16", "mac", ...
EngineKind engine_from_name(const std::string& name);

struct BaselineLaneRun {
    int64_t sum = 0;
    uint64_t cycles = 0;
    EventCounts events;
};

// Bit-parallel MAC reference: one pair per cycle, zero operands included.
BaselineLaneRun mac_lane(std::span<const int16_t> activations, std::span<const int16_t> weights);

// Bit-serial essential-bit engine: one essential weight bit per cycle,
// zero weights cost nothing.
BaselineLaneRun bitserial_lane(std::span<const int16_t> activations,
                               std::span<const int16_t> weights);

// Integer accumulator tensor produced by convolution, pre-requantization.
struct AccumTensor {
    std::vector<uint32_t> shape;
    std::vector<int64_t> data;

    uint64_t size() const { return data.size(); }
    bool operator==(const AccumTensor&) const = default;
};

struct ConvParams {
    uint32_t stride = 1;
    uint32_t pad = 0;
};

// Dimensions of a conv layer derived from input NCHW and weights FCKK.
struct LayerGeometry {
    uint32_t n = 0, c = 0, h = 0, w = 0;
    uint32_t f = 0, k = 0;
    uint32_t stride = 1, pad = 0;
    uint32_t h_out = 0, w_out = 0;

    uint64_t lane_count() const { return uint64_t(n) * f * h_out * w_out; }
    uint64_t lane_length() const { return uint64_t(k) * k * c; }
};

LayerGeometry conv_geometry(const FixedTensor& input, const FixedTensor& weights,
                            const ConvParams& params);

// Ground-truth direct 6-loop integer convolution over NCHW input and FCKK
// weights; the oracle every engine must match bit-exactly.
AccumTensor reference_conv(const FixedTensor& input, const FixedTensor& weights,
                           const ConvParams& params);

}  // namespace tetris

#endif
