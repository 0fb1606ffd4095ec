#include "tetris/engines.hpp"

#include <bit>
#include <stdexcept>

#include "tetris/errors.hpp"

namespace tetris {

namespace {

int64_t checked_add(int64_t a, int64_t b) {
    int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("lane accumulator overflow");
    return r;
}

void check_pair_spans(std::span<const int16_t> activations, std::span<const int16_t> weights) {
    if (activations.size() != weights.size())
        throw std::invalid_argument("activation and weight counts differ");
}

}  // namespace

std::string engine_name(EngineKind kind) {
    switch (kind) {
        case EngineKind::TetrisFp16: return "tetris-fp16";
        case EngineKind::TetrisInt8: return "tetris-int8";
        case EngineKind::MacParallel: return "mac";
        case EngineKind::BitSerialEssential: return "bitserial";
    }
    throw std::invalid_argument("unknown engine kind");
}

EngineKind engine_from_name(const std::string& name) {
    if (name == "tetris-fp16") return EngineKind::TetrisFp16;
    if (name == "tetris-int8") return EngineKind::TetrisInt8;
    if (name == "mac") return EngineKind::MacParallel;
    if (name == "bitserial") return EngineKind::BitSerialEssential;
    throw std::invalid_argument("unknown engine: " + name);
}

BaselineLaneRun mac_lane(std::span<const int16_t> activations, std::span<const int16_t> weights) {
    check_pair_spans(activations, weights);
    BaselineLaneRun out;
    for (size_t i = 0; i < weights.size(); ++i)
        out.sum = checked_add(out.sum, int64_t(activations[i]) * int64_t(weights[i]));
    out.cycles = weights.size();  // value-oblivious: zero pairs still cost a cycle
    out.events.macs = weights.size();
    out.events.buffer_reads = 2 * weights.size();
    return out;
}

BaselineLaneRun bitserial_lane(std::span<const int16_t> activations,
                               std::span<const int16_t> weights) {
    check_pair_spans(activations, weights);
    BaselineLaneRun out;
    for (size_t i = 0; i < weights.size(); ++i) {
        uint32_t mag = uint32_t(weights[i] < 0 ? -int32_t(weights[i]) : int32_t(weights[i]));
        int64_t contribution =
            weights[i] < 0 ? -int64_t(activations[i]) : int64_t(activations[i]);
        while (mag != 0) {
            int b = std::countr_zero(mag);
            mag &= mag - 1;
            out.sum = checked_add(out.sum, contribution << b);
            out.cycles += 1;  // one essential bit probed per cycle
            out.events.segment_adds += 1;
        }
    }
    out.events.buffer_reads = 2 * weights.size();
    return out;
}

LayerGeometry conv_geometry(const FixedTensor& input, const FixedTensor& weights,
                            const ConvParams& params) {
    if (input.ndim() != 4) throw std::invalid_argument("input must be NCHW (4 dimensions)");
    if (weights.ndim() != 4) throw std::invalid_argument("weights must be FCKK (4 dimensions)");
    if (weights.dim(2) != weights.dim(3))
        throw std::invalid_argument("only square kernels are supported");
    if (weights.dim(1) != input.dim(1))
        throw std::invalid_argument("weight channel count does not match input");
    if (params.stride < 1) throw std::invalid_argument("stride must be >= 1");

    LayerGeometry g;
    g.n = input.dim(0);
    g.c = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.f = weights.dim(0);
    g.k = weights.dim(2);
    g.stride = params.stride;
    g.pad = params.pad;

    int64_t span_h = int64_t(g.h) + 2 * int64_t(g.pad) - int64_t(g.k);
    int64_t span_w = int64_t(g.w) + 2 * int64_t(g.pad) - int64_t(g.k);
    if (span_h < 0 || span_w < 0)
        throw std::invalid_argument("kernel larger than padded input");
    g.h_out = uint32_t(span_h / g.stride + 1);
    g.w_out = uint32_t(span_w / g.stride + 1);
    return g;
}

AccumTensor reference_conv(const FixedTensor& input, const FixedTensor& weights,
                           const ConvParams& params) {
    LayerGeometry g = conv_geometry(input, weights, params);
    AccumTensor out;
    out.shape = {g.n, g.f, g.h_out, g.w_out};
    out.data.assign(g.lane_count(), 0);

    auto in_at = [&](uint32_t n, uint32_t c, uint32_t y, uint32_t x) {
        return input[((size_t(n) * g.c + c) * g.h + y) * g.w + x];
    };
    auto w_at = [&](uint32_t f, uint32_t c, uint32_t ky, uint32_t kx) {
        return weights[((size_t(f) * g.c + c) * g.k + ky) * g.k + kx];
    };

    size_t o = 0;
    for (uint32_t n = 0; n < g.n; ++n)
        for (uint32_t f = 0; f < g.f; ++f)
            for (uint32_t oy = 0; oy < g.h_out; ++oy)
                for (uint32_t ox = 0; ox < g.w_out; ++ox, ++o) {
                    int64_t acc = 0;
                    for (uint32_t c = 0; c < g.c; ++c)
                        for (uint32_t ky = 0; ky < g.k; ++ky)
                            for (uint32_t kx = 0; kx < g.k; ++kx) {
                                int64_t iy = int64_t(oy) * g.stride + ky - g.pad;
                                int64_t ix = int64_t(ox) * g.stride + kx - g.pad;
                                if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
                                acc = checked_add(acc, int64_t(in_at(n, c, uint32_t(iy),
                                                                     uint32_t(ix))) *
                                                           int64_t(w_at(f, c, ky, kx)));
                            }
                    out.data[o] = acc;
                }
    return out;
}

}  // namespace tetris
