#include "tetris/sac.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "tetris/errors.hpp"

namespace tetris {

namespace {

int64_t checked_add(int64_t a, int64_t b, int column) {
    int64_t r;
    if (__builtin_add_overflow(a, b, &r))
        throw OverflowError("segment accumulator overflow at column " + std::to_string(column),
                            column);
    return r;
}

// Contribution of one occupied column: sign * referenced activation.
int64_t decode_entry(const KneadedEntry& e, std::span<const int16_t> window) {
    if (e.pointer >= window.size())
        throw std::logic_error("kneaded pointer outside activation window (encoder bug)");
    int64_t a = window[e.pointer];
    return e.sign < 0 ? -a : a;
}

void run_groups(const KneadedLane& lane, std::span<const int16_t> activations, SegmentState& state,
                LaneRun& out) {
    if (activations.size() != lane.weight_count)
        throw std::invalid_argument("activation count does not match lane weight count");
    for (const KneadedGroup& g : lane.groups) {
        auto window = activations.subspan(g.source_offset, g.window_size);
        for (const KneadedWord& word : g.words) {
            sac_accumulate_word(state, word, window);
            out.accum_cycles += 1;
            out.events.words += 1;
            out.events.splitter_decodes += 1;
            uint64_t entries = uint64_t(word.entry_count());
            out.events.segment_adds += entries;
            out.events.buffer_reads += 1 + entries;  // word fetch + activation fetches
        }
    }
}

}  // namespace

SegmentState::SegmentState(int columns) {
    if (columns < 1 || columns > KneadedWord::kMaxColumns)
        throw std::invalid_argument("segment columns must be in [1, 15]");
    segments_.assign(size_t(columns), 0);
}

void SegmentState::add(int col, int64_t contribution) {
    int64_t& s = segments_.at(size_t(col));
    s = checked_add(s, contribution, col);
}

void SegmentState::reset() { segments_.assign(segments_.size(), 0); }

std::vector<int64_t> splitter_dispatch(const KneadedWord& word, std::span<const int16_t> window) {
    std::vector<int64_t> out(KneadedWord::kMaxColumns, 0);
    uint32_t mask = word.occupied_mask();
    while (mask != 0) {
        int b = std::countr_zero(mask);
        mask &= mask - 1;
        out[size_t(b)] = decode_entry(word.entry(b), window);
    }
    return out;
}

void sac_accumulate_word(SegmentState& state, const KneadedWord& word,
                         std::span<const int16_t> window) {
    uint32_t mask = word.occupied_mask();
    while (mask != 0) {
        int b = std::countr_zero(mask);
        mask &= mask - 1;
        if (b >= state.columns())
            throw std::logic_error("kneaded entry column outside segment state");
        state.add(b, decode_entry(word.entry(b), window));
    }
}

int64_t rear_sum(const SegmentState& state) {
    __int128 total = 0;
    for (int b = 0; b < state.columns(); ++b)
        total += __int128(state.segment(b)) << b;
    if (total > INT64_MAX || total < INT64_MIN)
        throw OverflowError("rear adder tree overflow");
    return int64_t(total);
}

int64_t sac_pairwise(int64_t activation, int16_t weight, int columns) {
    SegmentState state(columns);
    uint32_t mag = uint32_t(weight < 0 ? -int32_t(weight) : int32_t(weight));
    if (mag >= (1u << columns))
        throw std::invalid_argument("weight magnitude exceeds column count");
    int64_t contribution = weight < 0 ? -activation : activation;
    while (mag != 0) {
        int b = std::countr_zero(mag);
        mag &= mag - 1;
        state.add(b, contribution);
    }
    return rear_sum(state);
}

LaneRun run_lane_fp16(const KneadedLane& lane, std::span<const int16_t> activations,
                      const SacConfig& cfg) {
    LaneRun out;
    SegmentState state(lane.columns);
    run_groups(lane, activations, state, out);
    out.cycles = out.accum_cycles;
    if (lane.weight_count > 0) {
        // Pass marker reached: the rear tree fires once for the whole lane.
        out.sum = rear_sum(state);
        out.cycles += cfg.tree_latency;
        out.events.tree_firings += 1;
    }
    return out;
}

LaneRunInt8 run_lane_int8(const KneadedLane& lane_a, const KneadedLane& lane_b,
                          std::span<const int16_t> activations_a,
                          std::span<const int16_t> activations_b, const SacConfig& cfg) {
    constexpr int kHalfColumns = 7;
    if (lane_a.columns != kHalfColumns || lane_b.columns != kHalfColumns)
        throw std::invalid_argument("int8 mode needs 7 magnitude columns per half");
    if (lane_a.ks != lane_b.ks)
        throw std::invalid_argument("int8 halves must share one kneading stride");

    LaneRunInt8 out;
    LaneRun half_a, half_b;
    SegmentState state_a(kHalfColumns), state_b(kHalfColumns);
    run_groups(lane_a, activations_a, state_a, half_a);
    run_groups(lane_b, activations_b, state_b, half_b);

    out.events = half_a.events;
    out.events += half_b.events;
    // Both halves advance in lockstep, one word each per cycle.
    out.accum_cycles = std::max(half_a.accum_cycles, half_b.accum_cycles);
    out.cycles = out.accum_cycles;
    if (lane_a.weight_count > 0 || lane_b.weight_count > 0) {
        out.sum_a = lane_a.weight_count > 0 ? rear_sum(state_a) : 0;
        out.sum_b = lane_b.weight_count > 0 ? rear_sum(state_b) : 0;
        out.cycles += cfg.tree_latency;
        out.events.tree_firings += 1;  // reconfigured last level emits both sums
    }
    return out;
}

}  // namespace tetris
