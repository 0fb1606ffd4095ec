#ifndef TETRIS_SAC_HPP
#define TETRIS_SAC_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "tetris/events.hpp"
#include "tetris/kneading.hpp"

namespace tetris {

// Split-and-Accumulate datapath model. Splitters decode kneaded words and
// forward the referenced activation (or zero) to per-bit-column segment
// accumulators; one rear shift-and-add per lane produces the partial sum.

struct SacConfig {
    uint64_t tree_latency = 1;  // cycles charged per rear-tree firing
};

// Per-bit-column 64-bit accumulators S0..S(columns-1). Overflow is an
// error, never silent wraparound.
class SegmentState {
public:
    explicit SegmentState(int columns);

    int columns() const { return int(segments_.size()); }
    int64_t segment(int col) const { return segments_.at(size_t(col)); }
    std::span<const int64_t> segments() const { return segments_; }

    void add(int col, int64_t contribution);  // overflow-checked
    void reset();

    bool operator==(const SegmentState&) const = default;

private:
    std::vector<int64_t> segments_;
};

// Decodes one kneaded word against its activation window: column b yields
// sign * window[pointer] when occupied, zero otherwise.
std::vector<int64_t> splitter_dispatch(const KneadedWord& word, std::span<const int16_t> window);

// One accumulation cycle: folds a word's dispatch outputs into the state.
void sac_accumulate_word(SegmentState& state, const KneadedWord& word,
                         std::span<const int16_t> window);

// Rear shift-and-add: sum_b S[b] * 2^b, fired once per lane.
int64_t rear_sum(const SegmentState& state);

// Pair-wise SAC of a single activation/weight pair; equals a*w exactly.
int64_t sac_pairwise(int64_t activation, int16_t weight, int columns);

struct LaneRun {
    int64_t sum = 0;
    uint64_t cycles = 0;        // accumulation cycles + tree charge
    uint64_t accum_cycles = 0;  // kneaded words consumed
    EventCounts events;
};

// Runs one kneaded lane to completion (any column width; 15 for fp16).
LaneRun run_lane_fp16(const KneadedLane& lane, std::span<const int16_t> activations,
                      const SacConfig& cfg = {});

struct LaneRunInt8 {
    int64_t sum_a = 0;
    int64_t sum_b = 0;
    uint64_t cycles = 0;
    uint64_t accum_cycles = 0;  // max of the two halves' word counts
    EventCounts events;
};

// int8 mode: the splitter is halved; each cycle consumes one word from
// each 7-column half and the reconfigured rear tree yields two sums.
LaneRunInt8 run_lane_int8(const KneadedLane& lane_a, const KneadedLane& lane_b,
                          std::span<const int16_t> activations_a,
                          std::span<const int16_t> activations_b, const SacConfig& cfg = {});

}  // namespace tetris

#endif
