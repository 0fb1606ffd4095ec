#ifndef TETRIS_KNEADING_HPP
#define TETRIS_KNEADING_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tetris {

// Weight kneading: column-wise compaction of essential magnitude bits
// across a window of up to KS consecutive lane weights. Each occupied
// column of a kneaded word carries a pointer into the activation window
// plus the sign of the source weight, so the datapath can add or subtract
// the referenced activation.

struct KneadedEntry {
    uint16_t pointer = 0;  // window-local index of the source weight, < KS
    int8_t sign = 1;       // +1 or -1
    bool operator==(const KneadedEntry&) const = default;
};

class KneadedWord {
public:
    static constexpr int kMaxColumns = 15;

    bool has(int col) const { return (occupied_ >> col) & 1u; }
    bool empty() const { return occupied_ == 0; }
    uint32_t occupied_mask() const { return occupied_; }
    int entry_count() const { return std::popcount(occupied_); }

    const KneadedEntry& entry(int col) const { return slots_[size_t(col)]; }

    void set(int col, KneadedEntry e) {
        slots_[size_t(col)] = e;
        occupied_ |= 1u << col;
    }
    void clear(int col) { occupied_ &= ~(1u << col); }

    bool operator==(const KneadedWord& other) const;

private:
    uint32_t occupied_ = 0;
    std::array<KneadedEntry, kMaxColumns> slots_{};
};

// Kneaded form of one KS-wide window of source weights.
struct KneadedGroup {
    std::vector<KneadedWord> words;
    uint32_t window_size = 0;    // source weights in this window, <= KS
    uint64_t source_offset = 0;  // lane-local index of the window's first weight
};

// Whole lane after kneading; the end of `groups` is the pass marker.
struct KneadedLane {
    std::vector<KneadedGroup> groups;
    uint32_t ks = 0;
    int columns = 0;  // magnitude bit columns: 15 for 16-bit, 7 for 8-bit weights
    uint64_t weight_count = 0;

    uint64_t word_count() const;
};

// Column-wise stable compaction: within each column, essential bits fill
// kneaded words in ascending source order.
KneadedLane knead_lane(std::span<const int16_t> weights, uint32_t ks, int columns);

// Cycles to accumulate one group == its word count == max column popcount.
uint64_t group_cycle_count(const KneadedGroup& g);

struct KneadingViolation {
    uint64_t group = 0;
    int column = -1;  // -1 when not tied to one column
    std::string detail;
};

// Checks tiling, per-column stable multiset conservation, the word-count
// law, sign consistency, and pointer bounds. nullopt means the lane is a
// faithful kneading of `weights`.
std::optional<KneadingViolation> validate_kneading(std::span<const int16_t> weights,
                                                   const KneadedLane& lane);

// Reconstructs the source weights from the lane alone.
std::vector<int16_t> decode_lane(const KneadedLane& lane);

// Width of the pointer field for a given stride (4 bits for KS=16).
int pointer_bits(uint32_t ks);

std::string kneaded_lane_json(const KneadedLane& lane);

}  // namespace tetris

#endif
