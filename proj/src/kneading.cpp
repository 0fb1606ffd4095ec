#include "tetris/kneading.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tetris {

namespace {

constexpr uint32_t kMaxStride = 1u << 16;

void check_lane_args(uint32_t ks, int columns) {
    if (ks < 1) throw std::invalid_argument("kneading stride must be >= 1");
    if (ks > kMaxStride) throw std::invalid_argument("kneading stride must be <= 65536");
    if (columns < 1 || columns > KneadedWord::kMaxColumns)
        throw std::invalid_argument("magnitude columns must be in [1, 15]");
}

uint32_t magnitude_of(int16_t w) { return uint32_t(w < 0 ? -int32_t(w) : int32_t(w)); }

}  // namespace

bool KneadedWord::operator==(const KneadedWord& other) const {
    if (occupied_ != other.occupied_) return false;
    for (int col = 0; col < kMaxColumns; ++col) {
        if (has(col) && !(slots_[size_t(col)] == other.slots_[size_t(col)])) return false;
    }
    return true;
}

uint64_t KneadedLane::word_count() const {
    uint64_t n = 0;
    for (const KneadedGroup& g : groups) n += g.words.size();
    return n;
}

KneadedLane knead_lane(std::span<const int16_t> weights, uint32_t ks, int columns) {
    check_lane_args(ks, columns);
    uint32_t mag_limit = 1u << columns;
    for (size_t i = 0; i < weights.size(); ++i) {
        if (magnitude_of(weights[i]) >= mag_limit)
            throw std::invalid_argument("weight " + std::to_string(i) +
                                        " magnitude exceeds column count");
    }

    KneadedLane lane;
    lane.ks = ks;
    lane.columns = columns;
    lane.weight_count = weights.size();

    std::vector<std::vector<uint16_t>> column_sources;
    column_sources.resize(size_t(columns));
    for (uint64_t offset = 0; offset < weights.size(); offset += ks) {
        uint32_t window = uint32_t(std::min<uint64_t>(ks, weights.size() - offset));
        for (auto& list : column_sources) list.clear();

        size_t depth = 0;
        for (uint32_t i = 0; i < window; ++i) {
            uint32_t mag = magnitude_of(weights[offset + i]);
            while (mag != 0) {
                int b = std::countr_zero(mag);
                auto& list = column_sources[size_t(b)];
                list.push_back(uint16_t(i));
                depth = std::max(depth, list.size());
                mag &= mag - 1;
            }
        }

        KneadedGroup g;
        g.window_size = window;
        g.source_offset = offset;
        g.words.resize(depth);
        for (int b = 0; b < columns; ++b) {
            const auto& list = column_sources[size_t(b)];
            for (size_t k = 0; k < list.size(); ++k) {
                int8_t sign = weights[offset + list[k]] < 0 ? int8_t{-1} : int8_t{1};
                g.words[k].set(b, KneadedEntry{list[k], sign});
            }
        }
        lane.groups.push_back(std::move(g));
    }
    return lane;
}

uint64_t group_cycle_count(const KneadedGroup& g) { return g.words.size(); }

std::optional<KneadingViolation> validate_kneading(std::span<const int16_t> weights,
                                                   const KneadedLane& lane) {
    auto fail = [](uint64_t group, int column, std::string detail) {
        return KneadingViolation{group, column, std::move(detail)};
    };

    if (lane.ks < 1 || lane.ks > kMaxStride) return fail(0, -1, "stride out of range");
    if (lane.columns < 1 || lane.columns > KneadedWord::kMaxColumns)
        return fail(0, -1, "column count out of range");
    if (lane.weight_count != weights.size())
        return fail(0, -1, "lane weight count does not match source weights");

    uint64_t expected_groups = (weights.size() + lane.ks - 1) / lane.ks;
    if (lane.groups.size() != expected_groups)
        return fail(0, -1, "group count does not tile the lane");

    for (uint64_t gi = 0; gi < lane.groups.size(); ++gi) {
        const KneadedGroup& g = lane.groups[gi];
        uint64_t offset = gi * lane.ks;
        uint32_t window = uint32_t(std::min<uint64_t>(lane.ks, weights.size() - offset));
        if (g.source_offset != offset) return fail(gi, -1, "window offset breaks contiguous tiling");
        if (g.window_size != window) return fail(gi, -1, "window size breaks contiguous tiling");

        size_t max_pop = 0;
        for (int b = 0; b < lane.columns; ++b) {
            // Expected stable per-column sequence: source indices with bit b
            // set, in ascending order.
            std::vector<uint16_t> expected;
            for (uint32_t i = 0; i < window; ++i) {
                if ((magnitude_of(weights[offset + i]) >> b) & 1u) expected.push_back(uint16_t(i));
            }
            max_pop = std::max(max_pop, expected.size());

            size_t k = 0;
            for (size_t wi = 0; wi < g.words.size(); ++wi) {
                const KneadedWord& word = g.words[wi];
                if (!word.has(b)) continue;
                const KneadedEntry& e = word.entry(b);
                if (e.pointer >= window) return fail(gi, b, "pointer outside window");
                if (k >= expected.size()) return fail(gi, b, "surplus entry in column");
                if (e.pointer != expected[k])
                    return fail(gi, b,
                                "entry order breaks stable compaction (word " +
                                    std::to_string(wi) + ")");
                int8_t want = weights[offset + e.pointer] < 0 ? int8_t{-1} : int8_t{1};
                if (e.sign != want) return fail(gi, b, "sign does not match source weight");
                ++k;
            }
            if (k != expected.size()) return fail(gi, b, "missing entries in column");
        }
        if (g.words.size() != max_pop)
            return fail(gi, -1, "word count does not equal max column popcount");
    }

    // Decode-reconstruction must give back the source weights exactly.
    std::vector<int16_t> decoded = decode_lane(lane);
    for (size_t i = 0; i < weights.size(); ++i) {
        if (decoded[i] != weights[i])
            return fail(i / lane.ks, -1, "decode mismatch at weight " + std::to_string(i));
    }
    return std::nullopt;
}

std::vector<int16_t> decode_lane(const KneadedLane& lane) {
    std::vector<int16_t> out(lane.weight_count, 0);
    std::vector<int32_t> magnitude(lane.weight_count, 0);
    std::vector<int8_t> sign(lane.weight_count, 1);
    for (const KneadedGroup& g : lane.groups) {
        for (const KneadedWord& word : g.words) {
            uint32_t mask = word.occupied_mask();
            while (mask != 0) {
                int b = std::countr_zero(mask);
                mask &= mask - 1;
                const KneadedEntry& e = word.entry(b);
                uint64_t idx = g.source_offset + e.pointer;
                if (idx >= lane.weight_count)
                    throw std::invalid_argument("kneaded entry points past end of lane");
                magnitude[idx] |= 1 << b;
                sign[idx] = e.sign;
            }
        }
    }
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = int16_t(sign[i] < 0 ? -magnitude[i] : magnitude[i]);
    return out;
}

int pointer_bits(uint32_t ks) {
    if (ks < 1) throw std::invalid_argument("kneading stride must be >= 1");
    return ks == 1 ? 0 : std::bit_width(ks - 1);
}

std::string kneaded_lane_json(const KneadedLane& lane) {
    nlohmann::json j;
    j["ks"] = lane.ks;
    j["columns"] = lane.columns;
    j["weight_count"] = lane.weight_count;
    j["pointer_bits"] = pointer_bits(lane.ks);
    nlohmann::json groups = nlohmann::json::array();
    for (const KneadedGroup& g : lane.groups) {
        nlohmann::json jg;
        jg["source_offset"] = g.source_offset;
        jg["window_size"] = g.window_size;
        nlohmann::json words = nlohmann::json::array();
        for (const KneadedWord& w : g.words) {
            nlohmann::json entries = nlohmann::json::array();
            for (int b = lane.columns - 1; b >= 0; --b) {
                if (!w.has(b)) continue;
                entries.push_back({{"bit", b},
                                   {"pointer", w.entry(b).pointer},
                                   {"sign", int(w.entry(b).sign)}});
            }
            words.push_back(std::move(entries));
        }
        jg["words"] = std::move(words);
        groups.push_back(std::move(jg));
    }
    j["groups"] = std::move(groups);
    j["pass"] = true;  // end-of-lane marker
    return j.dump(2);
}

}  // namespace tetris
