#include <cstdint>
#include <random>
#include <vector>

#include <doctest.h>

#include "tetris/errors.hpp"
#include "tetris/kneading.hpp"
#include "tetris/sac.hpp"

using namespace tetris;

namespace {

std::vector<int16_t> random_values(std::mt19937_64& rng, size_t n, int32_t max,
                                   double p_zero = 0.0) {
    std::vector<int16_t> out(n);
    for (auto& v : out) {
        if (p_zero > 0.0 && double(rng() >> 11) * 0x1.0p-53 < p_zero) {
            v = 0;
            continue;
        }
        int32_t mag = int32_t(rng() % uint64_t(max + 1));
        v = int16_t(rng() & 1 ? -mag : mag);
    }
    return out;
}

int64_t dot(const std::vector<int16_t>& a, const std::vector<int16_t>& w) {
    int64_t s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += int64_t(a[i]) * int64_t(w[i]);
    return s;
}

}  // namespace

TEST_CASE("splitter dispatch forwards the signed referenced activation") {
    std::vector<int16_t> window = {7, 4};
    KneadedWord word;
    word.set(2, KneadedEntry{1, 1});
    std::vector<int64_t> out = splitter_dispatch(word, window);
    REQUIRE(out.size() == 15);
    CHECK(out[2] == 4);
    for (size_t b = 0; b < out.size(); ++b)
        if (b != 2) CHECK(out[b] == 0);

    std::vector<int16_t> single = {5};
    KneadedWord neg;
    neg.set(0, KneadedEntry{0, -1});
    CHECK(splitter_dispatch(neg, single)[0] == -5);
}

TEST_CASE("dispatch of a pointer outside the window is an encoder bug") {
    std::vector<int16_t> window = {7, 4};
    KneadedWord word;
    word.set(3, KneadedEntry{5, 1});
    CHECK_THROWS_AS(splitter_dispatch(word, window), std::logic_error);
    SegmentState state(15);
    CHECK_THROWS_AS(sac_accumulate_word(state, word, window), std::logic_error);
}

TEST_CASE("rear tree weights segments by their bit position") {
    SegmentState s(15);
    s.add(0, 5);
    s.add(1, 2);
    CHECK(rear_sum(s) == 9);

    SegmentState top(15);
    top.add(14, 1);
    CHECK(rear_sum(top) == 16384);

    s.reset();
    CHECK(rear_sum(s) == 0);
}

TEST_CASE("segment state bounds its column index") {
    SegmentState s(7);
    CHECK_THROWS_AS(SegmentState(0), std::invalid_argument);
    CHECK_THROWS_AS(SegmentState(16), std::invalid_argument);
    KneadedWord word;
    word.set(9, KneadedEntry{0, 1});
    std::vector<int16_t> window = {1};
    CHECK_THROWS_AS(sac_accumulate_word(s, word, window), std::logic_error);
}

TEST_CASE("pairwise split-and-accumulate multiplies exactly") {
    CHECK(sac_pairwise(3, 5, 15) == 15);
    CHECK(sac_pairwise(-2, 3, 15) == -6);
    CHECK(sac_pairwise(4, -3, 15) == -12);
    CHECK(sac_pairwise(-4, -3, 15) == 12);
    CHECK(sac_pairwise(123, 0, 15) == 0);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 2000; ++trial) {
        int64_t a = int64_t(rng() % 65535) - 32767;
        int16_t w = int16_t(int64_t(rng() % 65535) - 32767);
        CHECK(sac_pairwise(a, w, 15) == a * int64_t(w));
    }
    CHECK_THROWS_AS(sac_pairwise(1, 8, 3), std::invalid_argument);
}

TEST_CASE("two-pair lane: cycles count kneaded words plus the tree charge") {
    std::vector<int16_t> weights = {2, 3};
    std::vector<int16_t> acts = {3, 1};
    KneadedLane lane = knead_lane(weights, 2, 15);
    LaneRun r = run_lane_fp16(lane, acts);
    CHECK(r.sum == 9);
    CHECK(r.accum_cycles == 2);  // column 1 holds two essential bits
    CHECK(r.cycles == 3);
    CHECK(r.events.words == 2);
    CHECK(r.events.splitter_decodes == 2);
    CHECK(r.events.segment_adds == 3);  // bits: 2 -> one, 3 -> two
    CHECK(r.events.tree_firings == 1);
    CHECK(r.events.buffer_reads == 2 + 3);
}

TEST_CASE("empty lane does nothing and fires nothing") {
    KneadedLane lane = knead_lane({}, 16, 15);
    LaneRun r = run_lane_fp16(lane, {});
    CHECK(r.sum == 0);
    CHECK(r.cycles == 0);
    CHECK(r.accum_cycles == 0);
    CHECK(r.events == EventCounts{});
}

TEST_CASE("all-zero weights still fire the tree once") {
    std::vector<int16_t> weights(5, 0);
    std::vector<int16_t> acts = {1, 2, 3, 4, 5};
    KneadedLane lane = knead_lane(weights, 4, 15);
    LaneRun r = run_lane_fp16(lane, acts);
    CHECK(r.sum == 0);
    CHECK(r.accum_cycles == 0);
    CHECK(r.cycles == 1);  // just the rear tree at the pass marker
    CHECK(r.events.tree_firings == 1);
    CHECK(r.events.words == 0);
}

TEST_CASE("lane runs reproduce the dot product over random inputs") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = rng() % 64;
        uint32_t ks = 1 + uint32_t(rng() % 32);
        std::vector<int16_t> weights = random_values(rng, n, 32767, 0.3);
        std::vector<int16_t> acts = random_values(rng, n, 32767);
        KneadedLane lane = knead_lane(weights, ks, 15);
        LaneRun r = run_lane_fp16(lane, acts);
        CHECK(r.sum == dot(acts, weights));

        uint64_t words = lane.word_count();
        CHECK(r.accum_cycles == words);
        CHECK(r.cycles == words + (n > 0 ? 1 : 0));
        CHECK(r.events.words == words);
        CHECK(r.events.splitter_decodes == words);
        CHECK(r.events.buffer_reads == words + r.events.segment_adds);
    }
}

TEST_CASE("activation scaling carries through linearly") {
    std::vector<int16_t> weights = {3, -5, 0, 9};
    std::vector<int16_t> acts = {10, 20, 30, 40};
    std::vector<int16_t> doubled = {20, 40, 60, 80};
    KneadedLane lane = knead_lane(weights, 4, 15);
    CHECK(run_lane_fp16(lane, doubled).sum == 2 * run_lane_fp16(lane, acts).sum);
}

TEST_CASE("stride one lane spends exactly one cycle per nonzero weight") {
    std::mt19937_64 rng(41);
    std::vector<int16_t> weights = random_values(rng, 100, 32767, 0.5);
    std::vector<int16_t> acts = random_values(rng, 100, 32767);
    uint64_t nonzero = 0;
    for (int16_t w : weights)
        if (w != 0) ++nonzero;
    KneadedLane lane = knead_lane(weights, 1, 15);
    LaneRun r = run_lane_fp16(lane, acts);
    CHECK(r.accum_cycles == nonzero);
    CHECK(r.sum == dot(acts, weights));
}

TEST_CASE("configurable tree latency adds to the lane total") {
    std::vector<int16_t> weights = {6};
    std::vector<int16_t> acts = {2};
    KneadedLane lane = knead_lane(weights, 1, 15);
    LaneRun r = run_lane_fp16(lane, acts, SacConfig{5});
    CHECK(r.accum_cycles == 1);
    CHECK(r.cycles == 6);
    CHECK(run_lane_fp16(lane, acts, SacConfig{0}).cycles == 1);
}

TEST_CASE("word consumption order does not change the rear sum") {
    std::mt19937_64 rng(43);
    std::vector<int16_t> weights = random_values(rng, 16, 32767);
    std::vector<int16_t> acts = random_values(rng, 16, 32767);
    KneadedLane lane = knead_lane(weights, 16, 15);
    REQUIRE(lane.groups.size() == 1);
    const auto& words = lane.groups[0].words;
    REQUIRE(words.size() >= 2);

    SegmentState forward(15), backward(15);
    for (size_t i = 0; i < words.size(); ++i) sac_accumulate_word(forward, words[i], acts);
    for (size_t i = words.size(); i-- > 0;) sac_accumulate_word(backward, words[i], acts);
    CHECK(rear_sum(forward) == rear_sum(backward));
    CHECK(rear_sum(forward) == dot(acts, weights));
}

TEST_CASE("activation count must match the lane") {
    std::vector<int16_t> weights = {1, 2, 3};
    KneadedLane lane = knead_lane(weights, 2, 15);
    std::vector<int16_t> too_few = {1, 2};
    CHECK_THROWS_AS(run_lane_fp16(lane, too_few), std::invalid_argument);
}

TEST_CASE("segment accumulators refuse to wrap around") {
    SegmentState s(15);
    s.add(3, INT64_MAX - 5);
    try {
        s.add(3, 10);
        FAIL("expected OverflowError");
    } catch (const OverflowError& e) {
        CHECK(e.column() == 3);
    }

    SegmentState big(15);
    big.add(14, int64_t{1} << 62);
    CHECK_THROWS_AS(rear_sum(big), OverflowError);
}

TEST_CASE("int8 halves run in lockstep and share one tree firing") {
    std::vector<int16_t> wa = {3, -2, 0, 5};
    std::vector<int16_t> wb = {1, 1, 1, 1};
    std::vector<int16_t> aa = {10, 20, 30, 40};
    std::vector<int16_t> ab = {-1, 2, -3, 4};
    KneadedLane la = knead_lane(wa, 4, 7);
    KneadedLane lb = knead_lane(wb, 4, 7);
    LaneRunInt8 r = run_lane_int8(la, lb, aa, ab);
    CHECK(r.sum_a == dot(aa, wa));
    CHECK(r.sum_b == dot(ab, wb));
    uint64_t wa_words = la.word_count();
    uint64_t wb_words = lb.word_count();
    CHECK(r.accum_cycles == std::max(wa_words, wb_words));
    CHECK(r.cycles == r.accum_cycles + 1);
    CHECK(r.events.tree_firings == 1);
    CHECK(r.events.words == wa_words + wb_words);
}

TEST_CASE("int8 pairing validates its halves") {
    std::vector<int16_t> w = {1, 2};
    KneadedLane seven = knead_lane(w, 2, 7);
    KneadedLane fifteen = knead_lane(w, 2, 15);
    KneadedLane other_ks = knead_lane(w, 4, 7);
    std::vector<int16_t> acts = {1, 1};
    CHECK_THROWS_AS(run_lane_int8(seven, fifteen, acts, acts), std::invalid_argument);
    CHECK_THROWS_AS(run_lane_int8(seven, other_ks, acts, acts), std::invalid_argument);
}

TEST_CASE("int8 mode tolerates an empty partner half") {
    std::vector<int16_t> wa = {7, -7, 3};
    std::vector<int16_t> aa = {5, 6, 7};
    KneadedLane la = knead_lane(wa, 4, 7);
    KneadedLane lb = knead_lane({}, 4, 7);
    LaneRunInt8 r = run_lane_int8(la, lb, aa, {});
    CHECK(r.sum_a == dot(aa, wa));
    CHECK(r.sum_b == 0);
    CHECK(r.accum_cycles == la.word_count());
    CHECK(r.events.tree_firings == 1);
}

TEST_CASE("int8 halves reproduce dot products over random inputs") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 500; ++trial) {
        size_t n = rng() % 48;
        uint32_t ks = 1 + uint32_t(rng() % 16);
        std::vector<int16_t> wa = random_values(rng, n, 127, 0.3);
        std::vector<int16_t> wb = random_values(rng, n, 127, 0.3);
        std::vector<int16_t> aa = random_values(rng, n, 127);
        std::vector<int16_t> ab = random_values(rng, n, 127);
        KneadedLane la = knead_lane(wa, ks, 7);
        KneadedLane lb = knead_lane(wb, ks, 7);
        LaneRunInt8 r = run_lane_int8(la, lb, aa, ab);
        CHECK(r.sum_a == dot(aa, wa));
        CHECK(r.sum_b == dot(ab, wb));
        CHECK(r.accum_cycles == std::max(la.word_count(), lb.word_count()));
    }
}
