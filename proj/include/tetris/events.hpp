#ifndef TETRIS_EVENTS_HPP
#define TETRIS_EVENTS_HPP

#include <cstdint>

namespace tetris {

// Datapath event totals used for cycle reports and the relative energy
// model. Counter meanings per engine:
//   macs             multiply-accumulate operations (MAC engine only)
//   words            kneaded words consumed by splitters
//   splitter_decodes kneaded-word decodes (one per word per splitter)
//   segment_adds     additions into segment registers; for the bit-serial
//                    engine, one shift-add per essential bit
//   tree_firings     rear shift-and-add activations
//   buffer_reads     operand fetches from the throttle/weight buffers
struct EventCounts {
    uint64_t macs = 0;
    uint64_t words = 0;
    uint64_t splitter_decodes = 0;
    uint64_t segment_adds = 0;
    uint64_t tree_firings = 0;
    uint64_t buffer_reads = 0;

    EventCounts& operator+=(const EventCounts& o) {
        macs += o.macs;
        words += o.words;
        splitter_decodes += o.splitter_decodes;
        segment_adds += o.segment_adds;
        tree_firings += o.tree_firings;
        buffer_reads += o.buffer_reads;
        return *this;
    }
    bool operator==(const EventCounts&) const = default;
};

}  // namespace tetris

#endif
