#ifndef TETRIS_ENERGY_HPP
#define TETRIS_ENERGY_HPP

#include <string>

#include <nlohmann/json.hpp>

#include "tetris/events.hpp"
#include "tetris/sim.hpp"

namespace tetris {

// Relative per-event cost table. The magnitudes are configurable stand-ins
// (a MAC is the unit); only ratios between engines are meaningful.
struct EnergyModel {
    double mac = 1.0;
    double segment_add = 0.10;
    double splitter_decode = 0.05;
    double tree_fire = 0.60;
    double buffer_read = 0.15;

    // Accepts exactly the keys {mac, segment_add, splitter_decode,
    // tree_fire, buffer_read}; unknown keys are rejected, missing keys
    // keep their defaults.
    static EnergyModel from_json(const nlohmann::json& j);
    static EnergyModel from_json_file(const std::string& path);

    nlohmann::json to_json() const;
};

double event_energy(const EventCounts& events, const EnergyModel& model);

// Energy-delay product: event energy times total cycles.
double edp(const CycleReport& report, const EnergyModel& model);

}  // namespace tetris

#endif
