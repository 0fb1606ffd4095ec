#include "tetris/energy.hpp"

#include <fstream>
#include <stdexcept>

#include "tetris/errors.hpp"

namespace tetris {

EnergyModel EnergyModel::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("energy model must be a JSON object");
    EnergyModel m;
    for (const auto& [key, value] : j.items()) {
        double* slot = nullptr;
        if (key == "mac") slot = &m.mac;
        else if (key == "segment_add") slot = &m.segment_add;
        else if (key == "splitter_decode") slot = &m.splitter_decode;
        else if (key == "tree_fire") slot = &m.tree_fire;
        else if (key == "buffer_read") slot = &m.buffer_read;
        else throw std::invalid_argument("unknown energy model key: " + key);
        if (!value.is_number()) throw std::invalid_argument("cost for " + key + " must be a number");
        double cost = value.get<double>();
        if (cost < 0.0) throw std::invalid_argument("cost for " + key + " must be >= 0");
        *slot = cost;
    }
    return m;
}

EnergyModel EnergyModel::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrc::IoFailure, "cannot open energy model: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("energy model parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json EnergyModel::to_json() const {
    return {{"mac", mac},
            {"segment_add", segment_add},
            {"splitter_decode", splitter_decode},
            {"tree_fire", tree_fire},
            {"buffer_read", buffer_read}};
}

double event_energy(const EventCounts& events, const EnergyModel& model) {
    return double(events.macs) * model.mac + double(events.segment_adds) * model.segment_add +
           double(events.splitter_decodes) * model.splitter_decode +
           double(events.tree_firings) * model.tree_fire +
           double(events.buffer_reads) * model.buffer_read;
}

double edp(const CycleReport& report, const EnergyModel& model) {
    return event_energy(report.events, model) * double(report.cycles);
}

}  // namespace tetris
