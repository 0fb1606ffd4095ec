#include "tetris/bitstats.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tetris {

namespace {

struct BitCounts {
    uint64_t zeros = 0;
    std::vector<uint64_t> column_ones;
};

BitCounts count_bits(const FixedTensor& t) {
    if (t.size() == 0) throw std::invalid_argument("bit statistics need a non-empty tensor");
    BitCounts c;
    c.column_ones.assign(size_t(t.magnitude_bits()), 0);
    for (int16_t v : t.values()) {
        if (v == 0) ++c.zeros;
        uint32_t mag = uint32_t(v < 0 ? -int32_t(v) : int32_t(v));
        while (mag != 0) {
            int b = std::countr_zero(mag);
            ++c.column_ones[size_t(b)];
            mag &= mag - 1;
        }
    }
    return c;
}

std::vector<double> density_from(const BitCounts& c, uint64_t n) {
    std::vector<double> d(c.column_ones.size());
    for (size_t b = 0; b < d.size(); ++b) d[b] = double(c.column_ones[b]) / double(n);
    return d;
}

// Canonical arithmetic shared by the report and the standalone accessor so
// the identity zero_bit_fraction == 1 - mean(column_density) is bit-exact.
double zero_bit_from_density(const std::vector<double>& density) {
    double sum = 0.0;
    for (double d : density) sum += d;
    return 1.0 - sum / double(density.size());
}

}  // namespace

BitReport bit_report(const FixedTensor& t) {
    BitCounts c = count_bits(t);
    BitReport r;
    r.n_values = t.size();
    r.zero_value_fraction = double(c.zeros) / double(t.size());
    r.column_density = density_from(c, t.size());
    r.zero_bit_fraction = zero_bit_from_density(r.column_density);
    return r;
}

double zero_value_fraction(const FixedTensor& t) {
    return double(count_bits(t).zeros) / double(t.size());
}

double zero_bit_fraction(const FixedTensor& t) {
    return zero_bit_from_density(density_from(count_bits(t), t.size()));
}

std::vector<double> bit_column_density(const FixedTensor& t) {
    return density_from(count_bits(t), t.size());
}

std::string bit_report_json(const BitReport& r) {
    nlohmann::json j;
    j["n_values"] = r.n_values;
    j["zero_value_fraction"] = r.zero_value_fraction;
    j["zero_bit_fraction"] = r.zero_bit_fraction;
    j["column_density"] = r.column_density;
    return j.dump(2);
}

std::string bit_report_csv(const BitReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "# n_values," << r.n_values << "\n";
    out << "# zero_value_fraction," << r.zero_value_fraction << "\n";
    out << "# zero_bit_fraction," << r.zero_bit_fraction << "\n";
    out << "bit,density\n";
    for (size_t b = 0; b < r.column_density.size(); ++b)
        out << b << "," << r.column_density[b] << "\n";
    return out.str();
}

}  // namespace tetris
