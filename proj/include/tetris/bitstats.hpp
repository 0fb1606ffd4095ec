#ifndef TETRIS_BITSTATS_HPP
#define TETRIS_BITSTATS_HPP

#include <string>
#include <vector>

#include "tetris/fixed_tensor.hpp"

namespace tetris {

// Ineffectual-computation statistics over the magnitude bits of a tensor.
// All fractions are computed over the B-1 magnitude bits of the
// sign-magnitude form; zero-valued elements contribute all-zero bits.
struct BitReport {
    uint64_t n_values = 0;
    double zero_value_fraction = 0.0;
    double zero_bit_fraction = 0.0;
    std::vector<double> column_density;  // index b = fraction of elements with bit b set

    // zero_bit_fraction is defined as 1 - mean(column_density) with
    // left-to-right summation; the report holds the identity exactly.
};

BitReport bit_report(const FixedTensor& t);

double zero_value_fraction(const FixedTensor& t);
double zero_bit_fraction(const FixedTensor& t);
std::vector<double> bit_column_density(const FixedTensor& t);

std::string bit_report_json(const BitReport& r);
std::string bit_report_csv(const BitReport& r);  // one row per bit column

}  // namespace tetris

#endif
