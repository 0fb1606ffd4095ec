#ifndef TETRIS_ERRORS_HPP
#define TETRIS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tetris {

// Parse failure categories for the FXT1 tensor container.
enum class FormatErrc {
    BadMagic,     // first four bytes are not "FXT1"
    BadHeader,    // bitwidth/frac_bits/ndim/reserved field out of contract
    Truncated,    // payload shorter (or longer) than the header promises
    DimOverflow,  // element count overflows the supported range
    ValueRange,   // payload element outside the symmetric range
    IoFailure,    // underlying stream error
};

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    FormatErrc code() const noexcept { return code_; }

private:
    FormatErrc code_;
};

// A 64-bit accumulator or the rear tree left its representable range.
// column < 0 means the overflow is not tied to one segment column.
class OverflowError : public std::runtime_error {
public:
    explicit OverflowError(const std::string& what, int column = -1)
        : std::runtime_error(what), column_(column) {}
    int column() const noexcept { return column_; }

private:
    int column_;
};

}  // namespace tetris

#endif
