#ifndef TETRIS_FIXED_TENSOR_HPP
#define TETRIS_FIXED_TENSOR_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tetris {

// Fixed-point format descriptor. Values live on a symmetric signed grid:
// the most negative two's-complement code is excluded so every element has
// a (sign, magnitude) form with magnitude < 2^(bitwidth-1).
struct QuantSpec {
    int bitwidth = 16;   // 8 or 16
    int frac_bits = 15;  // 0 .. bitwidth-1

    void validate() const;
    bool operator==(const QuantSpec&) const = default;
    int magnitude_bits() const { return bitwidth - 1; }
    int16_t range_max() const { return static_cast<int16_t>((1 << (bitwidth - 1)) - 1); }

    static QuantSpec weight_default(int bitwidth);      // Q1.(B-1)
    static QuantSpec activation_default(int bitwidth);  // Q8.8 / Q4.4
};

// N-dimensional signed integer tensor with fixed-point metadata.
// Row-major flat storage; elements always fit the symmetric range of the
// declared bitwidth, for both the 8- and the 16-bit variant.
class FixedTensor {
public:
    FixedTensor() = default;
    FixedTensor(std::vector<uint32_t> shape, const QuantSpec& spec);  // zero-filled

    // Adopts `values` after a range check against the spec.
    static FixedTensor from_values(std::vector<uint32_t> shape, std::vector<int16_t> values,
                                   const QuantSpec& spec);

    int bitwidth() const { return spec_.bitwidth; }
    int frac_bits() const { return spec_.frac_bits; }
    int magnitude_bits() const { return spec_.magnitude_bits(); }
    int16_t range_max() const { return spec_.range_max(); }
    const QuantSpec& spec() const { return spec_; }

    const std::vector<uint32_t>& shape() const { return shape_; }
    uint32_t dim(size_t i) const { return shape_.at(i); }
    size_t ndim() const { return shape_.size(); }
    uint64_t size() const { return data_.size(); }

    std::span<const int16_t> values() const { return data_; }
    int16_t operator[](size_t i) const { return data_[i]; }
    int16_t& operator[](size_t i) { return data_[i]; }

    bool operator==(const FixedTensor& other) const = default;

private:
    std::vector<uint32_t> shape_;
    QuantSpec spec_;
    std::vector<int16_t> data_;
};

// Element count with positivity and capacity checks (throws FormatError
// with DimOverflow when the product exceeds the supported range).
uint64_t shape_elements(std::span<const uint32_t> shape);

// Round-half-to-even scalar quantization with saturating clamp.
// Rejects non-finite inputs naming the offending index.
FixedTensor quantize(std::span<const double> values, std::vector<uint32_t> shape,
                     const QuantSpec& spec);

double dequantize_value(int16_t v, int frac_bits);
std::vector<double> dequantize(const FixedTensor& t);

// FXT1 container round trip. load(save(t)) == t bit-exactly.
void save_tensor(const FixedTensor& t, const std::string& path);
FixedTensor load_tensor(const std::string& path);

// In-memory codec used by the file round trip (and by tests pinning the
// byte layout).
std::vector<uint8_t> encode_fxt1(const FixedTensor& t);
FixedTensor decode_fxt1(std::span<const uint8_t> bytes);

// Synthetic weight/activation generation, reproducible per seed.
enum class DistKind { Uniform, PerBitBernoulli, Sparse };

struct SynthDist {
    DistKind kind = DistKind::Uniform;
    double density = 0.5;               // per-bit-bernoulli: P(magnitude bit = 1)
    double p_zero = 0.0;                // sparse: P(element = 0)
    DistKind base = DistKind::Uniform;  // sparse: distribution of the non-zero draw
};

FixedTensor synth_tensor(std::vector<uint32_t> shape, const QuantSpec& spec, const SynthDist& dist,
                         uint64_t seed);

}  // namespace tetris

#endif
