#include "tetris/fixed_tensor.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "tetris/errors.hpp"

namespace tetris {

namespace {

constexpr uint64_t kMaxElements = uint64_t{1} << 28;
constexpr char kMagic[4] = {'F', 'X', 'T', '1'};
constexpr size_t kMaxDims = 4;

double round_half_even(double x) {
    double f = std::floor(x);
    double diff = x - f;
    if (diff > 0.5) return f + 1.0;
    if (diff < 0.5) return f;
    return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32le(std::span<const uint8_t> b, size_t off) {
    return uint32_t(b[off]) | uint32_t(b[off + 1]) << 8 | uint32_t(b[off + 2]) << 16 |
           uint32_t(b[off + 3]) << 24;
}

// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double unit_draw(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

bool bernoulli_draw(std::mt19937_64& rng, double p) { return unit_draw(rng) < p; }

// Unbiased integer in [lo, hi] via rejection on raw engine output.
int64_t uniform_int_draw(std::mt19937_64& rng, int64_t lo, int64_t hi) {
    uint64_t span = uint64_t(hi - lo) + 1;
    uint64_t limit = span * (UINT64_MAX / span);
    uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return lo + int64_t(v % span);
}

int16_t draw_element(std::mt19937_64& rng, const QuantSpec& spec, DistKind kind, double density) {
    switch (kind) {
        case DistKind::Uniform:
            return static_cast<int16_t>(uniform_int_draw(rng, -spec.range_max(), spec.range_max()));
        case DistKind::PerBitBernoulli: {
            bool negative = bernoulli_draw(rng, 0.5);
            int mag = 0;
            for (int b = 0; b < spec.magnitude_bits(); ++b) {
                if (bernoulli_draw(rng, density)) mag |= 1 << b;
            }
            return static_cast<int16_t>(negative ? -mag : mag);
        }
        case DistKind::Sparse:
            throw std::invalid_argument("sparse cannot be its own base distribution");
    }
    throw std::invalid_argument("unknown distribution kind");
}

}  // namespace

void QuantSpec::validate() const {
    if (bitwidth != 8 && bitwidth != 16)
        throw std::invalid_argument("bitwidth must be 8 or 16, got " + std::to_string(bitwidth));
    if (frac_bits < 0 || frac_bits > bitwidth - 1)
        throw std::invalid_argument("frac_bits must be in [0, bitwidth-1], got " +
                                    std::to_string(frac_bits));
}

QuantSpec QuantSpec::weight_default(int bitwidth) { return QuantSpec{bitwidth, bitwidth - 1}; }

QuantSpec QuantSpec::activation_default(int bitwidth) {
    return bitwidth == 8 ? QuantSpec{8, 4} : QuantSpec{16, 8};
}

uint64_t shape_elements(std::span<const uint32_t> shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    if (shape.size() > kMaxDims)
        throw FormatError(FormatErrc::BadHeader,
                          "tensor rank " + std::to_string(shape.size()) + " exceeds 4");
    uint64_t n = 1;
    for (uint32_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
        if (n > kMaxElements)
            throw FormatError(FormatErrc::DimOverflow,
                              "element count exceeds " + std::to_string(kMaxElements));
    }
    return n;
}

FixedTensor::FixedTensor(std::vector<uint32_t> shape, const QuantSpec& spec) : spec_(spec) {
    spec.validate();
    uint64_t n = shape_elements(shape);
    shape_ = std::move(shape);
    data_.assign(n, 0);
}

FixedTensor FixedTensor::from_values(std::vector<uint32_t> shape, std::vector<int16_t> values,
                                     const QuantSpec& spec) {
    spec.validate();
    uint64_t n = shape_elements(shape);
    if (n != values.size())
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not match shape element count " + std::to_string(n));
    int16_t max = spec.range_max();
    for (size_t i = 0; i < values.size(); ++i) {
        if (values[i] < -max || values[i] > max)
            throw std::invalid_argument("element " + std::to_string(i) + " = " +
                                        std::to_string(values[i]) + " outside symmetric range");
    }
    FixedTensor t;
    t.shape_ = std::move(shape);
    t.spec_ = spec;
    t.data_ = std::move(values);
    return t;
}

FixedTensor quantize(std::span<const double> values, std::vector<uint32_t> shape,
                     const QuantSpec& spec) {
    spec.validate();
    uint64_t n = shape_elements(shape);
    if (n != values.size())
        throw std::invalid_argument("value count does not match shape element count");
    FixedTensor t(std::move(shape), spec);
    double scale = std::ldexp(1.0, spec.frac_bits);
    double max = spec.range_max();
    for (size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw std::invalid_argument("non-finite input value at index " + std::to_string(i));
        double r = round_half_even(values[i] * scale);
        r = std::min(std::max(r, -max), max);
        t[i] = static_cast<int16_t>(r);
    }
    return t;
}

double dequantize_value(int16_t v, int frac_bits) { return std::ldexp(double(v), -frac_bits); }

std::vector<double> dequantize(const FixedTensor& t) {
    std::vector<double> out(t.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = dequantize_value(t[i], t.frac_bits());
    return out;
}

std::vector<uint8_t> encode_fxt1(const FixedTensor& t) {
    if (t.ndim() < 1 || t.ndim() > kMaxDims)
        throw FormatError(FormatErrc::BadHeader, "FXT1 supports 1 to 4 dimensions");
    std::vector<uint8_t> out;
    out.reserve(8 + 4 * t.ndim() + t.size() * (t.bitwidth() / 8));
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(static_cast<uint8_t>(t.bitwidth()));
    out.push_back(static_cast<uint8_t>(t.frac_bits()));
    out.push_back(static_cast<uint8_t>(t.ndim()));
    out.push_back(0);  // reserved
    for (uint32_t d : t.shape()) put_u32le(out, d);
    for (int16_t v : t.values()) {
        out.push_back(static_cast<uint8_t>(uint16_t(v) & 0xff));
        if (t.bitwidth() == 16) out.push_back(static_cast<uint8_t>(uint16_t(v) >> 8));
    }
    return out;
}

FixedTensor decode_fxt1(std::span<const uint8_t> bytes) {
    if (bytes.size() < 8) throw FormatError(FormatErrc::Truncated, "header shorter than 8 bytes");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(FormatErrc::BadMagic, "magic bytes are not FXT1");
    int bitwidth = bytes[4];
    int frac_bits = bytes[5];
    size_t ndim = bytes[6];
    if (bitwidth != 8 && bitwidth != 16)
        throw FormatError(FormatErrc::BadHeader, "bitwidth byte must be 8 or 16");
    if (frac_bits > bitwidth - 1)
        throw FormatError(FormatErrc::BadHeader, "frac_bits exceeds bitwidth-1");
    if (ndim < 1 || ndim > kMaxDims)
        throw FormatError(FormatErrc::BadHeader, "ndim byte must be 1 to 4");
    if (bytes[7] != 0) throw FormatError(FormatErrc::BadHeader, "reserved byte must be zero");
    if (bytes.size() < 8 + 4 * ndim)
        throw FormatError(FormatErrc::Truncated, "header truncated in dimension list");

    std::vector<uint32_t> shape(ndim);
    for (size_t i = 0; i < ndim; ++i) {
        shape[i] = get_u32le(bytes, 8 + 4 * i);
        if (shape[i] == 0) throw FormatError(FormatErrc::BadHeader, "zero-sized dimension");
    }
    uint64_t n = shape_elements(shape);
    size_t elem_bytes = bitwidth / 8;
    size_t payload_off = 8 + 4 * ndim;
    uint64_t expected = payload_off + n * elem_bytes;
    if (bytes.size() < expected)
        throw FormatError(FormatErrc::Truncated,
                          "payload holds fewer elements than the header declares");
    if (bytes.size() > expected)
        throw FormatError(FormatErrc::Truncated, "trailing bytes after declared payload");

    QuantSpec spec{bitwidth, frac_bits};
    std::vector<int16_t> data(n);
    int16_t max = spec.range_max();
    for (uint64_t i = 0; i < n; ++i) {
        int16_t v;
        if (bitwidth == 16) {
            v = static_cast<int16_t>(uint16_t(bytes[payload_off + 2 * i]) |
                                     uint16_t(bytes[payload_off + 2 * i + 1]) << 8);
        } else {
            v = static_cast<int8_t>(bytes[payload_off + i]);
        }
        if (v < -max || v > max)
            throw FormatError(FormatErrc::ValueRange,
                              "element " + std::to_string(i) + " outside symmetric range");
        data[i] = v;
    }
    return FixedTensor::from_values(std::move(shape), std::move(data), spec);
}

void save_tensor(const FixedTensor& t, const std::string& path) {
    std::vector<uint8_t> bytes = encode_fxt1(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrc::IoFailure, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw FormatError(FormatErrc::IoFailure, "write failed: " + path);
}

FixedTensor load_tensor(const std::string& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        throw FormatError(FormatErrc::IoFailure, "not a readable file: " + path);
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError(FormatErrc::IoFailure, "cannot open for reading: " + path);
    std::streamsize size = in.tellg();
    if (size < 0) throw FormatError(FormatErrc::IoFailure, "cannot size file: " + path);
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw FormatError(FormatErrc::IoFailure, "read failed: " + path);
    return decode_fxt1(bytes);
}

FixedTensor synth_tensor(std::vector<uint32_t> shape, const QuantSpec& spec, const SynthDist& dist,
                         uint64_t seed) {
    spec.validate();
    if (dist.kind == DistKind::PerBitBernoulli || dist.base == DistKind::PerBitBernoulli) {
        if (!(dist.density >= 0.0 && dist.density <= 1.0))
            throw std::invalid_argument("bit density must be in [0, 1]");
    }
    if (dist.kind == DistKind::Sparse) {
        if (!(dist.p_zero >= 0.0 && dist.p_zero <= 1.0))
            throw std::invalid_argument("p_zero must be in [0, 1]");
        if (dist.base == DistKind::Sparse)
            throw std::invalid_argument("sparse cannot be its own base distribution");
    }
    FixedTensor t(std::move(shape), spec);
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < t.size(); ++i) {
        if (dist.kind == DistKind::Sparse) {
            t[i] = bernoulli_draw(rng, dist.p_zero)
                       ? int16_t{0}
                       : draw_element(rng, spec, dist.base, dist.density);
        } else {
            t[i] = draw_element(rng, spec, dist.kind, dist.density);
        }
    }
    return t;
}

}  // namespace tetris
