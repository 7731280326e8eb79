#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qkd/bits.hpp"

namespace qkd {

struct ExtractorError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ExtractorParams {
    size_t input_length = 0;   // n
    size_t output_length = 0;  // m
    double min_entropy = 0.0;  // k, in bits
    double epsilon = 1e-6;
    Bits seed;                 // length t^2 from extractor_geometry
};

// Derived construction sizes. The one-bit extractor works over GF(2^l) with
// l = ceil(log2 n + 2 log2(2/eps)) capped at 63; each subseed is 2l bits.
// The weak design runs over GF(t) with t the smallest prime >= 2l, giving a
// total seed of t^2 bits.
struct ExtractorGeometry {
    int l = 0;
    uint64_t t = 0;
    size_t seed_length() const { return static_cast<size_t>(t) * static_cast<size_t>(t); }
};

ExtractorGeometry extractor_geometry(size_t n, double epsilon);

// Polynomial weak design: m subsets of [0, t^2), each of size t, with
// pairwise overlap at most ceil(log2 m). Set i enumerates the graph of the
// polynomial whose GF(t) coefficients are the base-t digits of i:
// S_i = { x*t + p_i(x) : x in [0, t) }. Throws ExtractorError if t is not a
// prime power or m < 1.
std::vector<std::vector<uint64_t>> weak_design(uint64_t m, uint64_t t);

// Reed-Solomon + Hadamard one-bit extractor. The subseed is 2l bits holding
// field elements (alpha, beta) of GF(2^l); the input is split into l-bit
// symbols c_j (zero padded), and the output is parity(q(alpha) & beta) with
// q(y) = sum c_j y^j. Throws ExtractorError on an odd or oversized subseed.
int one_bit_extract(const Bits& input, const Bits& subseed);

// Full extractor: output bit i = one_bit_extract(input, seed restricted to
// weak_design set i, truncated to 2l bits). Validates
// m <= k - 4 log2(1/eps) - 6, k <= n, and the seed length before computing.
Bits trevisan_extract(const Bits& input, const ExtractorParams& params);

// Largest admissible output length for the given budget, or 0 if none.
size_t extractable_bits(double min_entropy, double epsilon);

}  // namespace qkd
