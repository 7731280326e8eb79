#include "qkd/trevisan.hpp"

#include <algorithm>
#include <cmath>

#include "qkd/gf.hpp"

namespace qkd {

namespace {

uint64_t read_field_element(const Bits& bits, size_t offset, int l) {
    uint64_t v = 0;
    for (int j = 0; j < l; ++j)
        if (bits.get(offset + static_cast<size_t>(j))) v |= uint64_t{1} << j;
    return v;
}

uint64_t read_scattered_element(const Bits& seed, const std::vector<uint64_t>& positions,
                                size_t offset, int l) {
    uint64_t v = 0;
    for (int j = 0; j < l; ++j)
        if (seed.get(static_cast<size_t>(positions[offset + static_cast<size_t>(j)]))) v |= uint64_t{1} << j;
    return v;
}

// input split into ceil(n/l) little-endian l-bit symbols, zero padded
std::vector<uint64_t> input_symbols(const Bits& input, int l) {
    const size_t n = input.size();
    const size_t s = (n + static_cast<size_t>(l) - 1) / static_cast<size_t>(l);
    std::vector<uint64_t> sym(std::max<size_t>(s, 1), 0);
    for (size_t i = 0; i < n; ++i)
        if (input.get(i)) sym[i / static_cast<size_t>(l)] |= uint64_t{1} << (i % static_cast<size_t>(l));
    return sym;
}

int parity64(uint64_t v) { return __builtin_parityll(v); }

}  // namespace

ExtractorGeometry extractor_geometry(size_t n, double epsilon) {
    if (n == 0) throw ExtractorError("extractor: empty input");
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ExtractorError("extractor: epsilon outside (0, 1)");
    const double raw = std::log2(static_cast<double>(n)) + 2.0 * std::log2(2.0 / epsilon);
    ExtractorGeometry g;
    g.l = std::clamp(static_cast<int>(std::ceil(raw)), 1, 63);
    g.t = next_prime(static_cast<uint64_t>(2 * g.l));
    return g;
}

std::vector<std::vector<uint64_t>> weak_design(uint64_t m, uint64_t t) {
    if (m < 1) throw ExtractorError("weak_design: m must be >= 1");
    if (!SmallField::is_prime_power(t)) throw ExtractorError("weak_design: t is not a prime power");
    const SmallField field(t);

    // coefficient count: fewest base-t digits covering indices up to m-1
    int c = 1;
    {
        uint64_t v = m - 1;
        while (v >= t) {
            v /= t;
            ++c;
        }
    }

    std::vector<std::vector<uint64_t>> design(m);
    std::vector<uint64_t> coeff(static_cast<size_t>(c), 0);
    for (uint64_t i = 0; i < m; ++i) {
        uint64_t v = i;
        for (int d = 0; d < c; ++d) {
            coeff[static_cast<size_t>(d)] = v % t;
            v /= t;
        }
        auto& set = design[i];
        set.reserve(t);
        for (uint64_t x = 0; x < t; ++x) {
            uint64_t y = 0;
            for (int d = c - 1; d >= 0; --d) y = field.add(field.mul(y, x), coeff[static_cast<size_t>(d)]);
            set.push_back(x * t + y);
        }
    }
    return design;
}

int one_bit_extract(const Bits& input, const Bits& subseed) {
    if (subseed.size() % 2 != 0 || subseed.empty())
        throw ExtractorError("one_bit_extract: subseed length must be even and positive");
    const size_t l = subseed.size() / 2;
    if (l > 63) throw ExtractorError("one_bit_extract: subseed longer than construction allows");
    if (input.empty()) throw ExtractorError("one_bit_extract: empty input");

    const GF2m field(static_cast<int>(l));
    const uint64_t alpha = read_field_element(subseed, 0, static_cast<int>(l));
    const uint64_t beta = read_field_element(subseed, l, static_cast<int>(l));

    const auto sym = input_symbols(input, static_cast<int>(l));
    uint64_t acc = 0;
    for (size_t j = sym.size(); j-- > 0;) acc = field.mul(acc, alpha) ^ sym[j];
    return parity64(acc & beta);
}

size_t extractable_bits(double min_entropy, double epsilon) {
    const double budget = min_entropy - 4.0 * std::log2(1.0 / epsilon) - 6.0;
    return budget > 0 ? static_cast<size_t>(std::floor(budget)) : 0;
}

Bits trevisan_extract(const Bits& input, const ExtractorParams& params) {
    const size_t n = input.size();
    if (params.input_length != n)
        throw ExtractorError("trevisan_extract: input length does not match params");
    if (params.output_length < 1) throw ExtractorError("trevisan_extract: output length must be >= 1");
    if (params.min_entropy > static_cast<double>(n))
        throw ExtractorError("trevisan_extract: min-entropy exceeds input length");
    const ExtractorGeometry geo = extractor_geometry(n, params.epsilon);
    if (static_cast<double>(params.output_length) >
        static_cast<double>(extractable_bits(params.min_entropy, params.epsilon)))
        throw ExtractorError("trevisan_extract: output exceeds the extractable budget");
    if (params.seed.size() != geo.seed_length())
        throw ExtractorError("trevisan_extract: seed length must be t^2 = " +
                             std::to_string(geo.seed_length()));

    const size_t m = params.output_length;
    const auto design = weak_design(m, geo.t);
    const GF2m field(geo.l);
    const auto sym = input_symbols(input, geo.l);

    // each output bit gets its own (alpha, beta) from the first 2l seed bits
    // selected by its design set
    std::vector<uint64_t> alphas(m), betas(m);
    for (size_t i = 0; i < m; ++i) {
        alphas[i] = read_scattered_element(params.seed, design[i], 0, geo.l);
        betas[i] = read_scattered_element(params.seed, design[i], static_cast<size_t>(geo.l), geo.l);
    }

    // Horner evaluation, four independent chains at a time to overlap the
    // carry-less multiplier latency
    Bits out(m);
    size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        uint64_t a0 = 0, a1 = 0, a2 = 0, a3 = 0;
        const uint64_t x0 = alphas[i], x1 = alphas[i + 1], x2 = alphas[i + 2], x3 = alphas[i + 3];
        for (size_t j = sym.size(); j-- > 0;) {
            const uint64_t c = sym[j];
            a0 = field.mul(a0, x0) ^ c;
            a1 = field.mul(a1, x1) ^ c;
            a2 = field.mul(a2, x2) ^ c;
            a3 = field.mul(a3, x3) ^ c;
        }
        out.set(i, parity64(a0 & betas[i]));
        out.set(i + 1, parity64(a1 & betas[i + 1]));
        out.set(i + 2, parity64(a2 & betas[i + 2]));
        out.set(i + 3, parity64(a3 & betas[i + 3]));
    }
    for (; i < m; ++i) {
        uint64_t acc = 0;
        for (size_t j = sym.size(); j-- > 0;) acc = field.mul(acc, alphas[i]) ^ sym[j];
        out.set(i, parity64(acc & betas[i]));
    }
    return out;
}

}  // namespace qkd
