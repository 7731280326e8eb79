#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#if defined(__PCLMUL__)
#include <immintrin.h>
#endif

namespace qkd {

// Carry-less 64x64 -> 128 bit multiplication (polynomial product over GF(2)).
inline unsigned __int128 clmul64(uint64_t a, uint64_t b) {
#if defined(__PCLMUL__)
    const __m128i va = _mm_set_epi64x(0, static_cast<long long>(a));
    const __m128i vb = _mm_set_epi64x(0, static_cast<long long>(b));
    const __m128i r = _mm_clmulepi64_si128(va, vb, 0x00);
    const uint64_t lo = static_cast<uint64_t>(_mm_cvtsi128_si64(r));
    const uint64_t hi = static_cast<uint64_t>(_mm_cvtsi128_si64(_mm_srli_si128(r, 8)));
    return (static_cast<unsigned __int128>(hi) << 64) | lo;
#else
    unsigned __int128 r = 0;
    unsigned __int128 x = a;
    while (b) {
        if (b & 1) r ^= x;
        x <<= 1;
        b >>= 1;
    }
    return r;
#endif
}

// GF(2^l) for 1 <= l <= 63. The modulus is the lexicographically smallest
// irreducible polynomial of degree l, found at construction time, so two
// instances with the same degree are interchangeable. Multiplication uses a
// carry-less product followed by Barrett reduction.
class GF2m {
public:
    explicit GF2m(int degree);

    int degree() const { return l_; }
    uint64_t modulus() const { return poly_; }  // includes the x^l term
    uint64_t mask() const { return mask_; }

    static uint64_t add(uint64_t a, uint64_t b) { return a ^ b; }
    uint64_t mul(uint64_t a, uint64_t b) const {
        const unsigned __int128 c = clmul64(a, b);  // degree <= 2l-2
        const uint64_t c_hi = static_cast<uint64_t>(c >> l_);
        const uint64_t q = static_cast<uint64_t>(clmul64(c_hi, mu_) >> l_);
        return static_cast<uint64_t>(c ^ clmul64(q, poly_)) & mask_;
    }
    uint64_t pow(uint64_t a, uint64_t e) const;

private:
    int l_;
    uint64_t poly_;  // irreducible modulus f, bit l set
    uint64_t mu_;    // Barrett constant floor(x^{2l} / f), bit l set
    uint64_t mask_;
};

// GF(p^k) for small orders (the weak design only needs fields up to a few
// hundred elements). Elements are integers in [0, order); the base-p digits
// of an element are its polynomial coefficients, digit i multiplying x^i.
// Throws std::domain_error if the order is not a prime power.
class SmallField {
public:
    explicit SmallField(uint64_t order);

    uint64_t order() const { return order_; }
    uint64_t characteristic() const { return p_; }
    int extension_degree() const { return k_; }

    uint64_t add(uint64_t a, uint64_t b) const;
    uint64_t mul(uint64_t a, uint64_t b) const;

    static bool is_prime_power(uint64_t n);

private:
    uint64_t p_ = 0;
    uint64_t order_ = 0;
    int k_ = 0;
    std::vector<uint32_t> modulus_;  // monic irreducible of degree k over GF(p), k+1 coefficients

    std::vector<uint32_t> digits(uint64_t a) const;
    uint64_t undigits(const std::vector<uint32_t>& d) const;
};

// Smallest prime >= n (n >= 2).
uint64_t next_prime(uint64_t n);

}  // namespace qkd
