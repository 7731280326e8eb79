#include <doctest.h>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qkd/gf.hpp"
#include "qkd/rng.hpp"

using namespace qkd;

namespace {

// Shift-and-reduce oracle for GF(2^l) multiplication with the field's own
// modulus polynomial.
uint64_t mul_oracle(uint64_t a, uint64_t b, int degree, uint64_t modulus) {
    uint64_t acc = 0;
    const uint64_t top = 1ULL << degree;
    for (int i = 0; i < degree; ++i)
        if ((b >> i) & 1) {
            uint64_t shifted = a;
            for (int k = 0; k < i; ++k) {
                shifted <<= 1;
                if (shifted & top) shifted ^= top | (modulus & (top - 1));
            }
            acc ^= shifted;
        }
    return acc;
}

// Trial division irreducibility over GF(2) for small degrees.
bool irreducible_oracle(uint64_t poly, int degree) {
    auto poly_mul = [](uint64_t x, uint64_t y) {
        uint64_t r = 0;
        for (int i = 0; i < 64 && (y >> i); ++i)
            if ((y >> i) & 1) r ^= x << i;
        return r;
    };
    auto deg = [](uint64_t p) { return 63 - __builtin_clzll(p); };
    for (uint64_t d = 2; deg(d) <= degree / 2; ++d) {
        // reduce poly mod d
        uint64_t r = poly;
        while (r && deg(r) >= deg(d)) r ^= d << (deg(r) - deg(d));
        if (r == 0) return false;
        (void)poly_mul;
    }
    return true;
}

}  // namespace

TEST_SUITE("gf") {

TEST_CASE("clmul matches schoolbook carry-less multiplication") {
    Rng rng(1);
    for (int trial = 0; trial < 2000; ++trial) {
        const uint64_t a = rng.bits64();
        const uint64_t b = rng.bits64() & 0xffffffffULL;
        unsigned __int128 expect = 0;
        for (int i = 0; i < 64; ++i)
            if ((a >> i) & 1) expect ^= static_cast<unsigned __int128>(b) << i;
        CHECK(clmul64(a, b) == expect);
    }
}

TEST_CASE("field multiplication matches the shift-reduce oracle") {
    Rng rng(2);
    for (int degree : {1, 2, 3, 8, 17, 19, 31, 47, 63}) {
        GF2m f(degree);
        CHECK(f.degree() == degree);
        const uint64_t mask = f.mask();
        for (int trial = 0; trial < 300; ++trial) {
            const uint64_t a = rng.bits64() & mask;
            const uint64_t b = rng.bits64() & mask;
            CHECK(f.mul(a, b) == mul_oracle(a, b, degree, f.modulus()));
        }
    }
}

TEST_CASE("the chosen modulus is irreducible for small degrees") {
    for (int degree = 1; degree <= 16; ++degree) {
        GF2m f(degree);
        const uint64_t poly = (1ULL << degree) | f.modulus();
        CHECK(irreducible_oracle(poly, degree));
        // lexicographically smallest: no smaller low part is irreducible
        for (uint64_t low = 1; low < (f.modulus() & f.mask()); ++low)
            CHECK_FALSE(irreducible_oracle((1ULL << degree) | low, degree));
    }
}

TEST_CASE("field axioms hold") {
    Rng rng(3);
    for (int degree : {8, 16, 33, 63}) {
        GF2m f(degree);
        const uint64_t mask = f.mask();
        for (int trial = 0; trial < 100; ++trial) {
            const uint64_t a = rng.bits64() & mask;
            const uint64_t b = rng.bits64() & mask;
            const uint64_t c = rng.bits64() & mask;
            CHECK(f.mul(a, b) == f.mul(b, a));
            CHECK(f.mul(a, f.mul(b, c)) == f.mul(f.mul(a, b), c));
            CHECK(f.mul(a, b ^ c) == (f.mul(a, b) ^ f.mul(a, c)));
            CHECK(f.mul(a, 1) == a);
            CHECK(f.mul(a, 0) == 0);
        }
        // nonzero elements are invertible: a^(2^l - 1) = 1
        for (int trial = 0; trial < 20; ++trial) {
            uint64_t a = rng.bits64() & mask;
            if (a == 0) a = 1;
            const uint64_t order = mask;  // 2^l - 1
            CHECK(f.pow(a, order) == 1);
        }
    }
}

TEST_CASE("pow matches repeated multiplication") {
    GF2m f(16);
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const uint64_t a = rng.bits64() & f.mask();
        uint64_t acc = 1;
        for (uint64_t e = 0; e < 20; ++e) {
            CHECK(f.pow(a, e) == acc);
            acc = f.mul(acc, a);
        }
    }
}

TEST_CASE("degree bounds") {
    CHECK_THROWS_AS(GF2m(0), std::domain_error);
    CHECK_THROWS_AS(GF2m(64), std::domain_error);
    CHECK_NOTHROW(GF2m(63));
}

TEST_CASE("small prime field arithmetic") {
    SmallField f7(7);
    CHECK(f7.characteristic() == 7);
    CHECK(f7.extension_degree() == 1);
    for (uint64_t a = 0; a < 7; ++a)
        for (uint64_t b = 0; b < 7; ++b) {
            CHECK(f7.add(a, b) == (a + b) % 7);
            CHECK(f7.mul(a, b) == (a * b) % 7);
        }
}

TEST_CASE("prime power field axioms") {
    for (uint64_t order : {uint64_t{9}, uint64_t{8}, uint64_t{25}, uint64_t{27}}) {
        SmallField f(order);
        CHECK(f.order() == order);
        for (uint64_t a = 0; a < order; ++a) {
            CHECK(f.mul(a, 1) == a);
            CHECK(f.mul(a, 0) == 0);
            CHECK(f.add(a, 0) == a);
        }
        for (uint64_t a = 0; a < order; ++a)
            for (uint64_t b = 0; b < order; ++b) {
                CHECK(f.mul(a, b) == f.mul(b, a));
                CHECK(f.add(a, b) == f.add(b, a));
                CHECK(f.mul(a, b) < order);
            }
        // distributivity and invertibility on a sample
        Rng rng(order);
        for (int trial = 0; trial < 200; ++trial) {
            const uint64_t a = rng.below(order);
            const uint64_t b = rng.below(order);
            const uint64_t c = rng.below(order);
            CHECK(f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c)));
            CHECK(f.mul(a, f.mul(b, c)) == f.mul(f.mul(a, b), c));
        }
        for (uint64_t a = 1; a < order; ++a) {
            bool has_inverse = false;
            for (uint64_t b = 1; b < order; ++b)
                if (f.mul(a, b) == 1) has_inverse = true;
            CHECK(has_inverse);
        }
    }
}

TEST_CASE("non prime powers are rejected") {
    CHECK_THROWS_AS(SmallField(6), std::domain_error);
    CHECK_THROWS_AS(SmallField(12), std::domain_error);
    CHECK_THROWS_AS(SmallField(1), std::domain_error);
    CHECK(SmallField::is_prime_power(49));
    CHECK_FALSE(SmallField::is_prime_power(10));
}

TEST_CASE("next_prime") {
    CHECK(next_prime(2) == 2);
    CHECK(next_prime(3) == 3);
    CHECK(next_prime(4) == 5);
    CHECK(next_prime(14) == 17);
    CHECK(next_prime(90) == 97);
    CHECK(next_prime(1000) == 1009);
}

}  // TEST_SUITE
