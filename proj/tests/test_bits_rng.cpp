#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "qkd/bits.hpp"
#include "qkd/rng.hpp"

using namespace qkd;

TEST_SUITE("bits_rng") {

TEST_CASE("bits set get flip") {
    Bits b(20);
    CHECK(b.size() == 20);
    for (size_t i = 0; i < 20; ++i) CHECK_FALSE(b.get(i));
    b.set(3, true);
    b.set(19, true);
    CHECK(b.get(3));
    CHECK(b.get(19));
    b.flip(3);
    CHECK_FALSE(b.get(3));
    b.flip(3);
    CHECK(b.get(3));
}

TEST_CASE("bit zero is the least significant bit of byte zero") {
    Bits b(8);
    b.set(0, true);
    CHECK(b.bytes()[0] == 0x01);
    b.set(7, true);
    CHECK(b.bytes()[0] == 0x81);
}

TEST_CASE("push_back and append") {
    Bits b;
    for (int i = 0; i < 10; ++i) b.push_back(i % 3 == 0);
    CHECK(b.size() == 10);
    CHECK(b.get(0));
    CHECK_FALSE(b.get(1));
    CHECK(b.get(9));
    Bits c = b;
    c.append(b);
    CHECK(c.size() == 20);
    CHECK(c.get(10) == b.get(0));
    CHECK(c.get(19) == b.get(9));
}

TEST_CASE("slice and string round trip") {
    const Bits b = Bits::from_string("1101001110");
    CHECK(b.to_string() == "1101001110");
    CHECK(b.slice(2, 5).to_string() == "01001");
    CHECK_THROWS_AS(Bits::from_string("10a"), std::invalid_argument);
}

TEST_CASE("hamming distance and equality") {
    const Bits a = Bits::from_string("110100");
    Bits b = a;
    CHECK(a == b);
    CHECK(a.hamming_distance(b) == 0);
    b.flip(0);
    b.flip(5);
    CHECK(a != b);
    CHECK(a.hamming_distance(b) == 2);
    CHECK_THROWS_AS(a.hamming_distance(Bits(7)), std::invalid_argument);
}

TEST_CASE("content hash depends on content and length") {
    Bits a = Bits::from_string("1010");
    Bits b = Bits::from_string("1010");
    CHECK(a.content_hash() == b.content_hash());
    b.flip(2);
    CHECK(a.content_hash() != b.content_hash());
    CHECK(Bits(8).content_hash() != Bits(9).content_hash());
}

TEST_CASE("derive_seed separates streams") {
    std::set<uint64_t> seen;
    for (uint64_t s : {uint64_t{1}, uint64_t{2}}) {
        seen.insert(derive_seed(s, "alpha"));
        seen.insert(derive_seed(s, "beta"));
        seen.insert(derive_seed(s, "alpha", 1));
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("rng uniform range and determinism") {
    Rng a(7), b(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(u == b.uniform());
    }
    Rng c(8);
    int heads = 0;
    for (int i = 0; i < 100000; ++i) heads += c.bernoulli(0.5);
    CHECK(std::abs(heads - 50000) < 1000);
}

TEST_CASE("stable_shuffle is a deterministic permutation") {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    stable_shuffle(w, 5);
    auto w2 = v;
    stable_shuffle(w2, 5);
    CHECK(w == w2);
    CHECK(w != v);
    auto sorted = w;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);
    auto other = v;
    stable_shuffle(other, 6);
    CHECK(other != w);
}

}  // TEST_SUITE
