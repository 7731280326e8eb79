#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkd {

// Packed bit string. Bit 0 is the least significant bit of byte 0.
class Bits {
public:
    Bits() = default;
    explicit Bits(size_t n) : n_(n), bytes_((n + 7) / 8, 0) {}
    Bits(size_t n, std::vector<uint8_t> bytes) : n_(n), bytes_(std::move(bytes)) {
        if (bytes_.size() != (n_ + 7) / 8) throw std::invalid_argument("Bits: byte count mismatch");
    }

    size_t size() const { return n_; }
    bool empty() const { return n_ == 0; }

    bool get(size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1; }

    void set(size_t i, bool v) {
        uint8_t mask = static_cast<uint8_t>(1u << (i & 7));
        if (v) bytes_[i >> 3] |= mask;
        else bytes_[i >> 3] &= static_cast<uint8_t>(~mask);
    }

    void flip(size_t i) { bytes_[i >> 3] ^= static_cast<uint8_t>(1u << (i & 7)); }

    void push_back(bool v) {
        if (n_ % 8 == 0) bytes_.push_back(0);
        ++n_;
        set(n_ - 1, v);
    }

    void append(const Bits& other) {
        for (size_t i = 0; i < other.size(); ++i) push_back(other.get(i));
    }

    Bits slice(size_t begin, size_t len) const {
        Bits out(len);
        for (size_t i = 0; i < len; ++i) out.set(i, get(begin + i));
        return out;
    }

    size_t hamming_distance(const Bits& other) const {
        if (n_ != other.n_) throw std::invalid_argument("Bits: length mismatch");
        size_t d = 0;
        for (size_t i = 0; i < bytes_.size(); ++i) {
            uint8_t x = bytes_[i] ^ other.bytes_[i];
            d += static_cast<size_t>(__builtin_popcount(x));
        }
        return d;
    }

    bool operator==(const Bits& other) const {
        if (n_ != other.n_) return false;
        return bytes_ == other.bytes_;
    }
    bool operator!=(const Bits& other) const { return !(*this == other); }

    const std::vector<uint8_t>& bytes() const { return bytes_; }

    // Non-cryptographic content hash (FNV-1a over packed bytes + length).
    uint64_t content_hash() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](uint8_t b) { h = (h ^ b) * 0x100000001b3ULL; };
        for (uint8_t b : bytes_) mix(b);
        for (int i = 0; i < 8; ++i) mix(static_cast<uint8_t>(n_ >> (8 * i)));
        return h;
    }

    std::string to_string() const {
        std::string s(n_, '0');
        for (size_t i = 0; i < n_; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

    static Bits from_string(const std::string& s) {
        Bits b(s.size());
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '0' && s[i] != '1') throw std::invalid_argument("Bits: bad character");
            b.set(i, s[i] == '1');
        }
        return b;
    }

private:
    size_t n_ = 0;
    std::vector<uint8_t> bytes_;
};

}  // namespace qkd
