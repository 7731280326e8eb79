#include "qkd/keyfile.hpp"

#include <cstring>
#include <fstream>

namespace qkd {

namespace {

constexpr char kMagic[4] = {'Q', 'K', 'E', 'Y'};
constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderSize = 40;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (uint16_t{p[1]} << 8));
}

uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t{p[i]} << (8 * i);
    return v;
}

}  // namespace

std::string key_stage_name(KeyStage s) {
    switch (s) {
        case KeyStage::Sifted: return "sifted";
        case KeyStage::Reconciled: return "reconciled";
        case KeyStage::Extracted: return "extracted";
    }
    return "unknown";
}

void KeyMaterial::validate() const {
    if (leaked_bits < 0) throw KeyFileError("key: negative leakage");
    if (static_cast<uint64_t>(leaked_bits) > bits.size() && stage != KeyStage::Extracted)
        throw KeyFileError("key: leakage exceeds key length");
    if (extraction_error < 0.0 || extraction_error >= 1.0)
        throw KeyFileError("key: extraction error outside [0, 1)");
    if (consumed_bits > bits.size()) throw KeyFileError("key: consumed bits exceed key length");
}

std::vector<uint8_t> encode_key(const KeyMaterial& key) {
    key.validate();
    std::vector<uint8_t> out;
    out.reserve(kHeaderSize + key.bits.bytes().size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    out.push_back(static_cast<uint8_t>(key.stage));
    out.push_back(0);
    put_u64(out, key.bits.size());
    put_u64(out, static_cast<uint64_t>(key.leaked_bits));
    uint64_t eps_bits;
    static_assert(sizeof(eps_bits) == sizeof(key.extraction_error));
    std::memcpy(&eps_bits, &key.extraction_error, 8);
    put_u64(out, eps_bits);
    put_u64(out, key.consumed_bits);
    out.insert(out.end(), key.bits.bytes().begin(), key.bits.bytes().end());
    return out;
}

KeyMaterial decode_key(const std::vector<uint8_t>& data) {
    if (data.size() < kHeaderSize) throw KeyFileError("key file: truncated header");
    if (std::memcmp(data.data(), kMagic, 4) != 0) throw KeyFileError("key file: bad magic");
    if (get_u16(data.data() + 4) != kVersion) throw KeyFileError("key file: unsupported version");
    const uint8_t stage = data[6];
    if (stage > 2) throw KeyFileError("key file: unknown stage");
    const uint64_t n_bits = get_u64(data.data() + 8);
    const uint64_t leaked = get_u64(data.data() + 16);
    const uint64_t eps_bits = get_u64(data.data() + 24);
    const uint64_t consumed = get_u64(data.data() + 32);
    const size_t n_bytes = static_cast<size_t>((n_bits + 7) / 8);
    if (data.size() != kHeaderSize + n_bytes) throw KeyFileError("key file: payload size mismatch");

    KeyMaterial key;
    key.stage = static_cast<KeyStage>(stage);
    key.bits = Bits(static_cast<size_t>(n_bits),
                    std::vector<uint8_t>(data.begin() + kHeaderSize, data.end()));
    key.leaked_bits = static_cast<int64_t>(leaked);
    std::memcpy(&key.extraction_error, &eps_bits, 8);
    key.consumed_bits = consumed;
    key.validate();
    return key;
}

void write_key_file(const std::string& path, const KeyMaterial& key) {
    const auto data = encode_key(key);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw KeyFileError("key file: cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw KeyFileError("key file: write failed for " + path);
}

KeyMaterial read_key_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw KeyFileError("key file: cannot open " + path);
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_key(data);
}

namespace {

std::vector<uint8_t> otp_apply(const std::vector<uint8_t>& data, KeyMaterial& key) {
    key.validate();
    if (key.stage != KeyStage::Extracted)
        throw KeyFileError("otp: key must be extracted, got stage " + key_stage_name(key.stage));
    const uint64_t needed = 8 * static_cast<uint64_t>(data.size());
    if (key.available_bits() < needed)
        throw KeyFileError("otp: insufficient key material, need " + std::to_string(needed) +
                           " bits but only " + std::to_string(key.available_bits()) +
                           " remain unconsumed");
    std::vector<uint8_t> out(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        uint8_t pad = 0;
        for (int b = 0; b < 8; ++b)
            if (key.bits.get(static_cast<size_t>(key.consumed_bits) + 8 * i +
                             static_cast<size_t>(b)))
                pad |= static_cast<uint8_t>(1u << b);
        out[i] = data[i] ^ pad;
    }
    key.consumed_bits += needed;
    return out;
}

}  // namespace

std::vector<uint8_t> otp_encrypt(const std::vector<uint8_t>& plaintext, KeyMaterial& key) {
    return otp_apply(plaintext, key);
}

std::vector<uint8_t> otp_decrypt(const std::vector<uint8_t>& ciphertext, KeyMaterial& key) {
    return otp_apply(ciphertext, key);
}

}  // namespace qkd
