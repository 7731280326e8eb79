#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/bits.hpp"

namespace qkd {

struct KeyFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class KeyStage : uint8_t { Sifted = 0, Reconciled = 1, Extracted = 2 };

std::string key_stage_name(KeyStage s);

// Distilled key at one stage of the pipeline, plus the accounting needed to
// bound what an eavesdropper could know about it.
struct KeyMaterial {
    KeyStage stage = KeyStage::Sifted;
    Bits bits;
    int64_t leaked_bits = 0;        // reconciliation disclosure
    double extraction_error = 0.0;  // extractor epsilon, 0 before extraction
    uint64_t consumed_bits = 0;     // one-time-pad ledger, never rewound

    uint64_t available_bits() const {
        return consumed_bits >= bits.size() ? 0 : bits.size() - consumed_bits;
    }
    void validate() const;
};

// QKEY container: "QKEY" magic, u16 version, u8 stage, u8 reserved,
// u64 bit length, u64 leaked bits, f64 epsilon, u64 consumed bits (all
// little endian), then the packed key bytes.
std::vector<uint8_t> encode_key(const KeyMaterial& key);
KeyMaterial decode_key(const std::vector<uint8_t>& data);

void write_key_file(const std::string& path, const KeyMaterial& key);
KeyMaterial read_key_file(const std::string& path);

// One-time pad over the next unconsumed key region. Requires an extracted
// key with at least 8 * data.size() available bits; advances consumed_bits
// so the region can never be reused. Encrypt and decrypt are the same XOR,
// applied to independent copies of the key on the two sides.
std::vector<uint8_t> otp_encrypt(const std::vector<uint8_t>& plaintext, KeyMaterial& key);
std::vector<uint8_t> otp_decrypt(const std::vector<uint8_t>& ciphertext, KeyMaterial& key);

}  // namespace qkd
