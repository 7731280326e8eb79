#pragma once

#include <cstdint>

#include "qkd/bits.hpp"
#include "qkd/transport.hpp"

namespace qkd {

struct ReconcileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CascadeConfig {
    int passes = 4;
    double first_block_factor = 0.73;  // first-pass block size = ceil(factor / qber)
    uint64_t shuffle_seed = 0x5ca5cadeULL;  // shared; passes >= 2 permute the key
};

struct CascadeResult {
    int64_t leaked_bits = 0;   // parity bits disclosed by the reference side
    int64_t corrections = 0;   // bit flips applied on the follower side
    int passes_run = 0;
    bool verified = false;     // key hashes matched at termination
};

// Interactive Cascade over a classical transport. The reference side
// (Alice) answers parity queries and never changes its key; the follower
// (Bob) corrects its key in place to match. Each pass ends with a key-hash
// comparison; the protocol stops early once the hashes agree. Throws
// ReconcileError if the keys still differ after the configured passes.
//
// Both sides must pass the same qber_estimate and config. leaked_bits counts
// every parity the reference disclosed and is identical on both sides.
CascadeResult cascade_reconcile(Bits& key, bool is_reference, double qber_estimate,
                                const CascadeConfig& cfg, Transport& transport);

// Binary entropy h(p) in bits.
double binary_entropy(double p);

}  // namespace qkd
