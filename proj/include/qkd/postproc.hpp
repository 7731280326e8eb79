#pragma once

#include <cstdint>

#include "qkd/bits.hpp"
#include "qkd/cascade.hpp"
#include "qkd/keyfile.hpp"
#include "qkd/session.hpp"
#include "qkd/transport.hpp"
#include "qkd/trevisan.hpp"

namespace qkd {

struct PostprocResult {
    KeyMaterial key;            // extracted, or reconciled when no budget remains
    int64_t leaked_bits = 0;    // Cascade disclosure
    int64_t corrections = 0;    // zero on the reference side
    double min_entropy = 0.0;   // entropy credited to the reconciled key
    size_t extracted_bits = 0;  // zero when extraction was skipped
};

// Distills a sifted key over the session transport: Cascade reconciliation
// (Alice is the parity reference), min-entropy accounting
// k = n (1 - h(qber)) - leaked - margin, then Trevisan extraction with a
// public seed derived from the shared session seed. Both endpoints must pass
// the same qber estimate, config, and seed.
PostprocResult run_postproc(Role role, const Bits& sifted, double qber_estimate,
                            const PostprocConfig& cfg, uint64_t shared_seed,
                            Transport& transport);

}  // namespace qkd
