#include "qkd/postproc.hpp"

#include <algorithm>
#include <cmath>

#include "qkd/rng.hpp"

namespace qkd {

PostprocResult run_postproc(Role role, const Bits& sifted, double qber_estimate,
                            const PostprocConfig& cfg, uint64_t shared_seed,
                            Transport& transport) {
    PostprocResult res;
    Bits key = sifted;

    CascadeConfig cascade_cfg;
    cascade_cfg.passes = cfg.cascade_passes;
    cascade_cfg.shuffle_seed = derive_seed(shared_seed, "cascade-shuffle");
    const CascadeResult cas =
        cascade_reconcile(key, role == Role::Alice, qber_estimate, cascade_cfg, transport);
    res.leaked_bits = cas.leaked_bits;
    res.corrections = cas.corrections;

    const double n = static_cast<double>(key.size());
    res.min_entropy = std::max(
        0.0, n * (1.0 - binary_entropy(qber_estimate)) - static_cast<double>(cas.leaked_bits) -
                 cfg.security_margin_bits);

    const size_t m = extractable_bits(res.min_entropy, cfg.epsilon);
    if (m == 0) {
        res.key.stage = KeyStage::Reconciled;
        res.key.bits = std::move(key);
        res.key.leaked_bits = cas.leaked_bits;
        return res;
    }

    ExtractorParams params;
    params.input_length = key.size();
    params.output_length = m;
    params.min_entropy = res.min_entropy;
    params.epsilon = cfg.epsilon;
    const ExtractorGeometry geo = extractor_geometry(key.size(), cfg.epsilon);
    Rng seed_rng(derive_seed(shared_seed, "extractor-seed"));
    params.seed = Bits(geo.seed_length());
    for (size_t i = 0; i < params.seed.size(); ++i) params.seed.set(i, seed_rng.bernoulli(0.5));

    res.key.stage = KeyStage::Extracted;
    res.key.bits = trevisan_extract(key, params);
    res.key.leaked_bits = cas.leaked_bits;
    res.key.extraction_error = cfg.epsilon;
    res.extracted_bits = m;
    return res;
}

}  // namespace qkd
