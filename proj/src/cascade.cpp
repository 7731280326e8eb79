#include "qkd/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd {

using nlohmann::json;

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

namespace {

constexpr const char* kMsg = "CASCADE";

struct Interval {
    int pass;
    size_t lo, hi;  // [lo, hi) in pass positions
};

// Reference side: a parity oracle over its fixed key.
CascadeResult serve_reference(const Bits& key, const std::vector<std::vector<size_t>>& perms,
                              Transport& transport) {
    CascadeResult res;
    for (;;) {
        const Message m = transport.expect(kMsg);
        const std::string op = m.body.value("op", std::string{});
        if (op == "parities") {
            std::vector<int> out;
            for (const auto& iv : m.body.at("intervals")) {
                const int pass = iv.at(0).get<int>();
                const size_t lo = iv.at(1).get<size_t>();
                const size_t hi = iv.at(2).get<size_t>();
                int parity = 0;
                for (size_t pos = lo; pos < hi; ++pos)
                    parity ^= key.get(perms[static_cast<size_t>(pass)][pos]) ? 1 : 0;
                out.push_back(parity);
            }
            res.leaked_bits += static_cast<int64_t>(out.size());
            transport.send({kMsg, json{{"op", "parities"}, {"parities", out}}});
        } else if (op == "hash") {
            transport.send({kMsg, json{{"op", "hash"}, {"hash", key.content_hash()}}});
        } else if (op == "done") {
            res.verified = m.body.value("verified", false);
            res.passes_run = m.body.value("passes", 0);
            if (!res.verified)
                throw ReconcileError("cascade: keys still differ after max passes (leaked " +
                                     std::to_string(res.leaked_bits) + " bits)");
            return res;
        } else {
            throw ProtocolError("cascade: unknown op " + op);
        }
    }
}

}  // namespace

CascadeResult cascade_reconcile(Bits& key, bool is_reference, double qber_estimate,
                                const CascadeConfig& cfg, Transport& transport) {
    const size_t n = key.size();
    if (n == 0) throw ReconcileError("cascade: empty key");
    if (qber_estimate < 0 || qber_estimate >= 0.5)
        throw ReconcileError("cascade: qber estimate outside [0, 0.5)");

    // block sizes per pass, doubling, clamped to the key length
    size_t k1;
    if (qber_estimate <= 0.0) {
        k1 = n;
    } else {
        const double k = std::ceil(cfg.first_block_factor / qber_estimate);
        k1 = k >= static_cast<double>(n) ? n : static_cast<size_t>(k);
    }
    std::vector<size_t> block_size(static_cast<size_t>(cfg.passes));
    for (int i = 0; i < cfg.passes; ++i)
        block_size[static_cast<size_t>(i)] = std::min(n, k1 << i);

    // shared permutations: pass 0 keeps key order
    std::vector<std::vector<size_t>> perms(static_cast<size_t>(cfg.passes));
    std::vector<std::vector<size_t>> inv(static_cast<size_t>(cfg.passes));
    for (int i = 0; i < cfg.passes; ++i) {
        auto& perm = perms[static_cast<size_t>(i)];
        perm.resize(n);
        std::iota(perm.begin(), perm.end(), size_t{0});
        if (i > 0) stable_shuffle(perm, derive_seed(cfg.shuffle_seed, "cascade-pass",
                                                    static_cast<uint64_t>(i)));
        auto& iv = inv[static_cast<size_t>(i)];
        iv.resize(n);
        for (size_t pos = 0; pos < n; ++pos) iv[perm[pos]] = pos;
    }

    if (is_reference) return serve_reference(key, perms, transport);

    // ----- follower side -----
    CascadeResult res;

    auto query_parities = [&](const std::vector<Interval>& intervals) {
        json ivs = json::array();
        for (const auto& iv : intervals) ivs.push_back({iv.pass, iv.lo, iv.hi});
        transport.send({kMsg, json{{"op", "parities"}, {"intervals", ivs}}});
        const auto reply = transport.expect(kMsg).body;
        const auto parities = reply.at("parities").get<std::vector<int>>();
        if (parities.size() != intervals.size()) throw ProtocolError("cascade: parity count mismatch");
        res.leaked_bits += static_cast<int64_t>(parities.size());
        return parities;
    };
    auto own_parity = [&](int pass, size_t lo, size_t hi) {
        int parity = 0;
        for (size_t pos = lo; pos < hi; ++pos)
            parity ^= key.get(perms[static_cast<size_t>(pass)][pos]) ? 1 : 0;
        return parity;
    };
    auto blocks_in = [&](int pass) {
        return (n + block_size[static_cast<size_t>(pass)] - 1) / block_size[static_cast<size_t>(pass)];
    };
    auto block_range = [&](int pass, size_t b) {
        const size_t k = block_size[static_cast<size_t>(pass)];
        return std::pair<size_t, size_t>{b * k, std::min(n, (b + 1) * k)};
    };

    // diff[pass][block]: parity mismatch against the reference, for started passes
    std::vector<std::vector<char>> diff(static_cast<size_t>(cfg.passes));

    auto flip_bit = [&](size_t orig, int started_passes) {
        key.flip(orig);
        ++res.corrections;
        for (int pass = 0; pass < started_passes; ++pass) {
            const size_t b = inv[static_cast<size_t>(pass)][orig] /
                             block_size[static_cast<size_t>(pass)];
            diff[static_cast<size_t>(pass)][b] ^= 1;
        }
    };

    // batched binary search over disjoint odd blocks of one pass
    auto binary_batch = [&](int pass, const std::vector<size_t>& blocks, int started_passes) {
        std::vector<Interval> active;
        for (size_t b : blocks) {
            auto [lo, hi] = block_range(pass, b);
            active.push_back({pass, lo, hi});
        }
        while (true) {
            std::vector<Interval> queries;
            for (const auto& iv : active)
                if (iv.hi - iv.lo > 1) queries.push_back({iv.pass, iv.lo, (iv.lo + iv.hi) / 2});
            if (queries.empty()) break;
            const auto ref = query_parities(queries);
            size_t qi = 0;
            for (auto& iv : active) {
                if (iv.hi - iv.lo <= 1) continue;
                const size_t mid = (iv.lo + iv.hi) / 2;
                const int d = ref[qi++] ^ own_parity(iv.pass, iv.lo, mid);
                if (d) iv.hi = mid;   // error in the first half
                else iv.lo = mid;     // parity matches there, so the error is in the second half
            }
        }
        for (const auto& iv : active) flip_bit(perms[static_cast<size_t>(iv.pass)][iv.lo],
                                               started_passes);
    };

    int pass = 0;
    for (; pass < cfg.passes; ++pass) {
        const size_t nb = blocks_in(pass);
        std::vector<Interval> initial;
        for (size_t b = 0; b < nb; ++b) {
            auto [lo, hi] = block_range(pass, b);
            initial.push_back({pass, lo, hi});
        }
        const auto ref = query_parities(initial);
        diff[static_cast<size_t>(pass)].assign(nb, 0);
        for (size_t b = 0; b < nb; ++b) {
            auto [lo, hi] = block_range(pass, b);
            diff[static_cast<size_t>(pass)][b] =
                static_cast<char>(ref[b] ^ own_parity(pass, lo, hi));
        }

        // drain odd blocks across all started passes (the cascade step)
        const int started = pass + 1;
        for (;;) {
            int target = -1;
            std::vector<size_t> odd;
            for (int q = 0; q < started && target < 0; ++q) {
                for (size_t b = 0; b < diff[static_cast<size_t>(q)].size(); ++b)
                    if (diff[static_cast<size_t>(q)][b]) {
                        target = q;
                        break;
                    }
            }
            if (target < 0) break;
            for (size_t b = 0; b < diff[static_cast<size_t>(target)].size(); ++b)
                if (diff[static_cast<size_t>(target)][b]) odd.push_back(b);
            binary_batch(target, odd, started);
        }

        // early termination once the keys verify equal
        transport.send({kMsg, json{{"op", "hash"}}});
        const uint64_t ref_hash = transport.expect(kMsg).body.at("hash").get<uint64_t>();
        if (ref_hash == key.content_hash()) {
            res.verified = true;
            ++pass;
            break;
        }
    }

    res.passes_run = pass;
    transport.send({kMsg, json{{"op", "done"}, {"verified", res.verified}, {"passes", pass}}});
    if (!res.verified)
        throw ReconcileError("cascade: keys still differ after " + std::to_string(cfg.passes) +
                             " passes (leaked " + std::to_string(res.leaked_bits) + " bits)");
    return res;
}

}  // namespace qkd
