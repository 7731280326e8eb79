#include <algorithm>
#include <cmath>
#include <thread>

#include "qkd/session.hpp"

namespace qkd {

namespace {

using nlohmann::json;

struct PacketView {
    std::vector<int64_t> times;     // local timestamps, sorted
    std::vector<uint8_t> bases;     // per tag
    std::vector<int> outcomes;      // per tag
};

PacketView make_view(const std::vector<TimeTag>& tags, const ChannelMap& map) {
    PacketView v;
    v.times.reserve(tags.size());
    v.bases.reserve(tags.size());
    v.outcomes.reserve(tags.size());
    for (const auto& t : tags) {
        const auto& c = map.lookup(t.channel);
        v.times.push_back(t.timestamp_ps);
        v.bases.push_back(c.basis);
        v.outcomes.push_back(c.outcome);
    }
    return v;
}

// Cumulative protocol state shared by both roles (built from disclosed data
// only, so both sides agree bit for bit).
struct Tally {
    std::array<CorrelatorCounts, 4> monitor;  // (A0,B0),(A0,B1),(A1,B0),(A1,B1)
    int64_t qber_mismatches = 0;
    int64_t qber_samples = 0;
    int64_t coincidences = 0;

    bool monitor_ready(int64_t min_counts) const {
        for (const auto& c : monitor)
            if (c.total() < min_counts) return false;
        return true;
    }
};

json hello_body(const SessionConfig& cfg) {
    return json{{"version", kProtocolVersion},
                {"session_id", cfg.session_id},
                {"scheme_hash", cfg.scheme.hash()},
                {"seed_check", splitmix64(cfg.seed)}};
}

void check_hello(const json& body, const SessionConfig& cfg) {
    if (body.value("version", -1) != kProtocolVersion)
        throw ProtocolError("protocol version mismatch");
    if (body.value("session_id", std::string{}) != cfg.session_id)
        throw ProtocolError("session id mismatch");
    if (body.value("scheme_hash", uint64_t{0}) != cfg.scheme.hash())
        throw ProtocolError("basis scheme mismatch");
    if (body.value("seed_check", uint64_t{0}) != splitmix64(cfg.seed))
        throw ProtocolError("simulation seed mismatch");
}

}  // namespace

SessionResult run_session(Role role, const SessionConfig& cfg, Transport& transport) {
    cfg.validate();
    const ChannelMap map = ChannelMap::standard();
    PacketSimulator sim(cfg);
    SessionResult result;
    Tally tally;
    OffsetTrack track;

    transport.send({"HELLO", hello_body(cfg)});
    check_hello(transport.expect("HELLO").body, cfg);

    const int64_t packets = cfg.n_packets();
    const double packet_ps = cfg.packet_duration_s * 1e12;

    for (int64_t p = 0; p < packets; ++p) {
        const SimPacket pkt = sim.next_packet();
        const std::vector<TimeTag>& own_tags = role == Role::Alice ? pkt.alice_tags : pkt.bob_tags;
        if (cfg.retain_tags)
            result.tags.insert(result.tags.end(), own_tags.begin(), own_tags.end());
        const PacketView local = make_view(own_tags, map);

        // --- coincidence identification (Alice matches against Bob's digest)
        std::vector<size_t> my_tag_of_cid;  // local tag index per coincidence id
        if (role == Role::Bob) {
            transport.send({"TAGDIGEST", json{{"packet", p}, {"t", local.times}}});
            const auto matched = transport.expect("TAGDIGEST").body;
            if (matched.value("packet", int64_t{-1}) != p) throw ProtocolError("packet index skew");
            for (const auto& ib : matched.at("matched_b"))
                my_tag_of_cid.push_back(ib.get<size_t>());
        } else {
            const auto digest = transport.expect("TAGDIGEST").body;
            if (digest.value("packet", int64_t{-1}) != p) throw ProtocolError("packet index skew");
            const std::vector<int64_t> bob_times = digest.at("t").get<std::vector<int64_t>>();

            if (!local.times.empty() && !bob_times.empty()) {
                try {
                    const double off = estimate_offset(local.times, bob_times,
                                                       cfg.sync.search_span_ps, cfg.sync.bin_ps);
                    track.add(static_cast<double>(p) * packet_ps + 0.5 * packet_ps, off);
                } catch (const SyncError&) {
                    // no peak this packet; interpolate/extrapolate from neighbours
                }
            }
            std::vector<std::pair<size_t, size_t>> pairs;
            if (!track.empty())
                pairs = match_indices(local.times, bob_times, track, cfg.sync.window_ps);
            std::vector<size_t> matched_b;
            for (const auto& [ia, ib] : pairs) {
                my_tag_of_cid.push_back(ia);
                matched_b.push_back(ib);
            }
            transport.send({"TAGDIGEST", json{{"packet", p}, {"matched_b", matched_b}}});
        }
        const size_t n_cid = my_tag_of_cid.size();

        // --- basis disclosure (outcome disclosed only for monitor use)
        std::vector<int> my_labels(n_cid), my_disclosed(n_cid, 0);
        for (size_t c = 0; c < n_cid; ++c) my_labels[c] = local.bases[my_tag_of_cid[c]];

        std::vector<int> alice_labels, bob_labels, alice_out, bob_out;
        if (role == Role::Alice) {
            for (size_t c = 0; c < n_cid; ++c)
                if (my_labels[c] != BasisScheme::kAliceKeyBasis)
                    my_disclosed[c] = local.outcomes[my_tag_of_cid[c]];
            transport.send({"BASES", json{{"packet", p}, {"labels", my_labels},
                                          {"outcomes", my_disclosed}}});
            const auto theirs = transport.expect("BASES").body;
            alice_labels = my_labels;
            alice_out = my_disclosed;
            bob_labels = theirs.at("labels").get<std::vector<int>>();
            bob_out = theirs.at("outcomes").get<std::vector<int>>();
        } else {
            const auto theirs = transport.expect("BASES").body;
            alice_labels = theirs.at("labels").get<std::vector<int>>();
            alice_out = theirs.at("outcomes").get<std::vector<int>>();
            if (alice_labels.size() != n_cid) throw ProtocolError("BASES length mismatch");
            for (size_t c = 0; c < n_cid; ++c)
                if (alice_labels[c] != BasisScheme::kAliceKeyBasis)
                    my_disclosed[c] = local.outcomes[my_tag_of_cid[c]];
            transport.send({"BASES", json{{"packet", p}, {"labels", my_labels},
                                          {"outcomes", my_disclosed}}});
            bob_labels = my_labels;
            bob_out = my_disclosed;
        }
        if (bob_labels.size() != n_cid || alice_out.size() != n_cid || bob_out.size() != n_cid)
            throw ProtocolError("BASES length mismatch");

        // --- tally monitor correlators and collect key coincidences
        std::vector<size_t> key_cids;
        for (size_t c = 0; c < n_cid; ++c) {
            if (alice_labels[c] == BasisScheme::kAliceKeyBasis) {
                if (bob_labels[c] == BasisScheme::kBobKeyBasis) key_cids.push_back(c);
                continue;  // (A_k, B_1) coincidences are discarded
            }
            const size_t corr = static_cast<size_t>(alice_labels[c] - 1) * 2 +
                                static_cast<size_t>(bob_labels[c]);
            tally.monitor[corr].add(alice_out[c], bob_out[c]);
        }
        tally.coincidences += static_cast<int64_t>(n_cid);

        // --- sacrificial QBER sample over the key coincidences
        const size_t sample_n = static_cast<size_t>(
            std::floor(cfg.qber_sample_fraction * static_cast<double>(key_cids.size())));
        std::vector<size_t> shuffled = key_cids;
        stable_shuffle(shuffled, derive_seed(cfg.seed, "qber-sample", static_cast<uint64_t>(p)));
        std::vector<size_t> sample_ids(shuffled.begin(), shuffled.begin() + sample_n);
        std::sort(sample_ids.begin(), sample_ids.end());

        auto outcomes_for = [&](const std::vector<size_t>& ids) {
            std::vector<int> out;
            out.reserve(ids.size());
            for (size_t c : ids) out.push_back(local.outcomes[my_tag_of_cid[c]]);
            return out;
        };
        std::vector<int> sample_a, sample_b;
        if (role == Role::Alice) {
            sample_a = outcomes_for(sample_ids);
            transport.send({"QBERSAMPLE", json{{"packet", p}, {"ids", sample_ids},
                                               {"outcomes", sample_a}}});
            const auto reply = transport.expect("QBERSAMPLE").body;
            sample_b = reply.at("outcomes").get<std::vector<int>>();
        } else {
            const auto req = transport.expect("QBERSAMPLE").body;
            const auto ids = req.at("ids").get<std::vector<size_t>>();
            if (ids != sample_ids) throw ProtocolError("QBERSAMPLE id set mismatch");
            sample_a = req.at("outcomes").get<std::vector<int>>();
            sample_b = outcomes_for(sample_ids);
            transport.send({"QBERSAMPLE", json{{"packet", p}, {"ids", sample_ids},
                                               {"outcomes", sample_b}}});
        }
        if (sample_a.size() != sample_ids.size() || sample_b.size() != sample_ids.size())
            throw ProtocolError("QBERSAMPLE length mismatch");
        for (size_t i = 0; i < sample_ids.size(); ++i)
            if (sample_a[i] != sample_b[i]) ++tally.qber_mismatches;
        tally.qber_samples += static_cast<int64_t>(sample_ids.size());

        // --- metrics, gate, key update
        SessionMetrics m;
        m.packet_index = p;
        m.raw_coincidences = static_cast<int64_t>(n_cid);
        m.monitor_counts = tally.monitor;
        m.qber = tally.qber_samples > 0
                     ? static_cast<double>(tally.qber_mismatches) /
                           static_cast<double>(tally.qber_samples)
                     : 0.0;
        bool have_s = true;
        try {
            const Estimate s = estimate_chsh(tally.monitor[0], tally.monitor[1],
                                             tally.monitor[2], tally.monitor[3]);
            m.s_value = s.value;
            m.s_sigma = s.sigma;
        } catch (const InsufficientStats&) {
            have_s = false;
            m.s_value = std::nan("");
            m.s_sigma = std::nan("");
        }

        AbortReason gate = AbortReason::None;
        if (have_s && tally.qber_samples >= cfg.gate.min_qber_samples &&
            tally.monitor_ready(cfg.gate.min_correlator_counts))
            gate = security_gate(m.qber, m.s_value, cfg.gate.qber_max, cfg.gate.s_min);
        m.aborted = gate != AbortReason::None;

        if (role == Role::Alice) {
            transport.send({"METRICS", json{{"packet", p},
                                            {"qber", m.qber},
                                            {"s", have_s ? m.s_value : 0.0},
                                            {"s_err", have_s ? m.s_sigma : 0.0},
                                            {"raw", m.raw_coincidences}}});
        } else {
            const auto peer = transport.expect("METRICS").body;
            // both sides derive metrics from the same disclosed data
            if (std::abs(peer.value("qber", -1.0) - m.qber) > 1e-9)
                throw ProtocolError("metrics disagreement (qber)");
            if (have_s && std::abs(peer.value("s", 0.0) - m.s_value) > 1e-9)
                throw ProtocolError("metrics disagreement (S)");
        }

        if (gate != AbortReason::None) {
            if (role == Role::Alice)
                transport.send({"ABORT", json{{"reason", abort_reason_name(gate)}}});
            else
                transport.recv();  // ABORT (both sides computed the same gate)
            result.metrics.push_back(m);
            result.aborted = true;
            result.abort_reason = gate;
            result.duration_s = static_cast<double>(p + 1) * cfg.packet_duration_s;
            result.total_coincidences = tally.coincidences;
            result.qber_sample_mismatches = tally.qber_mismatches;
            result.qber_sample_size = tally.qber_samples;
            return result;  // no key bits from the aborting packet onwards
        }

        // retained key bits: key coincidences minus the sacrificial sample
        size_t si = 0;
        for (size_t c : key_cids) {
            while (si < sample_ids.size() && sample_ids[si] < c) ++si;
            if (si < sample_ids.size() && sample_ids[si] == c) continue;
            result.sifted_key.push_back(local.outcomes[my_tag_of_cid[c]] > 0);
            result.key_packet_origin.push_back(p);
            ++m.sifted_bits;
        }
        result.metrics.push_back(m);
    }

    if (role == Role::Alice)
        transport.send({"BYE", json::object()});
    else
        transport.expect("BYE");

    result.total_coincidences = tally.coincidences;
    result.qber_sample_mismatches = tally.qber_mismatches;
    result.qber_sample_size = tally.qber_samples;
    result.duration_s = static_cast<double>(packets) * cfg.packet_duration_s;
    return result;
}

std::pair<SessionResult, SessionResult> run_loopback_session(const SessionConfig& cfg) {
    auto [ta, tb] = LoopbackTransport::make_pair();
    SessionResult ra, rb;
    std::exception_ptr bob_error;
    std::thread bob([&] {
        try {
            rb = run_session(Role::Bob, cfg, *tb);
        } catch (...) {
            bob_error = std::current_exception();
            tb->close();
        }
    });
    std::exception_ptr alice_error;
    try {
        ra = run_session(Role::Alice, cfg, *ta);
    } catch (...) {
        alice_error = std::current_exception();
        ta->close();
    }
    bob.join();
    if (alice_error) std::rethrow_exception(alice_error);
    if (bob_error) std::rethrow_exception(bob_error);
    return {std::move(ra), std::move(rb)};
}

}  // namespace qkd
