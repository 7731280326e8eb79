#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qkd/bits.hpp"
#include "qkd/channel.hpp"
#include "qkd/clock.hpp"
#include "qkd/detection.hpp"
#include "qkd/emitter.hpp"
#include "qkd/qstate.hpp"
#include "qkd/sync.hpp"
#include "qkd/transport.hpp"

namespace qkd {

struct InsufficientStats : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Alice measures in {A_k, A_0, A_1} with probabilities {1/2, 1/4, 1/4};
// Bob in {B_0, B_1} with {1/2, 1/2}. (A_k, B_0) is the key pair and occurs
// for a quarter of the coincidences; {A_0, A_1} x {B_0, B_1} monitor the
// Bell inequality.
struct BasisScheme {
    std::array<double, 3> alice_angles_rad;  // A_k, A_0, A_1
    std::array<double, 3> alice_probs;
    std::array<double, 2> bob_angles_rad;  // B_0, B_1
    std::array<double, 2> bob_probs;

    static BasisScheme standard();  // A_k=0, A_0=+22.5deg, A_1=-22.5deg; B_0=0, B_1=45deg
    void validate() const;
    uint64_t hash() const;

    static constexpr uint8_t kAliceKeyBasis = 0;  // A_k
    static constexpr uint8_t kBobKeyBasis = 0;    // B_0
};

// i.i.d. passive basis draw for one detected photon.
uint8_t assign_basis(Party party, const BasisScheme& scheme, Rng& rng);

struct CorrelatorCounts {
    int64_t n_pp = 0;  // (+,+)
    int64_t n_mm = 0;  // (-,-)
    int64_t n_pm = 0;  // (+,-)
    int64_t n_mp = 0;  // (-,+)

    int64_t total() const { return n_pp + n_mm + n_pm + n_mp; }
    void add(int sa, int sb);
};

struct Estimate {
    double value = 0.0;
    double sigma = 0.0;  // Gaussian propagation assuming Poissonian counts
};

// E = (N_pp + N_mm - N_pm - N_mp) / total. Throws InsufficientStats on
// empty counts.
Estimate correlation_from_counts(const CorrelatorCounts& c);

// QBER = (1 - E) / 2 from key-basis counts.
Estimate estimate_qber(const CorrelatorCounts& key_counts);

// S = E(A0,B0) + E(A0,B1) + E(A1,B0) - E(A1,B1).
Estimate estimate_chsh(const CorrelatorCounts& e00, const CorrelatorCounts& e01,
                       const CorrelatorCounts& e10, const CorrelatorCounts& e11);

enum class AbortReason { None, Bell, QBER };

// Bell violation is checked first: abort(Bell) iff S <= s_min, else
// abort(QBER) iff qber >= qber_max.
AbortReason security_gate(double qber, double s_value, double qber_max = 0.11,
                          double s_min = 2.0);

struct SessionMetrics {
    int64_t packet_index = 0;
    double qber = 0.0;   // cumulative sampled estimate
    double s_value = 0.0;
    double s_sigma = 0.0;
    int64_t raw_coincidences = 0;  // this packet
    int64_t sifted_bits = 0;       // this packet, after the sacrificial sample
    bool aborted = false;
    std::array<CorrelatorCounts, 4> monitor_counts;  // cumulative (A0,B0),(A0,B1),(A1,B0),(A1,B1)
};

struct GateConfig {
    double qber_max = 0.11;
    double s_min = 2.0;
    // thresholds are evaluated on cumulative statistics once these minima are met
    int64_t min_qber_samples = 100;
    int64_t min_correlator_counts = 100;
};

struct SyncConfig {
    double window_ps = 800.0;      // total coincidence window (+/- window/2)
    double bin_ps = 50.0;
    double search_span_ps = 5e6;
};

struct PostprocConfig {
    bool enabled = true;
    double epsilon = 1e-6;
    int cascade_passes = 4;
    double security_margin_bits = 64;
};

struct SessionConfig {
    EmitterConfig emitter;
    ChannelModel channel;
    DetectorConfig detector_alice;
    DetectorConfig detector_bob;
    ClockModel clock_alice;
    ClockModel clock_bob;
    BasisScheme scheme = BasisScheme::standard();
    SyncConfig sync;
    GateConfig gate;
    PostprocConfig postproc;
    double packet_duration_s = 1.2;
    double total_duration_s = 12.0;
    double qber_sample_fraction = 0.1;
    uint64_t seed = 1;
    std::string session_id = "session";
    bool retain_tags = true;  // keep the full tag stream in SessionResult

    int64_t n_packets() const;
    void validate() const;
};

// Joint physical truth for one acquisition packet, generated identically by
// both endpoints from the shared seed; each role keeps only its own view.
struct SimPacket {
    std::vector<TimeTag> alice_tags;
    std::vector<TimeTag> bob_tags;
};

class PacketSimulator {
public:
    explicit PacketSimulator(const SessionConfig& cfg);

    // Packets must be generated in order (the channel carries AR(1) memory).
    SimPacket next_packet();
    int64_t packet_index() const { return packet_index_; }

private:
    SessionConfig cfg_;
    PairState pair_state_;
    PulseTrainEmitter emitter_;
    ChannelState channel_;
    Rng physics_rng_;
    Rng thin_rng_;
    Rng alice_det_rng_;
    Rng bob_det_rng_;
    Rng dark_rng_;
    ChannelMap map_;
    std::vector<int64_t> last_click_ps_;  // per detector channel, dead-time memory
    int64_t packet_index_ = 0;
    int64_t pulses_per_packet_ = 0;
    int64_t prop_delay_ps_ = 0;
    // Source-side thinning: pairs where neither photon can reach a detector
    // are never generated. The classification thresholds split the kept
    // pairs by which side remains a detection candidate.
    double thin_a_only_ = 0.0;
    double thin_b_only_ = 0.0;
};

enum class Role { Alice, Bob };

struct SessionResult {
    Bits sifted_key;
    std::vector<TimeTag> tags;               // this role's full tag stream
    std::vector<int64_t> key_packet_origin;  // packet index per key bit
    std::vector<SessionMetrics> metrics;
    bool aborted = false;
    AbortReason abort_reason = AbortReason::None;
    int64_t total_coincidences = 0;
    int64_t qber_sample_mismatches = 0;
    int64_t qber_sample_size = 0;
    double duration_s = 0.0;
};

constexpr int kProtocolVersion = 1;

// Runs the asymmetric Ekert session over `transport`. Both endpoints must
// hold identical configuration (enforced via the HELLO handshake).
SessionResult run_session(Role role, const SessionConfig& cfg, Transport& transport);

// Convenience loopback: both roles in-process on an in-memory transport.
std::pair<SessionResult, SessionResult> run_loopback_session(const SessionConfig& cfg);

std::string abort_reason_name(AbortReason r);

// Metrics CSV with columns t, qber, S, S_err, raw_rate, key_rate.
std::string metrics_to_csv(const std::vector<SessionMetrics>& metrics, double packet_duration_s);

}  // namespace qkd
