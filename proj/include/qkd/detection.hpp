#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/clock.hpp"
#include "qkd/rng.hpp"

namespace qkd {

struct DetectorConfig {
    double efficiency = 0.30;
    double jitter_sigma_ps = 250.0;
    double dead_time_ps = 25000.0;
    double dark_rate_hz = 200.0;  // per detector

    void validate() const;
};

struct TimeTag {
    int64_t timestamp_ps = 0;  // local clock
    uint8_t channel = 0;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

enum class Party : uint8_t { Alice = 0, Bob = 1 };

struct DetectorChannel {
    Party party;
    uint8_t basis;  // index into the party's basis list
    int outcome;    // +1 or -1
};

// Detector channel ids: Alice 0..5 = (A_k,+),(A_k,-),(A_0,+),(A_0,-),(A_1,+),(A_1,-);
// Bob 6..9 = (B_0,+),(B_0,-),(B_1,+),(B_1,-).
struct ChannelMap {
    std::vector<DetectorChannel> channels;

    static ChannelMap standard();
    const DetectorChannel& lookup(uint8_t channel) const;
    uint8_t id_of(Party party, uint8_t basis, int outcome) const;
    size_t size() const { return channels.size(); }
};

// Single avalanche photodiode: efficiency thinning, Gaussian timing jitter,
// and dead-time suppression in arrival order. Stateful; arrivals must be fed
// in non-decreasing time order per detector.
class Detector {
public:
    Detector(uint8_t channel, const DetectorConfig& cfg) : channel_(channel), cfg_(cfg) {
        cfg.validate();
    }

    // Returns the jittered *true-time* click, or nullopt if the photon is
    // lost or falls inside the dead time. Clock localization happens later
    // so clicks can be dead-time-filtered in physical order.
    std::optional<int64_t> detect(int64_t arrival_ps, Rng& rng);

    uint8_t channel() const { return channel_; }

private:
    uint8_t channel_;
    DetectorConfig cfg_;
    int64_t last_click_ps_ = INT64_MIN;
};

// Homogeneous Poisson dark counts over [t_begin, t_end) in true time.
std::vector<int64_t> dark_count_times(const DetectorConfig& cfg, int64_t t_begin_ps,
                                      int64_t t_end_ps, Rng& rng);

// --- QTAG binary stream format -------------------------------------------
//
// 16-byte header: magic "QTAG", u16 version (LE), u16 channel count (LE),
// 8 reserved zero bytes. Records are 9 bytes each: u64 LE picosecond
// timestamp followed by a u8 channel id. Timestamps must be non-decreasing.

struct TagParseError : std::runtime_error {
    TagParseError(const std::string& msg, uint64_t offset);
    uint64_t byte_offset;
};

constexpr uint16_t kQtagVersion = 1;
constexpr size_t kQtagHeaderSize = 16;
constexpr size_t kQtagRecordSize = 9;

std::vector<uint8_t> write_tags(const std::vector<TimeTag>& tags, uint16_t channel_count = 10);
std::vector<TimeTag> read_tags(const std::vector<uint8_t>& bytes);

void write_tags_file(const std::string& path, const std::vector<TimeTag>& tags,
                     uint16_t channel_count = 10);
std::vector<TimeTag> read_tags_file(const std::string& path);

// CSV dump for inspection: "timestamp_ps,channel" rows with a header line.
std::string tags_to_csv(const std::vector<TimeTag>& tags);

}  // namespace qkd
