#include "qkd/detection.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qkd {

void DetectorConfig::validate() const {
    if (efficiency < 0 || efficiency > 1) throw std::domain_error("DetectorConfig: efficiency outside [0,1]");
    if (jitter_sigma_ps < 0) throw std::domain_error("DetectorConfig: jitter must be >= 0");
    if (dead_time_ps < 0) throw std::domain_error("DetectorConfig: dead time must be >= 0");
    if (dark_rate_hz < 0) throw std::domain_error("DetectorConfig: dark rate must be >= 0");
}

ChannelMap ChannelMap::standard() {
    ChannelMap m;
    for (uint8_t basis = 0; basis < 3; ++basis) {
        m.channels.push_back({Party::Alice, basis, +1});
        m.channels.push_back({Party::Alice, basis, -1});
    }
    for (uint8_t basis = 0; basis < 2; ++basis) {
        m.channels.push_back({Party::Bob, basis, +1});
        m.channels.push_back({Party::Bob, basis, -1});
    }
    return m;
}

const DetectorChannel& ChannelMap::lookup(uint8_t channel) const {
    if (channel >= channels.size()) throw std::out_of_range("ChannelMap: unknown channel id");
    return channels[channel];
}

uint8_t ChannelMap::id_of(Party party, uint8_t basis, int outcome) const {
    for (size_t i = 0; i < channels.size(); ++i) {
        const auto& c = channels[i];
        if (c.party == party && c.basis == basis && c.outcome == outcome)
            return static_cast<uint8_t>(i);
    }
    throw std::out_of_range("ChannelMap: no channel for (party, basis, outcome)");
}

std::optional<int64_t> Detector::detect(int64_t arrival_ps, Rng& rng) {
    if (!rng.bernoulli(cfg_.efficiency)) return std::nullopt;
    int64_t click = arrival_ps;
    if (cfg_.jitter_sigma_ps > 0)
        click += static_cast<int64_t>(std::llround(rng.gaussian(0.0, cfg_.jitter_sigma_ps)));
    if (last_click_ps_ != INT64_MIN &&
        click - last_click_ps_ < static_cast<int64_t>(cfg_.dead_time_ps))
        return std::nullopt;
    last_click_ps_ = click;
    return click;
}

std::vector<int64_t> dark_count_times(const DetectorConfig& cfg, int64_t t_begin_ps,
                                      int64_t t_end_ps, Rng& rng) {
    std::vector<int64_t> out;
    if (cfg.dark_rate_hz <= 0 || t_end_ps <= t_begin_ps) return out;
    const double mean_gap_ps = 1e12 / cfg.dark_rate_hz;
    double t = static_cast<double>(t_begin_ps);
    for (;;) {
        t += rng.exponential(mean_gap_ps);
        if (t >= static_cast<double>(t_end_ps)) break;
        out.push_back(static_cast<int64_t>(std::llround(t)));
    }
    return out;
}

TagParseError::TagParseError(const std::string& msg, uint64_t offset)
    : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
      byte_offset(offset) {}

namespace {
void put_u16le(std::vector<uint8_t>& v, uint16_t x) {
    v.push_back(static_cast<uint8_t>(x & 0xff));
    v.push_back(static_cast<uint8_t>(x >> 8));
}
void put_u64le(std::vector<uint8_t>& v, uint64_t x) {
    for (int i = 0; i < 8; ++i) v.push_back(static_cast<uint8_t>(x >> (8 * i)));
}
uint16_t get_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
uint64_t get_u64le(const uint8_t* p) {
    uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = (x << 8) | p[i];
    return x;
}
}  // namespace

std::vector<uint8_t> write_tags(const std::vector<TimeTag>& tags, uint16_t channel_count) {
    std::vector<uint8_t> out;
    out.reserve(kQtagHeaderSize + kQtagRecordSize * tags.size());
    out.insert(out.end(), {'Q', 'T', 'A', 'G'});
    put_u16le(out, kQtagVersion);
    put_u16le(out, channel_count);
    for (int i = 0; i < 8; ++i) out.push_back(0);
    int64_t prev = INT64_MIN;
    for (size_t i = 0; i < tags.size(); ++i) {
        const auto& t = tags[i];
        if (t.timestamp_ps < prev)
            throw TagParseError("write_tags: timestamp regression at record " + std::to_string(i),
                                kQtagHeaderSize + kQtagRecordSize * i);
        if (t.channel >= channel_count)
            throw TagParseError("write_tags: channel id out of range at record " + std::to_string(i),
                                kQtagHeaderSize + kQtagRecordSize * i + 8);
        prev = t.timestamp_ps;
        put_u64le(out, static_cast<uint64_t>(t.timestamp_ps));
        out.push_back(t.channel);
    }
    return out;
}

std::vector<TimeTag> read_tags(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < kQtagHeaderSize)
        throw TagParseError("truncated header", bytes.size());
    if (std::memcmp(bytes.data(), "QTAG", 4) != 0)
        throw TagParseError("bad magic", 0);
    const uint16_t version = get_u16le(bytes.data() + 4);
    if (version != kQtagVersion)
        throw TagParseError("unsupported version " + std::to_string(version), 4);
    const uint16_t channel_count = get_u16le(bytes.data() + 6);

    const size_t payload = bytes.size() - kQtagHeaderSize;
    if (payload % kQtagRecordSize != 0)
        throw TagParseError("truncated record",
                            kQtagHeaderSize + (payload / kQtagRecordSize) * kQtagRecordSize);

    std::vector<TimeTag> tags;
    tags.reserve(payload / kQtagRecordSize);
    int64_t prev = INT64_MIN;
    for (size_t i = 0; i < payload / kQtagRecordSize; ++i) {
        const size_t off = kQtagHeaderSize + kQtagRecordSize * i;
        const uint64_t ts = get_u64le(bytes.data() + off);
        const uint8_t ch = bytes[off + 8];
        if (ts > static_cast<uint64_t>(INT64_MAX))
            throw TagParseError("timestamp overflow", off);
        const int64_t sts = static_cast<int64_t>(ts);
        if (sts < prev)
            throw TagParseError("non-monotonic timestamp at record " + std::to_string(i), off);
        if (ch >= channel_count)
            throw TagParseError("channel id out of range at record " + std::to_string(i), off + 8);
        prev = sts;
        tags.push_back({sts, ch});
    }
    return tags;
}

void write_tags_file(const std::string& path, const std::vector<TimeTag>& tags,
                     uint16_t channel_count) {
    const auto bytes = write_tags(tags, channel_count);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<TimeTag> read_tags_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return read_tags(bytes);
}

std::string tags_to_csv(const std::vector<TimeTag>& tags) {
    std::ostringstream s;
    s << "timestamp_ps,channel\n";
    for (const auto& t : tags) s << t.timestamp_ps << ',' << int(t.channel) << '\n';
    return s.str();
}

}  // namespace qkd
