#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/clock.hpp"
#include "qkd/detection.hpp"

namespace qkd {

struct SyncError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Offset recovery: histogram of pairwise timestamp differences t_a - t_b
// within +/- search_span, peak bin refined by a centroid over +/- 3 bins.
// Throws SyncError when the peak does not stand out (< 5x background mean).
double estimate_offset(std::span<const int64_t> times_a, std::span<const int64_t> times_b,
                       double search_span_ps, double bin_ps);

// Piecewise-linear offset interpolation between per-packet estimates,
// clamped at the ends.
class OffsetTrack {
public:
    void add(double t_ps, double offset_ps);
    double offset_at(double t_ps) const;
    bool empty() const { return points_.empty(); }
    size_t size() const { return points_.size(); }

private:
    std::vector<std::pair<double, double>> points_;  // (time, offset), time ascending
};

// Per-packet offset estimation over two full streams. Packets without a
// significant peak are skipped; throws SyncError if no packet succeeds.
OffsetTrack estimate_offset_track(std::span<const int64_t> times_a,
                                  std::span<const int64_t> times_b, double packet_ps,
                                  double search_span_ps, double bin_ps);

struct CoincidenceRecord {
    TimeTag alice_tag;
    TimeTag bob_tag;
    uint8_t alice_basis = 0;
    uint8_t bob_basis = 0;
    int alice_outcome = 0;
    int bob_outcome = 0;
    int64_t delta_ps = 0;  // t_a - t_b
};

// Matched (alice index, bob index) pairs. Greedy sweep in Alice-tag order:
// each tag used at most once; a Bob tag is accepted iff
// |t_a - t_b - offset| <= window/2; nearest residual wins, exact ties go to
// the earlier Bob tag.
std::vector<std::pair<size_t, size_t>> match_indices(std::span<const int64_t> times_a,
                                                     std::span<const int64_t> times_b,
                                                     double offset_ps, double window_ps);

// Same predicate with a time-dependent offset.
std::vector<std::pair<size_t, size_t>> match_indices(std::span<const int64_t> times_a,
                                                     std::span<const int64_t> times_b,
                                                     const OffsetTrack& track, double window_ps);

// Full records from two tag streams (Alice channels first in `map`).
std::vector<CoincidenceRecord> match_coincidences(const std::vector<TimeTag>& tags_a,
                                                  const std::vector<TimeTag>& tags_b,
                                                  double offset_ps, double window_ps,
                                                  const ChannelMap& map);

// CSV export: t_a, t_b, delta, basis_a, basis_b, out_a, out_b.
std::string coincidences_to_csv(const std::vector<CoincidenceRecord>& records);

}  // namespace qkd
