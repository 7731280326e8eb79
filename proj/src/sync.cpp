#include "qkd/sync.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qkd {

double estimate_offset(std::span<const int64_t> times_a, std::span<const int64_t> times_b,
                       double search_span_ps, double bin_ps) {
    if (times_a.empty() || times_b.empty()) throw SyncError("estimate_offset: empty stream");
    if (bin_ps <= 0 || search_span_ps <= bin_ps) throw SyncError("estimate_offset: bad bin/span");

    const int64_t span = static_cast<int64_t>(search_span_ps);
    const size_t n_bins = static_cast<size_t>(2 * search_span_ps / bin_ps) + 1;
    std::vector<uint64_t> hist(n_bins, 0);

    // two-pointer sweep over all pairs with |t_a - t_b| <= span
    size_t lo = 0;
    for (int64_t ta : times_a) {
        while (lo < times_b.size() && times_b[lo] < ta - span) ++lo;
        for (size_t j = lo; j < times_b.size() && times_b[j] <= ta + span; ++j) {
            const double d = static_cast<double>(ta - times_b[j]);
            const auto bin = static_cast<size_t>((d + search_span_ps) / bin_ps);
            if (bin < n_bins) ++hist[bin];
        }
    }

    size_t peak = 0;
    for (size_t i = 1; i < n_bins; ++i)
        if (hist[i] > hist[peak]) peak = i;

    // background excludes the peak +/- 3 bins
    double bg_sum = 0;
    size_t bg_n = 0;
    for (size_t i = 0; i < n_bins; ++i) {
        if (i + 3 >= peak && i <= peak + 3) continue;
        bg_sum += static_cast<double>(hist[i]);
        ++bg_n;
    }
    const double bg_mean = bg_n ? bg_sum / static_cast<double>(bg_n) : 0.0;
    if (static_cast<double>(hist[peak]) < 5.0 * std::max(bg_mean, 1e-12) || hist[peak] == 0)
        throw SyncError("estimate_offset: no significant correlation peak");

    // centroid over peak +/- 3 bins, background-subtracted
    double num = 0, den = 0;
    for (size_t i = (peak >= 3 ? peak - 3 : 0); i <= std::min(peak + 3, n_bins - 1); ++i) {
        const double w = std::max(static_cast<double>(hist[i]) - bg_mean, 0.0);
        const double center = (static_cast<double>(i) + 0.5) * bin_ps - search_span_ps;
        num += w * center;
        den += w;
    }
    if (den <= 0) throw SyncError("estimate_offset: degenerate peak");
    return num / den;
}

void OffsetTrack::add(double t_ps, double offset_ps) {
    if (!points_.empty() && t_ps <= points_.back().first)
        throw SyncError("OffsetTrack: points must be time-ordered");
    points_.emplace_back(t_ps, offset_ps);
}

double OffsetTrack::offset_at(double t_ps) const {
    if (points_.empty()) throw SyncError("OffsetTrack: empty");
    if (t_ps <= points_.front().first) return points_.front().second;
    if (t_ps >= points_.back().first) return points_.back().second;
    auto it = std::upper_bound(points_.begin(), points_.end(), t_ps,
                               [](double t, const auto& p) { return t < p.first; });
    const auto& [t1, o1] = *it;
    const auto& [t0, o0] = *(it - 1);
    const double w = (t_ps - t0) / (t1 - t0);
    return o0 + w * (o1 - o0);
}

OffsetTrack estimate_offset_track(std::span<const int64_t> times_a,
                                  std::span<const int64_t> times_b, double packet_ps,
                                  double search_span_ps, double bin_ps) {
    if (times_a.empty() || times_b.empty()) throw SyncError("estimate_offset_track: empty stream");
    const int64_t t0 = std::min(times_a.front(), times_b.front());
    const int64_t t1 = std::max(times_a.back(), times_b.back());
    OffsetTrack track;
    auto slice = [](std::span<const int64_t> v, int64_t lo, int64_t hi) {
        auto b = std::lower_bound(v.begin(), v.end(), lo);
        auto e = std::lower_bound(v.begin(), v.end(), hi);
        return v.subspan(static_cast<size_t>(b - v.begin()), static_cast<size_t>(e - b));
    };
    for (int64_t begin = t0; begin < t1; begin += static_cast<int64_t>(packet_ps)) {
        const int64_t end = begin + static_cast<int64_t>(packet_ps);
        // widen Bob's slice so cross-boundary pairs are not lost
        const auto a = slice(times_a, begin, end);
        const auto b = slice(times_b, begin - static_cast<int64_t>(search_span_ps),
                             end + static_cast<int64_t>(search_span_ps));
        if (a.empty() || b.empty()) continue;
        try {
            const double off = estimate_offset(a, b, search_span_ps, bin_ps);
            track.add(static_cast<double>(begin) + 0.5 * packet_ps, off);
        } catch (const SyncError&) {
            continue;  // quiet packet, interpolate across it
        }
    }
    if (track.empty()) throw SyncError("estimate_offset_track: no packet produced a peak");
    return track;
}

namespace {

template <typename OffsetFn>
std::vector<std::pair<size_t, size_t>> match_impl(std::span<const int64_t> times_a,
                                                  std::span<const int64_t> times_b,
                                                  OffsetFn offset_at, double window_ps) {
    if (window_ps <= 0) throw SyncError("match: window must be > 0");
    std::vector<std::pair<size_t, size_t>> out;
    std::vector<char> used(times_b.size(), 0);
    const double half = window_ps / 2.0;
    size_t lo = 0;
    for (size_t i = 0; i < times_a.size(); ++i) {
        const double offset = offset_at(times_a[i]);
        const double target = static_cast<double>(times_a[i]) - offset;  // ideal t_b
        while (lo < times_b.size() && static_cast<double>(times_b[lo]) < target - half) ++lo;
        size_t best = SIZE_MAX;
        double best_res = 0;
        for (size_t j = lo; j < times_b.size() && static_cast<double>(times_b[j]) <= target + half; ++j) {
            if (used[j]) continue;
            const double res = std::abs(static_cast<double>(times_b[j]) - target);
            if (best == SIZE_MAX || res < best_res) {  // exact tie keeps the earlier Bob tag
                best = j;
                best_res = res;
            }
        }
        if (best != SIZE_MAX) {
            used[best] = 1;
            out.emplace_back(i, best);
        }
    }
    return out;
}

}  // namespace

std::vector<std::pair<size_t, size_t>> match_indices(std::span<const int64_t> times_a,
                                                     std::span<const int64_t> times_b,
                                                     double offset_ps, double window_ps) {
    return match_impl(times_a, times_b, [offset_ps](int64_t) { return offset_ps; }, window_ps);
}

std::vector<std::pair<size_t, size_t>> match_indices(std::span<const int64_t> times_a,
                                                     std::span<const int64_t> times_b,
                                                     const OffsetTrack& track, double window_ps) {
    return match_impl(
        times_a, times_b,
        [&track](int64_t t) { return track.offset_at(static_cast<double>(t)); }, window_ps);
}

std::vector<CoincidenceRecord> match_coincidences(const std::vector<TimeTag>& tags_a,
                                                  const std::vector<TimeTag>& tags_b,
                                                  double offset_ps, double window_ps,
                                                  const ChannelMap& map) {
    std::vector<int64_t> ta(tags_a.size()), tb(tags_b.size());
    for (size_t i = 0; i < tags_a.size(); ++i) ta[i] = tags_a[i].timestamp_ps;
    for (size_t i = 0; i < tags_b.size(); ++i) tb[i] = tags_b[i].timestamp_ps;
    const auto pairs = match_indices(ta, tb, offset_ps, window_ps);
    std::vector<CoincidenceRecord> out;
    out.reserve(pairs.size());
    for (const auto& [ia, ib] : pairs) {
        const auto& a = tags_a[ia];
        const auto& b = tags_b[ib];
        const auto& ca = map.lookup(a.channel);
        const auto& cb = map.lookup(b.channel);
        out.push_back({a, b, ca.basis, cb.basis, ca.outcome, cb.outcome,
                       a.timestamp_ps - b.timestamp_ps});
    }
    return out;
}

std::string coincidences_to_csv(const std::vector<CoincidenceRecord>& records) {
    std::ostringstream s;
    s << "t_a,t_b,delta,basis_a,basis_b,out_a,out_b\n";
    for (const auto& r : records) {
        s << r.alice_tag.timestamp_ps << ',' << r.bob_tag.timestamp_ps << ',' << r.delta_ps << ','
          << int(r.alice_basis) << ',' << int(r.bob_basis) << ',' << r.alice_outcome << ','
          << r.bob_outcome << '\n';
    }
    return s.str();
}

}  // namespace qkd
