#include "qkd/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace qkd {

G2Estimate estimate_g2(const std::vector<int64_t>& times_ps, double period_ps,
                       double half_window_ps, int n_side_peaks) {
    if (period_ps <= 0 || half_window_ps <= 0 || n_side_peaks < 1)
        throw std::domain_error("estimate_g2: bad parameters");
    if (2 * half_window_ps >= period_ps)
        throw std::domain_error("estimate_g2: window wider than the pulse period");

    const int64_t max_lag = static_cast<int64_t>(
        std::llround(n_side_peaks * period_ps + half_window_ps));
    G2Estimate est;
    int64_t side_total = 0;

    for (size_t i = 0; i < times_ps.size(); ++i) {
        for (size_t j = i + 1; j < times_ps.size(); ++j) {
            const int64_t tau = times_ps[j] - times_ps[i];
            if (tau > max_lag) break;
            // nearest pulse-period multiple
            const int64_t k = static_cast<int64_t>(
                std::llround(static_cast<double>(tau) / period_ps));
            const double residual = static_cast<double>(tau) - static_cast<double>(k) * period_ps;
            if (std::abs(residual) > half_window_ps) continue;
            if (k == 0) ++est.center_counts;
            else if (k <= n_side_peaks) ++side_total;
        }
    }

    if (side_total == 0) throw std::domain_error("estimate_g2: no side-peak counts to normalize by");
    // every unordered pair lands in exactly one window, so the center and
    // side peaks are directly comparable
    est.mean_side_counts = static_cast<double>(side_total) / n_side_peaks;
    est.value = static_cast<double>(est.center_counts) / est.mean_side_counts;
    const double rel = std::sqrt(1.0 / std::max<double>(est.center_counts, 1.0) +
                                 1.0 / static_cast<double>(side_total));
    est.sigma = est.value > 0 ? est.value * rel : rel / est.mean_side_counts;
    return est;
}

AnalyzeReport analyze_tags(const std::vector<TimeTag>& alice_tags,
                           const std::vector<TimeTag>& bob_tags, const ChannelMap& map,
                           double period_ps, const SyncConfig& sync) {
    AnalyzeReport rep;

    std::vector<int64_t> ta(alice_tags.size()), tb(bob_tags.size());
    for (size_t i = 0; i < alice_tags.size(); ++i) ta[i] = alice_tags[i].timestamp_ps;
    for (size_t i = 0; i < bob_tags.size(); ++i) tb[i] = bob_tags[i].timestamp_ps;

    if (!ta.empty()) {
        try {
            rep.g2 = estimate_g2(ta, period_ps);
        } catch (const std::domain_error&) {
            // sparse streams leave the g2 fields zeroed
        }
    }

    if (ta.empty() || tb.empty()) return rep;
    double offset;
    try {
        offset = estimate_offset(ta, tb, sync.search_span_ps, sync.bin_ps);
    } catch (const SyncError&) {
        return rep;
    }
    rep.offset_found = true;
    rep.offset_ps = static_cast<int64_t>(std::llround(offset));

    const auto records = match_coincidences(alice_tags, bob_tags, offset, sync.window_ps, map);
    rep.coincidences = static_cast<int64_t>(records.size());

    // residual histogram around the recovered offset
    rep.hist_bin_ps = sync.bin_ps;
    const int64_t half = static_cast<int64_t>(std::llround(sync.window_ps / 2.0));
    rep.hist_min_ps = -half;
    const size_t n_bins = static_cast<size_t>(
        std::ceil(2.0 * static_cast<double>(half) / sync.bin_ps));
    rep.histogram.assign(std::max<size_t>(n_bins, 1), 0);
    CorrelatorCounts key_counts;
    std::array<CorrelatorCounts, 4> monitor;
    for (const auto& r : records) {
        const double res = static_cast<double>(r.delta_ps) - offset;
        const auto bin = static_cast<int64_t>(std::floor((res + static_cast<double>(half)) /
                                                         sync.bin_ps));
        if (bin >= 0 && static_cast<size_t>(bin) < rep.histogram.size())
            ++rep.histogram[static_cast<size_t>(bin)];
        if (r.alice_basis == BasisScheme::kAliceKeyBasis && r.bob_basis == BasisScheme::kBobKeyBasis)
            key_counts.add(r.alice_outcome, r.bob_outcome);
        else if (r.alice_basis > 0)
            monitor[static_cast<size_t>(r.alice_basis - 1) * 2 + r.bob_basis].add(r.alice_outcome,
                                                                                  r.bob_outcome);
    }
    try {
        rep.qber = estimate_qber(key_counts);
        rep.have_qber = true;
    } catch (const InsufficientStats&) {
    }
    try {
        rep.s = estimate_chsh(monitor[0], monitor[1], monitor[2], monitor[3]);
        rep.have_s = true;
    } catch (const InsufficientStats&) {
    }
    return rep;
}

nlohmann::json report_to_json(const AnalyzeReport& rep) {
    nlohmann::json j;
    j["g2"] = {{"value", rep.g2.value},
               {"sigma", rep.g2.sigma},
               {"center_counts", rep.g2.center_counts},
               {"mean_side_counts", rep.g2.mean_side_counts}};
    j["offset_found"] = rep.offset_found;
    if (rep.offset_found) j["offset_ps"] = rep.offset_ps;
    j["coincidences"] = rep.coincidences;
    j["histogram"] = {{"bin_ps", rep.hist_bin_ps},
                      {"min_ps", rep.hist_min_ps},
                      {"counts", rep.histogram}};
    if (rep.have_qber) j["qber"] = {{"value", rep.qber.value}, {"sigma", rep.qber.sigma}};
    if (rep.have_s) j["S"] = {{"value", rep.s.value}, {"sigma", rep.s.sigma}};
    return j;
}

}  // namespace qkd
