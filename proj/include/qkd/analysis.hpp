#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "qkd/detection.hpp"
#include "qkd/session.hpp"
#include "qkd/sync.hpp"

namespace qkd {

struct G2Estimate {
    double value = 0.0;
    double sigma = 0.0;
    int64_t center_counts = 0;
    double mean_side_counts = 0.0;
};

// Second-order autocorrelation at zero delay from a single merged click
// stream: counts with |tau| < half_window normalized by the mean counts in
// equal windows centered on the first n_side_peaks multiples of the pulse
// period on each side. Timestamps must be sorted.
G2Estimate estimate_g2(const std::vector<int64_t>& times_ps, double period_ps,
                       double half_window_ps = 800.0, int n_side_peaks = 5);

struct AnalyzeReport {
    G2Estimate g2;                   // autocorrelation of the Alice-side stream
    int64_t offset_ps = 0;           // recovered clock offset
    bool offset_found = false;
    std::vector<int64_t> histogram;  // coincidence residuals around the offset
    double hist_bin_ps = 0.0;
    int64_t hist_min_ps = 0;
    int64_t coincidences = 0;
    bool have_qber = false;
    Estimate qber;
    bool have_s = false;
    Estimate s;
};

// Offline report over two tag streams: g2, offset recovery, residual
// histogram, and QBER / CHSH from the channel map's basis and outcome labels.
AnalyzeReport analyze_tags(const std::vector<TimeTag>& alice_tags,
                           const std::vector<TimeTag>& bob_tags, const ChannelMap& map,
                           double period_ps, const SyncConfig& sync);

nlohmann::json report_to_json(const AnalyzeReport& report);

}  // namespace qkd
