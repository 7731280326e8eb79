#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qkd/session.hpp"

namespace qkd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Strict parsing: every module's config sits under a named section and any
// unknown key is rejected with its JSON path.
SessionConfig session_config_from_json(const nlohmann::json& j);
nlohmann::json session_config_to_json(const SessionConfig& cfg);
SessionConfig load_session_config(const std::string& path);

// Full scenario presets: "ideal", "fiber-250m" (calibrated to the published
// 620 kcps singles and 486 bit/s key rate), "freespace-270m" (700 kcps and
// 60 bit/s). Throws ConfigError for unknown names.
SessionConfig scenario_preset(const std::string& name);

struct CalibrationResult {
    double pair_prob = 0.0;           // fitted collected-pair probability
    double efficiency_product = 0.0;  // pair_prob x collection, per pulse
};

// Fits pair_prob so the source-side singles rate matches target_cps.
// Throws ConfigError when the target exceeds the repetition rate.
CalibrationResult calibrate_singles_rate(double target_cps, const EmitterConfig& emitter);

}  // namespace qkd
