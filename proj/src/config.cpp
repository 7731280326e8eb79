#include "qkd/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace qkd {

using nlohmann::json;

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: " + path + " must be a JSON object");
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ConfigError("config: unknown key \"" + path + key + "\"");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

void read_optional(const json& j, const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) out.reset();
    else out = j.at(key).get<double>();
}

void parse_emitter(const json& j, EmitterConfig& e) {
    require_object(j, "emitter");
    reject_unknown(j, "emitter.",
                   {"rep_rate_hz", "pair_prob", "g2_x", "g2_xx", "fss_ueV", "exciton_lifetime_ns",
                    "prep_fidelity", "visibility_override", "target_fidelity"});
    read(j, "rep_rate_hz", e.rep_rate_hz);
    read(j, "pair_prob", e.pair_prob);
    read(j, "g2_x", e.g2_x);
    read(j, "g2_xx", e.g2_xx);
    read(j, "fss_ueV", e.fss_ueV);
    read(j, "exciton_lifetime_ns", e.exciton_lifetime_ns);
    read(j, "prep_fidelity", e.prep_fidelity);
    read_optional(j, "visibility_override", e.visibility_override);
    read_optional(j, "target_fidelity", e.target_fidelity);
}

ChannelKind kind_from_name(const std::string& name) {
    if (name == "ideal") return ChannelKind::Ideal;
    if (name == "fiber") return ChannelKind::Fiber;
    if (name == "freespace") return ChannelKind::FreeSpace;
    throw ConfigError("config: unknown channel kind \"" + name + "\"");
}

std::string kind_name(ChannelKind k) {
    switch (k) {
        case ChannelKind::Ideal: return "ideal";
        case ChannelKind::Fiber: return "fiber";
        case ChannelKind::FreeSpace: return "freespace";
    }
    return "ideal";
}

void parse_channel(const json& j, ChannelModel& c) {
    require_object(j, "channel");
    reject_unknown(j, "channel.",
                   {"preset", "kind", "static_transmission", "coupling_mean", "coupling_sigma",
                    "coupling_tau_s", "drift_rate_rad_s", "length_m"});
    if (j.contains("preset")) c = ChannelModel::preset(j.at("preset").get<std::string>());
    if (j.contains("kind")) c.kind = kind_from_name(j.at("kind").get<std::string>());
    read(j, "static_transmission", c.static_transmission);
    read(j, "coupling_mean", c.coupling_mean);
    read(j, "coupling_sigma", c.coupling_sigma);
    read(j, "coupling_tau_s", c.coupling_tau_s);
    read(j, "drift_rate_rad_s", c.drift_rate_rad_s);
    read(j, "length_m", c.length_m);
}

void parse_detector(const json& j, const std::string& path, DetectorConfig& d) {
    require_object(j, path);
    reject_unknown(j, path + ".", {"efficiency", "jitter_sigma_ps", "dead_time_ps", "dark_rate_hz"});
    read(j, "efficiency", d.efficiency);
    read(j, "jitter_sigma_ps", d.jitter_sigma_ps);
    read(j, "dead_time_ps", d.dead_time_ps);
    read(j, "dark_rate_hz", d.dark_rate_hz);
}

void parse_clock(const json& j, const std::string& path, ClockModel& c) {
    require_object(j, path);
    reject_unknown(j, path + ".",
                   {"offset_ps", "drift", "discipline_interval_s", "discipline_jitter_ps",
                    "noise_seed"});
    read(j, "offset_ps", c.offset_ps);
    read(j, "drift", c.drift);
    read(j, "discipline_interval_s", c.discipline_interval_s);
    read(j, "discipline_jitter_ps", c.discipline_jitter_ps);
    read(j, "noise_seed", c.noise_seed);
}

void parse_scheme(const json& j, BasisScheme& s) {
    require_object(j, "scheme");
    reject_unknown(j, "scheme.", {"alice_angles_deg", "alice_probs", "bob_angles_deg", "bob_probs"});
    if (j.contains("alice_angles_deg")) {
        const auto a = j.at("alice_angles_deg").get<std::array<double, 3>>();
        for (size_t i = 0; i < 3; ++i) s.alice_angles_rad[i] = a[i] * kDegToRad;
    }
    read(j, "alice_probs", s.alice_probs);
    if (j.contains("bob_angles_deg")) {
        const auto a = j.at("bob_angles_deg").get<std::array<double, 2>>();
        for (size_t i = 0; i < 2; ++i) s.bob_angles_rad[i] = a[i] * kDegToRad;
    }
    read(j, "bob_probs", s.bob_probs);
}

void parse_sync(const json& j, SyncConfig& s) {
    require_object(j, "sync");
    reject_unknown(j, "sync.", {"window_ps", "bin_ps", "search_span_ps"});
    read(j, "window_ps", s.window_ps);
    read(j, "bin_ps", s.bin_ps);
    read(j, "search_span_ps", s.search_span_ps);
}

void parse_gate(const json& j, GateConfig& g) {
    require_object(j, "gate");
    reject_unknown(j, "gate.", {"qber_max", "s_min", "min_qber_samples", "min_correlator_counts"});
    read(j, "qber_max", g.qber_max);
    read(j, "s_min", g.s_min);
    read(j, "min_qber_samples", g.min_qber_samples);
    read(j, "min_correlator_counts", g.min_correlator_counts);
}

void parse_postproc(const json& j, PostprocConfig& p) {
    require_object(j, "postproc");
    reject_unknown(j, "postproc.", {"enabled", "epsilon", "cascade_passes", "security_margin_bits"});
    read(j, "enabled", p.enabled);
    read(j, "epsilon", p.epsilon);
    read(j, "cascade_passes", p.cascade_passes);
    read(j, "security_margin_bits", p.security_margin_bits);
}

}  // namespace

SessionConfig session_config_from_json(const json& j) {
    require_object(j, "(root)");
    reject_unknown(j, "",
                   {"preset", "emitter", "channel", "detector_alice", "detector_bob", "clock_alice",
                    "clock_bob", "scheme", "sync", "gate", "postproc", "packet_duration_s",
                    "total_duration_s", "qber_sample_fraction", "seed", "session_id",
                    "retain_tags"});
    SessionConfig cfg;
    if (j.contains("preset")) cfg = scenario_preset(j.at("preset").get<std::string>());
    if (j.contains("emitter")) parse_emitter(j.at("emitter"), cfg.emitter);
    if (j.contains("channel")) parse_channel(j.at("channel"), cfg.channel);
    if (j.contains("detector_alice")) parse_detector(j.at("detector_alice"), "detector_alice", cfg.detector_alice);
    if (j.contains("detector_bob")) parse_detector(j.at("detector_bob"), "detector_bob", cfg.detector_bob);
    if (j.contains("clock_alice")) parse_clock(j.at("clock_alice"), "clock_alice", cfg.clock_alice);
    if (j.contains("clock_bob")) parse_clock(j.at("clock_bob"), "clock_bob", cfg.clock_bob);
    if (j.contains("scheme")) parse_scheme(j.at("scheme"), cfg.scheme);
    if (j.contains("sync")) parse_sync(j.at("sync"), cfg.sync);
    if (j.contains("gate")) parse_gate(j.at("gate"), cfg.gate);
    if (j.contains("postproc")) parse_postproc(j.at("postproc"), cfg.postproc);
    read(j, "packet_duration_s", cfg.packet_duration_s);
    read(j, "total_duration_s", cfg.total_duration_s);
    read(j, "qber_sample_fraction", cfg.qber_sample_fraction);
    read(j, "seed", cfg.seed);
    read(j, "session_id", cfg.session_id);
    read(j, "retain_tags", cfg.retain_tags);
    try {
        cfg.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

json session_config_to_json(const SessionConfig& cfg) {
    json j;
    j["emitter"] = {{"rep_rate_hz", cfg.emitter.rep_rate_hz},
                    {"pair_prob", cfg.emitter.pair_prob},
                    {"g2_x", cfg.emitter.g2_x},
                    {"g2_xx", cfg.emitter.g2_xx},
                    {"fss_ueV", cfg.emitter.fss_ueV},
                    {"exciton_lifetime_ns", cfg.emitter.exciton_lifetime_ns},
                    {"prep_fidelity", cfg.emitter.prep_fidelity}};
    if (cfg.emitter.visibility_override)
        j["emitter"]["visibility_override"] = *cfg.emitter.visibility_override;
    if (cfg.emitter.target_fidelity) j["emitter"]["target_fidelity"] = *cfg.emitter.target_fidelity;
    j["channel"] = {{"kind", kind_name(cfg.channel.kind)},
                    {"static_transmission", cfg.channel.static_transmission},
                    {"coupling_mean", cfg.channel.coupling_mean},
                    {"coupling_sigma", cfg.channel.coupling_sigma},
                    {"coupling_tau_s", cfg.channel.coupling_tau_s},
                    {"drift_rate_rad_s", cfg.channel.drift_rate_rad_s},
                    {"length_m", cfg.channel.length_m}};
    auto det = [](const DetectorConfig& d) {
        return json{{"efficiency", d.efficiency},
                    {"jitter_sigma_ps", d.jitter_sigma_ps},
                    {"dead_time_ps", d.dead_time_ps},
                    {"dark_rate_hz", d.dark_rate_hz}};
    };
    j["detector_alice"] = det(cfg.detector_alice);
    j["detector_bob"] = det(cfg.detector_bob);
    auto clk = [](const ClockModel& c) {
        return json{{"offset_ps", c.offset_ps},
                    {"drift", c.drift},
                    {"discipline_interval_s", c.discipline_interval_s},
                    {"discipline_jitter_ps", c.discipline_jitter_ps},
                    {"noise_seed", c.noise_seed}};
    };
    j["clock_alice"] = clk(cfg.clock_alice);
    j["clock_bob"] = clk(cfg.clock_bob);
    auto deg = [](double rad) { return rad / kDegToRad; };
    j["scheme"] = {{"alice_angles_deg",
                    {deg(cfg.scheme.alice_angles_rad[0]), deg(cfg.scheme.alice_angles_rad[1]),
                     deg(cfg.scheme.alice_angles_rad[2])}},
                   {"alice_probs", cfg.scheme.alice_probs},
                   {"bob_angles_deg",
                    {deg(cfg.scheme.bob_angles_rad[0]), deg(cfg.scheme.bob_angles_rad[1])}},
                   {"bob_probs", cfg.scheme.bob_probs}};
    j["sync"] = {{"window_ps", cfg.sync.window_ps},
                 {"bin_ps", cfg.sync.bin_ps},
                 {"search_span_ps", cfg.sync.search_span_ps}};
    j["gate"] = {{"qber_max", cfg.gate.qber_max},
                 {"s_min", cfg.gate.s_min},
                 {"min_qber_samples", cfg.gate.min_qber_samples},
                 {"min_correlator_counts", cfg.gate.min_correlator_counts}};
    j["postproc"] = {{"enabled", cfg.postproc.enabled},
                     {"epsilon", cfg.postproc.epsilon},
                     {"cascade_passes", cfg.postproc.cascade_passes},
                     {"security_margin_bits", cfg.postproc.security_margin_bits}};
    j["packet_duration_s"] = cfg.packet_duration_s;
    j["total_duration_s"] = cfg.total_duration_s;
    j["qber_sample_fraction"] = cfg.qber_sample_fraction;
    j["seed"] = cfg.seed;
    j["session_id"] = cfg.session_id;
    j["retain_tags"] = cfg.retain_tags;
    return j;
}

SessionConfig load_session_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return session_config_from_json(j);
}

SessionConfig scenario_preset(const std::string& name) {
    SessionConfig cfg;
    cfg.session_id = name;
    if (name == "ideal") {
        cfg.channel = ChannelModel::preset("ideal");
        cfg.emitter.pair_prob = 0.002;
        cfg.emitter.g2_x = 0.0;
        cfg.emitter.g2_xx = 0.0;
        cfg.emitter.visibility_override = 1.0;
        for (DetectorConfig* d : {&cfg.detector_alice, &cfg.detector_bob}) {
            d->efficiency = 1.0;
            d->jitter_sigma_ps = 0.0;
            d->dead_time_ps = 0.0;
            d->dark_rate_hz = 0.0;
        }
        cfg.sync.window_ps = 800.0;
        return cfg;
    }
    if (name == "fiber-250m") {
        cfg.channel = ChannelModel::preset("fiber-250m");
        // 620 kcps singles at the first fiber out of 320 MHz excitation
        cfg.emitter.pair_prob = 620e3 / cfg.emitter.rep_rate_hz;
        cfg.emitter.fss_ueV = 0.85;
        cfg.emitter.visibility_override = 0.9326;  // matches the measured QBER
        cfg.detector_alice.efficiency = 0.0696;
        cfg.detector_bob.efficiency = 0.0696;
        cfg.clock_bob.offset_ps = 150000.0;
        cfg.clock_bob.drift = 2e-9;
        cfg.clock_alice.discipline_interval_s = 0.1;
        cfg.clock_bob.discipline_interval_s = 0.1;
        cfg.clock_alice.discipline_jitter_ps = 30.0;
        cfg.clock_bob.discipline_jitter_ps = 30.0;
        cfg.clock_bob.noise_seed = 7;
        cfg.sync.window_ps = 1600.0;
        return cfg;
    }
    if (name == "freespace-270m") {
        cfg.channel = ChannelModel::preset("freespace-270m");
        // 700 kcps singles at the first fiber
        cfg.emitter.pair_prob = 700e3 / cfg.emitter.rep_rate_hz;
        cfg.emitter.fss_ueV = 0.35;
        cfg.emitter.visibility_override = 0.920;  // matches the measured QBER
        cfg.detector_alice.efficiency = 0.0346;
        cfg.detector_bob.efficiency = 0.0346;
        cfg.clock_bob.offset_ps = 150000.0;
        cfg.clock_bob.drift = 2e-9;
        cfg.clock_alice.discipline_interval_s = 0.1;
        cfg.clock_bob.discipline_interval_s = 0.1;
        cfg.clock_alice.discipline_jitter_ps = 30.0;
        cfg.clock_bob.discipline_jitter_ps = 30.0;
        cfg.clock_bob.noise_seed = 7;
        cfg.sync.window_ps = 1600.0;
        return cfg;
    }
    throw ConfigError("config: unknown preset \"" + name +
                      "\" (expected ideal, fiber-250m, or freespace-270m)");
}

CalibrationResult calibrate_singles_rate(double target_cps, const EmitterConfig& emitter) {
    if (target_cps < 0) throw ConfigError("calibrate: negative target rate");
    const double per_pulse = target_cps / emitter.rep_rate_hz;
    // singles per pulse = pair_prob * (1 + g2_x) including background pairs
    const double pair_prob = per_pulse / (1.0 + emitter.g2_x);
    if (pair_prob > 1.0)
        throw ConfigError("calibrate: target " + std::to_string(target_cps) +
                          " cps exceeds the repetition rate bound of " +
                          std::to_string(emitter.rep_rate_hz * (1.0 + emitter.g2_x)) + " cps");
    return {pair_prob, per_pulse};
}

}  // namespace qkd
