#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qkd/analysis.hpp"
#include "qkd/config.hpp"
#include "qkd/keyfile.hpp"
#include "qkd/postproc.hpp"
#include "qkd/session.hpp"
#include "qkd/transport.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitSecurityAbort = 4;

struct Options {
    std::string mode;
    std::string config_path;
    std::string preset;
    std::optional<uint64_t> seed;
    std::optional<double> duration_s;
    double accel = 1.0;
    std::string out_dir = ".";
    std::string listen;
    std::string connect;
    std::string tags_a;
    std::string tags_b;
    double target_cps = -1.0;
    std::string key_path;
    std::string key_out_path;
    std::string in_path;
    std::string out_path;
    bool decrypt = false;
};

struct EndpointResult {
    qkd::SessionResult session;
    std::optional<qkd::PostprocResult> postproc;
};

std::pair<std::string, uint16_t> split_host_port(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw qkd::ConfigError("address must be host:port, got \"" + addr + "\"");
    const int port = std::stoi(addr.substr(colon + 1));
    if (port < 1 || port > 65535) throw qkd::ConfigError("port out of range in \"" + addr + "\"");
    return {addr.substr(0, colon), static_cast<uint16_t>(port)};
}

qkd::SessionConfig build_config(const Options& opt) {
    qkd::SessionConfig cfg;
    if (!opt.preset.empty()) cfg = qkd::scenario_preset(opt.preset);
    if (!opt.config_path.empty()) {
        std::ifstream f(opt.config_path);
        if (!f) throw qkd::ConfigError("cannot open config " + opt.config_path);
        json j;
        try {
            f >> j;
        } catch (const json::exception& e) {
            throw qkd::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!opt.preset.empty() && !j.contains("preset")) j["preset"] = opt.preset;
        cfg = qkd::session_config_from_json(j);
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.duration_s) cfg.total_duration_s = *opt.duration_s;
    if (opt.accel != 1.0) {
        if (opt.accel < 1.0) throw qkd::ConfigError("--accel must be >= 1");
        // acceleration shortens the simulated packets while keeping their
        // count, so rates stay calibrated and runs finish quickly
        cfg.packet_duration_s /= opt.accel;
        cfg.total_duration_s /= opt.accel;
    }
    cfg.validate();
    return cfg;
}

EndpointResult run_endpoint(qkd::Role role, const qkd::SessionConfig& cfg,
                            qkd::Transport& transport) {
    EndpointResult res;
    res.session = qkd::run_session(role, cfg, transport);
    const auto& s = res.session;
    if (cfg.postproc.enabled && !s.aborted && s.sifted_key.size() > 0) {
        const double qber = s.qber_sample_size > 0
                                ? static_cast<double>(s.qber_sample_mismatches) /
                                      static_cast<double>(s.qber_sample_size)
                                : 0.0;
        res.postproc =
            qkd::run_postproc(role, s.sifted_key, qber, cfg.postproc, cfg.seed, transport);
    }
    return res;
}

void write_artifacts(const Options& opt, const qkd::SessionConfig& cfg, const std::string& role,
                     const EndpointResult& res) {
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);
    const std::string stem = (fs::path(opt.out_dir) / (cfg.session_id + "." + role)).string();

    qkd::write_tags_file(stem + ".tags.qtag", res.session.tags);

    std::ofstream metrics(stem + ".metrics.csv");
    metrics << qkd::metrics_to_csv(res.session.metrics, cfg.packet_duration_s);

    qkd::KeyMaterial key;
    if (res.postproc) {
        key = res.postproc->key;
    } else {
        key.stage = qkd::KeyStage::Sifted;
        key.bits = res.session.sifted_key;
    }
    qkd::write_key_file(stem + ".key.qkey", key);

    json summary;
    summary["session_id"] = cfg.session_id;
    summary["role"] = role;
    summary["aborted"] = res.session.aborted;
    summary["abort_reason"] = qkd::abort_reason_name(res.session.abort_reason);
    summary["duration_s"] = res.session.duration_s;
    summary["coincidences"] = res.session.total_coincidences;
    summary["sifted_bits"] = res.session.sifted_key.size();
    summary["qber_sample"] = {{"mismatches", res.session.qber_sample_mismatches},
                              {"size", res.session.qber_sample_size}};
    if (res.postproc) {
        summary["postproc"] = {{"stage", qkd::key_stage_name(res.postproc->key.stage)},
                               {"leaked_bits", res.postproc->leaked_bits},
                               {"corrections", res.postproc->corrections},
                               {"min_entropy", res.postproc->min_entropy},
                               {"final_bits", res.postproc->key.bits.size()}};
    }
    std::ofstream sf(stem + ".summary.json");
    sf << summary.dump(2) << '\n';
    std::cout << summary.dump(2) << std::endl;
}

int run_loopback(const Options& opt) {
    const qkd::SessionConfig cfg = build_config(opt);
    auto [ta, tb] = qkd::LoopbackTransport::make_pair();
    EndpointResult alice, bob;
    std::exception_ptr bob_error;
    std::thread bob_thread([&] {
        try {
            bob = run_endpoint(qkd::Role::Bob, cfg, *tb);
        } catch (...) {
            bob_error = std::current_exception();
            tb->close();
        }
    });
    std::exception_ptr alice_error;
    try {
        alice = run_endpoint(qkd::Role::Alice, cfg, *ta);
    } catch (...) {
        alice_error = std::current_exception();
        ta->close();
    }
    bob_thread.join();
    if (alice_error) std::rethrow_exception(alice_error);
    if (bob_error) std::rethrow_exception(bob_error);
    write_artifacts(opt, cfg, "alice", alice);
    write_artifacts(opt, cfg, "bob", bob);
    return alice.session.aborted ? kExitSecurityAbort : kExitOk;
}

int run_networked(const Options& opt, qkd::Role role) {
    const qkd::SessionConfig cfg = build_config(opt);
    std::unique_ptr<qkd::TcpTransport> transport;
    if (!opt.listen.empty()) {
        const auto [host, port] = split_host_port(opt.listen);
        transport = qkd::TcpTransport::listen_accept(host, port);
    } else if (!opt.connect.empty()) {
        const auto [host, port] = split_host_port(opt.connect);
        transport = qkd::TcpTransport::connect(host, port);
    } else {
        throw qkd::ConfigError("alice/bob modes need --listen or --connect");
    }
    const EndpointResult res = run_endpoint(role, cfg, *transport);
    write_artifacts(opt, cfg, role == qkd::Role::Alice ? "alice" : "bob", res);
    return res.session.aborted ? kExitSecurityAbort : kExitOk;
}

int run_analyze(const Options& opt) {
    if (opt.tags_a.empty() || opt.tags_b.empty())
        throw qkd::ConfigError("analyze mode needs --tags-a and --tags-b");
    const qkd::SessionConfig cfg = build_config(opt);
    const auto tags_a = qkd::read_tags_file(opt.tags_a);
    const auto tags_b = qkd::read_tags_file(opt.tags_b);
    const auto report = qkd::analyze_tags(tags_a, tags_b, qkd::ChannelMap::standard(),
                                          cfg.emitter.pulse_period_ps(), cfg.sync);
    const json j = qkd::report_to_json(report);
    if (!opt.out_path.empty()) {
        std::ofstream f(opt.out_path);
        f << j.dump(2) << '\n';
    }
    std::cout << j.dump(2) << std::endl;
    return kExitOk;
}

int run_calibrate(const Options& opt) {
    if (opt.target_cps < 0) throw qkd::ConfigError("calibrate mode needs --target (cps)");
    const qkd::SessionConfig cfg = build_config(opt);
    const auto fit = qkd::calibrate_singles_rate(opt.target_cps, cfg.emitter);
    json j = {{"target_cps", opt.target_cps},
              {"pair_prob", fit.pair_prob},
              {"efficiency_product", fit.efficiency_product}};
    std::cout << j.dump(2) << std::endl;
    return kExitOk;
}

int run_otp(const Options& opt) {
    if (opt.key_path.empty() || opt.in_path.empty() || opt.out_path.empty())
        throw qkd::ConfigError("otp mode needs --key, --in, and --out");
    qkd::KeyMaterial key = qkd::read_key_file(opt.key_path);
    std::ifstream in(opt.in_path, std::ios::binary);
    if (!in) throw qkd::ConfigError("cannot open input " + opt.in_path);
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    const auto out =
        opt.decrypt ? qkd::otp_decrypt(data, key) : qkd::otp_encrypt(data, key);
    std::ofstream of(opt.out_path, std::ios::binary | std::ios::trunc);
    of.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    // persist the consumption ledger so the key region can never be reused
    const std::string key_out = opt.key_out_path.empty() ? opt.key_path : opt.key_out_path;
    qkd::write_key_file(key_out, key);
    std::cout << json{{"bytes", out.size()},
                      {"consumed_bits", key.consumed_bits},
                      {"key_file", key_out}}
                     .dump(2)
              << std::endl;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-party entanglement-based QKD simulator"};
    Options opt;
    app.add_option("--mode", opt.mode, "loopback | alice | bob | analyze | calibrate | otp")
        ->required()
        ->check(CLI::IsMember({"loopback", "alice", "bob", "analyze", "calibrate", "otp"}));
    app.add_option("--config", opt.config_path, "session config JSON");
    app.add_option("--preset", opt.preset, "ideal | fiber-250m | freespace-270m");
    uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "simulation seed");
    double duration_val = 0;
    auto* dur_opt = app.add_option("--duration", duration_val, "total simulated duration, seconds");
    app.add_option("--accel", opt.accel, "acceleration factor (shrinks simulated packets)");
    app.add_option("--out-dir", opt.out_dir, "artifact output directory");
    app.add_option("--listen", opt.listen, "host:port to accept the peer on");
    app.add_option("--connect", opt.connect, "host:port of the peer");
    app.add_option("--tags-a", opt.tags_a, "Alice QTAG file (analyze)");
    app.add_option("--tags-b", opt.tags_b, "Bob QTAG file (analyze)");
    app.add_option("--target", opt.target_cps, "target singles rate, cps (calibrate)");
    app.add_option("--key", opt.key_path, "QKEY file (otp)");
    app.add_option("--key-out", opt.key_out_path, "updated QKEY path (otp; default in place)");
    app.add_option("--in", opt.in_path, "input file (otp)");
    app.add_option("--out", opt.out_path, "output file (otp/analyze)");
    app.add_flag("--decrypt", opt.decrypt, "decrypt instead of encrypt (otp)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (*seed_opt) opt.seed = seed_val;
    if (*dur_opt) opt.duration_s = duration_val;

    try {
        if (opt.mode == "loopback") return run_loopback(opt);
        if (opt.mode == "alice") return run_networked(opt, qkd::Role::Alice);
        if (opt.mode == "bob") return run_networked(opt, qkd::Role::Bob);
        if (opt.mode == "analyze") return run_analyze(opt);
        if (opt.mode == "calibrate") return run_calibrate(opt);
        if (opt.mode == "otp") return run_otp(opt);
        std::cerr << "unknown mode " << opt.mode << std::endl;
        return kExitConfig;
    } catch (const qkd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const qkd::KeyFileError& e) {
        std::cerr << "key error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const qkd::TagParseError& e) {
        std::cerr << "tag parse error at byte " << e.byte_offset << ": " << e.what() << std::endl;
        return kExitConfig;
    } catch (const qkd::TransportError& e) {
        std::cerr << "transport error: " << e.what() << std::endl;
        return kExitTransport;
    } catch (const qkd::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << std::endl;
        return kExitTransport;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
