#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qkd/analysis.hpp"
#include "qkd/cascade.hpp"
#include "qkd/config.hpp"
#include "qkd/emitter.hpp"
#include "qkd/keyfile.hpp"
#include "qkd/postproc.hpp"
#include "qkd/session.hpp"
#include "qkd/transport.hpp"
#include "qkd/trevisan.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

struct Endpoint {
    qkd::SessionResult session;
    std::optional<qkd::PostprocResult> postproc;
};

Endpoint run_endpoint(qkd::Role role, const qkd::SessionConfig& cfg, qkd::Transport& transport,
                      bool postprocess) {
    Endpoint res;
    res.session = qkd::run_session(role, cfg, transport);
    const auto& s = res.session;
    if (postprocess && cfg.postproc.enabled && !s.aborted && s.sifted_key.size() > 0) {
        const double qber = s.qber_sample_size > 0
                                ? static_cast<double>(s.qber_sample_mismatches) /
                                      static_cast<double>(s.qber_sample_size)
                                : 0.0;
        res.postproc =
            qkd::run_postproc(role, s.sifted_key, qber, cfg.postproc, cfg.seed, transport);
    }
    return res;
}

qkd::KeyMaterial endpoint_key(const Endpoint& e) {
    if (e.postproc) return e.postproc->key;
    qkd::KeyMaterial key;
    key.stage = qkd::KeyStage::Sifted;
    key.bits = e.session.sifted_key;
    return key;
}

std::vector<uint8_t> to_vector(const py::bytes& data) {
    const std::string s = data;
    return std::vector<uint8_t>(s.begin(), s.end());
}

py::bytes to_bytes(const std::vector<uint8_t>& data) {
    return py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
}

}  // namespace

PYBIND11_MODULE(qkdsim, m) {
    m.doc() = "Two-party entanglement-based QKD simulator: session simulation, "
              "coincidence analysis, reconciliation, extraction, and one-time-pad keys";

    py::register_exception<qkd::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<qkd::KeyFileError>(m, "KeyFileError", PyExc_ValueError);
    py::register_exception<qkd::ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

    py::class_<qkd::SessionConfig>(m, "SessionConfig")
        .def(py::init<>())
        .def_readwrite("seed", &qkd::SessionConfig::seed)
        .def_readwrite("session_id", &qkd::SessionConfig::session_id)
        .def_readwrite("total_duration_s", &qkd::SessionConfig::total_duration_s)
        .def_readwrite("packet_duration_s", &qkd::SessionConfig::packet_duration_s)
        .def_readwrite("qber_sample_fraction", &qkd::SessionConfig::qber_sample_fraction)
        .def_readwrite("retain_tags", &qkd::SessionConfig::retain_tags)
        .def("validate", &qkd::SessionConfig::validate)
        .def("to_json",
             [](const qkd::SessionConfig& cfg) { return qkd::session_config_to_json(cfg).dump(2); })
        .def_static("from_json", [](const std::string& text) {
            json j;
            try {
                j = json::parse(text);
            } catch (const json::exception& e) {
                throw qkd::ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            return qkd::session_config_from_json(j);
        });

    m.def("preset", &qkd::scenario_preset, py::arg("name"),
          "Session preset: ideal, fiber-250m, or freespace-270m");

    py::class_<qkd::KeyMaterial>(m, "Key")
        .def_property_readonly("stage",
                               [](const qkd::KeyMaterial& k) { return qkd::key_stage_name(k.stage); })
        .def_property_readonly("length", [](const qkd::KeyMaterial& k) { return k.bits.size(); })
        .def_readonly("leaked_bits", &qkd::KeyMaterial::leaked_bits)
        .def_readonly("extraction_error", &qkd::KeyMaterial::extraction_error)
        .def_readonly("consumed_bits", &qkd::KeyMaterial::consumed_bits)
        .def_property_readonly("available_bits", &qkd::KeyMaterial::available_bits)
        .def_property_readonly("key_bytes",
                               [](const qkd::KeyMaterial& k) { return to_bytes(k.bits.bytes()); })
        .def("encrypt",
             [](qkd::KeyMaterial& k, const py::bytes& plaintext) {
                 return to_bytes(qkd::otp_encrypt(to_vector(plaintext), k));
             })
        .def("decrypt",
             [](qkd::KeyMaterial& k, const py::bytes& ciphertext) {
                 return to_bytes(qkd::otp_decrypt(to_vector(ciphertext), k));
             })
        .def("save", [](const qkd::KeyMaterial& k, const std::string& path) {
            qkd::write_key_file(path, k);
        })
        .def_static("load", &qkd::read_key_file, py::arg("path"));

    m.def(
        "run_loopback",
        [](const qkd::SessionConfig& cfg, bool postprocess,
           const std::optional<std::string>& tag_dir) {
            Endpoint alice, bob;
            {
                py::gil_scoped_release release;
                auto [ta, tb] = qkd::LoopbackTransport::make_pair();
                std::exception_ptr bob_error;
                std::thread bob_thread([&] {
                    try {
                        bob = run_endpoint(qkd::Role::Bob, cfg, *tb, postprocess);
                    } catch (...) {
                        bob_error = std::current_exception();
                        tb->close();
                    }
                });
                std::exception_ptr alice_error;
                try {
                    alice = run_endpoint(qkd::Role::Alice, cfg, *ta, postprocess);
                } catch (...) {
                    alice_error = std::current_exception();
                    ta->close();
                }
                bob_thread.join();
                if (alice_error) std::rethrow_exception(alice_error);
                if (bob_error) std::rethrow_exception(bob_error);
                if (tag_dir) {
                    const std::string stem = *tag_dir + "/" + cfg.session_id;
                    qkd::write_tags_file(stem + ".alice.tags.qtag", alice.session.tags);
                    qkd::write_tags_file(stem + ".bob.tags.qtag", bob.session.tags);
                }
            }
            py::dict out;
            const auto& s = alice.session;
            out["aborted"] = s.aborted;
            out["abort_reason"] = qkd::abort_reason_name(s.abort_reason);
            out["coincidences"] = s.total_coincidences;
            out["sifted_bits"] = s.sifted_key.size();
            out["duration_s"] = s.duration_s;
            if (!s.metrics.empty()) {
                out["qber"] = s.metrics.back().qber;
                out["s_value"] = s.metrics.back().s_value;
                out["s_sigma"] = s.metrics.back().s_sigma;
            }
            out["metrics_csv"] = qkd::metrics_to_csv(s.metrics, cfg.packet_duration_s);
            out["alice_key"] = endpoint_key(alice);
            out["bob_key"] = endpoint_key(bob);
            if (alice.postproc) {
                out["leaked_bits"] = alice.postproc->leaked_bits;
                out["min_entropy"] = alice.postproc->min_entropy;
            }
            return out;
        },
        py::arg("config"), py::arg("postprocess") = true, py::arg("tag_dir") = std::nullopt,
        "Run both endpoints in-process and return session metrics plus the "
        "distilled keys of each role; tag_dir additionally writes each "
        "role's QTAG stream there");

    m.def(
        "analyze_tag_files",
        [](const std::string& tags_a, const std::string& tags_b, const qkd::SessionConfig& cfg) {
            const auto a = qkd::read_tags_file(tags_a);
            const auto b = qkd::read_tags_file(tags_b);
            const auto report = qkd::analyze_tags(a, b, qkd::ChannelMap::standard(),
                                                  cfg.emitter.pulse_period_ps(), cfg.sync);
            return qkd::report_to_json(report).dump(2);
        },
        py::arg("tags_a"), py::arg("tags_b"), py::arg("config"),
        "Offline coincidence report (g2, offset, QBER, S) over two QTAG files, as JSON");

    m.def(
        "calibrate_pair_prob",
        [](double target_cps, const qkd::SessionConfig& cfg) {
            return qkd::calibrate_singles_rate(target_cps, cfg.emitter).pair_prob;
        },
        py::arg("target_cps"), py::arg("config"),
        "Per-pulse pair probability that reproduces the target singles rate");

    m.def("fss_visibility", &qkd::fss_visibility, py::arg("fss_uev"), py::arg("lifetime_ns"));
    m.def("binary_entropy", &qkd::binary_entropy, py::arg("p"));
    m.def("extractable_bits", &qkd::extractable_bits, py::arg("min_entropy"), py::arg("epsilon"));
}
