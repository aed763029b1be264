#include "timex/protocol.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "timex/errors.hpp"
#include "timex/rng.hpp"
#include "timex/subprocess.hpp"

namespace tix::protocol {

using nlohmann::json;

void append_number(std::string& out, double value) {
    if (!std::isfinite(value)) throw InvalidArgument("cannot encode a non-finite number");
    // "-0" would read back as the integer 0
    if (value == 0.0 && std::signbit(value)) {
        out += "-0.0";
        return;
    }
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    out.append(buf.data(), ptr);
}

std::string handshake_message(int version) {
    return json{{"type", "handshake"}, {"version", version}}.dump();
}

std::string shutdown_message() { return R"({"type":"shutdown"})"; }

std::string predict_message(const PredictBatch& batch) {
    std::string out;
    out.reserve(64 + batch.values().size() * 20);
    out += R"({"type":"predict","id":)";
    out += std::to_string(batch.id());
    out += R"(,"instances":[)";
    const std::size_t l = batch.timesteps();
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (b) out += ',';
        out += '[';
        const auto inst = batch.instance(b);
        for (std::size_t j = 0; j < batch.features(); ++j) {
            if (j) out += ',';
            out += '[';
            for (std::size_t k = 0; k < l; ++k) {
                if (k) out += ',';
                append_number(out, inst[j * l + k]);
            }
            out += ']';
        }
        out += ']';
    }
    out += "]}";
    return out;
}

std::string ready_message(const ModelInfo& info, int version) {
    return json{{"type", "ready"},
                {"version", version},
                {"features", info.features},
                {"timesteps", info.timesteps},
                {"task", to_string(info.task)}}
        .dump();
}

std::string prediction_message(std::uint64_t id, std::span<const double> outputs) {
    std::string out = R"({"type":"prediction","id":)";
    out += std::to_string(id);
    out += R"(,"outputs":[)";
    for (std::size_t b = 0; b < outputs.size(); ++b) {
        if (b) out += ',';
        append_number(out, outputs[b]);
    }
    out += "]}";
    return out;
}

std::string error_message(std::optional<std::uint64_t> id, const std::string& message) {
    json doc{{"type", "error"}, {"message", message}};
    doc["id"] = id ? json(*id) : json(nullptr);
    return doc.dump();
}

namespace {

PredictBatch batch_from_json(const json& doc, const ModelInfo& info) {
    PredictBatch batch(info.features, info.timesteps, doc.at("id").get<std::uint64_t>());
    const auto& instances = doc.at("instances");
    if (!instances.is_array()) throw InvalidArgument("'instances' must be an array");
    batch.reserve(instances.size());
    for (const auto& inst : instances) {
        if (!inst.is_array() || inst.size() != info.features) {
            throw InvalidArgument("instance does not have " + std::to_string(info.features) + " features");
        }
        auto slot = batch.append();
        for (std::size_t j = 0; j < info.features; ++j) {
            const auto& series = inst[j];
            if (!series.is_array() || series.size() != info.timesteps) {
                throw InvalidArgument("series does not have " + std::to_string(info.timesteps) +
                                      " timesteps");
            }
            for (std::size_t k = 0; k < info.timesteps; ++k) {
                if (!series[k].is_number()) throw InvalidArgument("non-numeric cell");
                slot[j * info.timesteps + k] = series[k].get<double>();
            }
        }
    }
    return batch;
}

}  // namespace

PredictBatch parse_predict(const std::string& line, const ModelInfo& info) {
    const auto doc = json::parse(line);
    if (doc.value("type", "") != "predict") throw InvalidArgument("not a predict message");
    return batch_from_json(doc, info);
}

int serve(Model& model, std::istream& in, std::ostream& out) {
    const ModelInfo info = model.info();
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            out << error_message(std::nullopt, std::string("malformed message: ") + e.what()) << '\n'
                << std::flush;
            continue;
        }
        const std::string type = doc.is_object() ? doc.value("type", "") : "";
        if (type == "handshake") {
            out << ready_message(info) << '\n' << std::flush;
        } else if (type == "shutdown") {
            return 0;
        } else if (type == "predict") {
            std::optional<std::uint64_t> id;
            if (doc.contains("id") && doc["id"].is_number_unsigned()) id = doc["id"].get<std::uint64_t>();
            try {
                const PredictBatch batch = batch_from_json(doc, info);
                const auto outputs = model.predict(batch);
                out << prediction_message(batch.id(), outputs) << '\n' << std::flush;
            } catch (const std::exception& e) {
                out << error_message(id, e.what()) << '\n' << std::flush;
            }
        } else {
            out << error_message(std::nullopt, "unknown message type '" + type + "'") << '\n'
                << std::flush;
        }
    }
    return 0;
}

namespace {

struct Probe {
    Probe(const std::string& command, const std::vector<std::string>& args, std::chrono::milliseconds t)
        : process(command, args), timeout(t) {}

    ChildProcess process;
    std::chrono::milliseconds timeout;

    json exchange(const std::string& message) {
        process.write_line(message);
        return receive();
    }
    json receive() {
        auto line = process.read_line(timeout);
        if (!line) throw ProtocolError("model closed its output", "");
        return json::parse(*line);
    }
};

PredictBatch probe_batch(const ModelInfo& info, std::size_t count, std::uint64_t id, std::uint64_t salt) {
    PredictBatch batch(info.features, info.timesteps, id);
    Rng rng(mix64(salt));
    std::normal_distribution<double> normal;
    for (std::size_t b = 0; b < count; ++b) {
        for (double& v : batch.append()) v = normal(rng);
    }
    return batch;
}

std::vector<double> outputs_of(const json& reply, std::uint64_t id, std::size_t count) {
    if (reply.value("type", "") != "prediction") throw ProtocolError("expected a prediction", reply.dump());
    if (reply.at("id").get<std::uint64_t>() != id) {
        throw ProtocolError("reply id " + reply.at("id").dump() + " does not match " + std::to_string(id),
                            reply.dump());
    }
    auto outputs = reply.at("outputs").get<std::vector<double>>();
    if (outputs.size() != count) throw ProtocolError("wrong number of outputs", reply.dump());
    for (double v : outputs) {
        if (!std::isfinite(v)) throw ProtocolError("non-finite output", reply.dump());
    }
    return outputs;
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(const std::string& command,
                                              const std::vector<std::string>& args,
                                              std::chrono::milliseconds timeout) {
    std::vector<ConformanceCheck> checks;
    auto record = [&](const std::string& name, auto&& body) -> bool {
        ConformanceCheck check{name, false, ""};
        try {
            body(check);
            check.passed = check.detail.empty();
        } catch (const std::exception& e) {
            check.detail = e.what();
        }
        checks.push_back(check);
        return check.passed;
    };

    std::unique_ptr<Probe> probe;
    try {
        probe = std::make_unique<Probe>(command, args, timeout);
    } catch (const std::exception& e) {
        checks.push_back({"spawn", false, e.what()});
        return checks;
    }

    ModelInfo info;
    const bool ready = record("handshake", [&](ConformanceCheck& c) {
        const auto reply = probe->exchange(handshake_message());
        if (reply.value("type", "") != "ready") c.detail = "expected ready, got " + reply.dump();
        else if (reply.value("version", 0) != kVersion) c.detail = "version mismatch: " + reply.dump();
        else {
            info.features = reply.at("features").get<std::size_t>();
            info.timesteps = reply.at("timesteps").get<std::size_t>();
            info.task = task_from_string(reply.at("task").get<std::string>());
            if (info.features == 0 || info.timesteps == 0) c.detail = "zero dimensions declared";
        }
    });
    if (!ready) return checks;

    const auto a = probe_batch(info, 3, 7, 1);
    const auto b = probe_batch(info, 2, 8, 2);
    std::vector<double> out_a;
    std::vector<double> out_b;
    record("predict_id_matching", [&](ConformanceCheck&) {
        out_a = outputs_of(probe->exchange(predict_message(a)), 7, 3);
    });
    record("in_order_replies", [&](ConformanceCheck&) {
        auto b9 = b;
        b9.set_id(9);
        probe->process.write_line(predict_message(b));
        probe->process.write_line(predict_message(b9));
        out_b = outputs_of(probe->receive(), 8, 2);
        outputs_of(probe->receive(), 9, 2);
    });
    record("determinism", [&](ConformanceCheck& c) {
        auto again = a;
        again.set_id(10);
        if (outputs_of(probe->exchange(predict_message(again)), 10, 3) != out_a) {
            c.detail = "same batch produced different outputs";
        }
    });
    record("batching_transparency", [&](ConformanceCheck& c) {
        PredictBatch joint(info.features, info.timesteps, 11);
        for (std::size_t i = 0; i < a.size(); ++i) joint.add(a.instance(i));
        for (std::size_t i = 0; i < b.size(); ++i) joint.add(b.instance(i));
        auto expected = out_a;
        expected.insert(expected.end(), out_b.begin(), out_b.end());
        if (outputs_of(probe->exchange(predict_message(joint)), 11, 5) != expected) {
            c.detail = "concatenated batch differs from per-batch outputs";
        }
    });
    record("malformed_line_recovery", [&](ConformanceCheck& c) {
        const auto reply = probe->exchange("this is not json");
        if (reply.value("type", "") != "error" || !reply.contains("id") || !reply["id"].is_null()) {
            c.detail = "expected an error with null id, got " + reply.dump();
            return;
        }
        auto again = a;
        again.set_id(12);
        if (outputs_of(probe->exchange(predict_message(again)), 12, 3) != out_a) {
            c.detail = "model misbehaved after a malformed line";
        }
    });
    record("shutdown", [&](ConformanceCheck& c) {
        probe->process.write_line(shutdown_message());
        probe->process.close_stdin();
        const auto status = probe->process.wait_for(timeout);
        if (!status) {
            probe->process.kill();
            c.detail = "did not exit within the timeout";
        } else if (*status != 0) {
            c.detail = "exit status " + std::to_string(*status);
        }
    });
    return checks;
}

}  // namespace tix::protocol
