#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timex/model.hpp"

// Line-delimited JSON protocol between the engine and an external model:
//
//   engine -> model  {"type":"handshake","version":1}
//   model  -> engine {"type":"ready","version":1,"features":D,"timesteps":L,"task":"regression"}
//   engine -> model  {"type":"predict","id":N,"instances":[[[v...L]...D]...B]}
//   model  -> engine {"type":"prediction","id":N,"outputs":[v...B]}
//   model  -> engine {"type":"error","id":N|null,"message":"..."}
//   engine -> model  {"type":"shutdown"}
//
// Numbers are written in the shortest form that round-trips a double.
namespace tix::protocol {

inline constexpr int kVersion = 1;

// Shortest round-trip text for a finite double.
void append_number(std::string& out, double value);

std::string handshake_message(int version = kVersion);
std::string shutdown_message();
std::string predict_message(const PredictBatch& batch);
std::string ready_message(const ModelInfo& info, int version = kVersion);
std::string prediction_message(std::uint64_t id, std::span<const double> outputs);
std::string error_message(std::optional<std::uint64_t> id, const std::string& message);

// Reads the instances of a predict message into a batch of the given dims.
PredictBatch parse_predict(const std::string& line, const ModelInfo& info);

// Answers protocol messages from `in` on `out` until shutdown or end of input.
// Returns the process exit code (0 on orderly shutdown).
int serve(Model& model, std::istream& in, std::ostream& out);

struct ConformanceCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Probes an external model command against the protocol: handshake, id
// matching, in-order replies, determinism, batching transparency, recovery
// from a malformed line and orderly shutdown.
std::vector<ConformanceCheck> run_conformance(const std::string& command,
                                              const std::vector<std::string>& args,
                                              std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace tix::protocol
