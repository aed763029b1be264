#pragma once

#include <stdexcept>
#include <string>

namespace tix {

// Bad argument or violated precondition at an API boundary.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A dataset, spec or results file that does not parse under its declared format.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Constructing a value that would break one of its type invariants.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure talking to an external model. `raw()` holds the offending message
// (or a description of the transport failure when no message was received).
class ProtocolError : public std::runtime_error {
public:
    ProtocolError(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_(std::move(raw)) {}
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

// Spawn failure, handshake timeout or version mismatch.
class StartupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A test in the hypothesis tree failed to run.
class AnalysisError : public std::runtime_error {
public:
    AnalysisError(const std::string& node_id, const std::string& what)
        : std::runtime_error("test '" + node_id + "' failed: " + what), node_id_(node_id) {}

    const std::string& node_id() const noexcept { return node_id_; }

private:
    std::string node_id_;
};

class TuningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tix
