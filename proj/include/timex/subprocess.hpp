#pragma once

#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "timex/model.hpp"

namespace tix {

// A child process whose stdin/stdout are connected to us by pipes; its stderr
// is inherited so diagnostics pass straight through.
class ChildProcess {
public:
    // Runs `command` (looked up on PATH) with `args`. Throws StartupError when
    // the process cannot be started.
    ChildProcess(const std::string& command, const std::vector<std::string>& args);
    ~ChildProcess();

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    // Writes `line` followed by '\n'. Throws ProtocolError on a broken pipe.
    void write_line(std::string_view line);
    // Next line without its terminator, or nullopt at end of stream. Throws
    // ProtocolError when `timeout` elapses first.
    std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout);
    void close_stdin();
    // Exit status once the process has exited within `timeout`, else nullopt.
    std::optional<int> wait_for(std::chrono::milliseconds timeout);
    void kill();
    bool exited() const { return exit_status_.has_value(); }
    std::optional<int> exit_status() const { return exit_status_; }
    int pid() const { return pid_; }

private:
    bool reap(bool block);

    int pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    std::optional<int> exit_status_;
};

// Model served by an external process over the line-delimited JSON protocol.
class SubprocessModel final : public Model {
public:
    SubprocessModel(const std::string& command, const std::vector<std::string>& args,
                    std::chrono::milliseconds timeout);
    ~SubprocessModel() override;

    ModelInfo info() const override { return info_; }
    ModelBackend backend() const override { return ModelBackend::external_subprocess; }
    std::vector<double> predict(const PredictBatch& batch) override;
    // Sends the shutdown message and waits up to the timeout before killing.
    // Safe to call more than once.
    void shutdown() override;

    // Exit status after shutdown; -1 when the process had to be killed.
    std::optional<int> exit_status() const { return exit_status_; }
    bool was_killed() const { return killed_; }
    void set_predict_timeout(std::optional<std::chrono::milliseconds> timeout) {
        predict_timeout_ = timeout;
    }

private:
    ChildProcess process_;
    ModelInfo info_;
    std::chrono::milliseconds timeout_;
    std::optional<std::chrono::milliseconds> predict_timeout_;
    std::uint64_t next_id_ = 1;
    bool shut_down_ = false;
    bool killed_ = false;
    std::optional<int> exit_status_;
    std::mutex mutex_;
};

ModelHandle spawn_external_model(const std::string& command, const std::vector<std::string>& args,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(10));

// Runs `command_line` through /bin/sh (as `exec <command_line>`).
ModelHandle spawn_external_model_shell(const std::string& command_line,
                                       std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace tix
