#include "timex/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

#include "json.hpp"
#include "timex/errors.hpp"
#include "timex/protocol.hpp"

extern char** environ;

namespace tix {

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

int decode_status(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

}  // namespace

ChildProcess::ChildProcess(const std::string& command, const std::vector<std::string>& args) {
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw StartupError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw StartupError(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<std::string> argv_storage;
    argv_storage.push_back(command);
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, command.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw StartupError("cannot start '" + command + "': " + std::strerror(rc));
    }
    pid_ = pid;
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
}

ChildProcess::~ChildProcess() {
    close_fd(stdin_fd_);
    close_fd(stdout_fd_);
    if (pid_ > 0 && !exit_status_) {
        if (!wait_for(std::chrono::milliseconds(200))) kill();
    }
}

void ChildProcess::write_line(std::string_view line) {
    if (stdin_fd_ < 0) throw ProtocolError("model input already closed", std::string(line));
    std::string data(line);
    data += '\n';
    std::size_t offset = 0;
    while (offset < data.size()) {
        const ssize_t n = ::write(stdin_fd_, data.data() + offset, data.size() - offset);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("cannot write to model: ") + std::strerror(errno),
                                data.substr(0, 200));
        }
        offset += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> ChildProcess::read_line(std::optional<std::chrono::milliseconds> timeout) {
    const auto deadline = timeout ? std::chrono::steady_clock::now() + *timeout
                                  : std::chrono::steady_clock::time_point::max();
    std::array<char, 65536> chunk{};
    while (true) {
        const auto newline = buffer_.find('\n');
        if (newline != std::string::npos) {
            std::string line = buffer_.substr(0, newline);
            buffer_.erase(0, newline + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (stdout_fd_ < 0) return std::nullopt;
        int wait_ms = -1;
        if (timeout) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw ProtocolError("timed out waiting for the model", buffer_);
            wait_ms = static_cast<int>(left.count());
        }
        pollfd pfd{stdout_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, wait_ms);
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("poll: ") + std::strerror(errno), buffer_);
        }
        if (ready == 0) throw ProtocolError("timed out waiting for the model", buffer_);
        const ssize_t n = ::read(stdout_fd_, chunk.data(), chunk.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("read: ") + std::strerror(errno), buffer_);
        }
        if (n == 0) {
            close_fd(stdout_fd_);
            if (buffer_.empty()) return std::nullopt;
            std::string rest;
            rest.swap(buffer_);
            return rest;
        }
        buffer_.append(chunk.data(), static_cast<std::size_t>(n));
    }
}

void ChildProcess::close_stdin() { close_fd(stdin_fd_); }

bool ChildProcess::reap(bool block) {
    if (exit_status_) return true;
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, block ? 0 : WNOHANG);
    if (r == pid_) {
        exit_status_ = decode_status(status);
        return true;
    }
    return false;
}

std::optional<int> ChildProcess::wait_for(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (!reap(false)) {
        if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return exit_status_;
}

void ChildProcess::kill() {
    if (exit_status_ || pid_ <= 0) return;
    ::kill(pid_, SIGKILL);
    reap(true);
}

SubprocessModel::SubprocessModel(const std::string& command, const std::vector<std::string>& args,
                                 std::chrono::milliseconds timeout)
    : process_(command, args), timeout_(timeout) {
    using nlohmann::json;
    std::optional<std::string> line;
    try {
        process_.write_line(protocol::handshake_message());
        line = process_.read_line(timeout_);
    } catch (const ProtocolError& e) {
        process_.kill();
        throw StartupError(std::string("handshake failed: ") + e.what());
    }
    if (!line) {
        process_.kill();
        throw StartupError("model '" + command + "' exited before the handshake");
    }
    json reply;
    try {
        reply = json::parse(*line);
    } catch (const json::exception&) {
        process_.kill();
        throw StartupError("malformed handshake reply: " + *line);
    }
    if (reply.value("type", "") != "ready") {
        process_.kill();
        throw StartupError("expected a ready message, got: " + *line);
    }
    const int version = reply.value("version", -1);
    if (version != protocol::kVersion) {
        shutdown();
        throw StartupError("protocol version mismatch: engine speaks " +
                           std::to_string(protocol::kVersion) + ", model replied " +
                           std::to_string(version));
    }
    try {
        info_.features = reply.at("features").get<std::size_t>();
        info_.timesteps = reply.at("timesteps").get<std::size_t>();
        info_.task = task_from_string(reply.at("task").get<std::string>());
    } catch (const std::exception& e) {
        shutdown();
        throw StartupError(std::string("bad ready message: ") + e.what() + ": " + *line);
    }
}

SubprocessModel::~SubprocessModel() {
    try {
        shutdown();
    } catch (...) {
    }
}

std::vector<double> SubprocessModel::predict(const PredictBatch& batch) {
    using nlohmann::json;
    std::lock_guard lock(mutex_);
    if (shut_down_) throw ProtocolError("model already shut down", "");
    PredictBatch request = batch;
    const std::uint64_t id = next_id_++;
    request.set_id(id);
    process_.write_line(protocol::predict_message(request));
    auto line = process_.read_line(predict_timeout_);
    if (!line) {
        const auto status = process_.wait_for(std::chrono::milliseconds(100));
        throw ProtocolError("model process exited during predict" +
                                (status ? " with status " + std::to_string(*status) : std::string()),
                            "");
    }
    json reply;
    try {
        reply = json::parse(*line);
    } catch (const json::exception&) {
        throw ProtocolError("malformed reply from model", *line);
    }
    const std::string type = reply.is_object() ? reply.value("type", "") : "";
    if (type == "error") {
        throw ProtocolError("model reported an error: " + reply.value("message", std::string()), *line);
    }
    if (type != "prediction") throw ProtocolError("unexpected reply type '" + type + "'", *line);
    if (!reply.contains("id") || !reply["id"].is_number_unsigned() ||
        reply["id"].get<std::uint64_t>() != id) {
        throw ProtocolError("reply id does not match request id " + std::to_string(id), *line);
    }
    const auto& outputs = reply.contains("outputs") ? reply["outputs"] : json();
    if (!outputs.is_array() || outputs.size() != batch.size()) {
        throw ProtocolError("reply does not carry " + std::to_string(batch.size()) + " outputs", *line);
    }
    std::vector<double> values;
    values.reserve(outputs.size());
    for (const auto& v : outputs) {
        if (!v.is_number()) throw ProtocolError("non-numeric output", *line);
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ProtocolError("non-finite output", *line);
        values.push_back(x);
    }
    return values;
}

void SubprocessModel::shutdown() {
    std::lock_guard lock(mutex_);
    if (shut_down_) return;
    shut_down_ = true;
    try {
        process_.write_line(protocol::shutdown_message());
    } catch (const ProtocolError&) {
        // already gone
    }
    process_.close_stdin();
    exit_status_ = process_.wait_for(timeout_);
    if (!exit_status_) {
        process_.kill();
        killed_ = true;
        exit_status_ = -1;
    }
}

ModelHandle spawn_external_model(const std::string& command, const std::vector<std::string>& args,
                                 std::chrono::milliseconds timeout) {
    return ModelHandle(std::make_shared<SubprocessModel>(command, args, timeout));
}

ModelHandle spawn_external_model_shell(const std::string& command_line,
                                       std::chrono::milliseconds timeout) {
    return spawn_external_model("/bin/sh", {"-c", "exec " + command_line}, timeout);
}

}  // namespace tix
