#pragma once

// Input/output oracles. An oracle answers "what should this input evaluate
// to?" for a given free-variable context. Two flavors exist: builtin oracles
// (reference implementations registered by the benchmark module, addressed as
// "builtin:NAME") and external command oracles ("cmd:SHELL"). An external
// command is spawned once per query; it receives one JSON object
//
//   {"input": "x*x", "context": {"x": {"int": 4}}}
//
// on standard input and must print exactly one value object (the same shape
// as an example's "output" field) on standard output and exit 0. Anything
// else is a protocol error, which is distinct from a domain error (EvalError)
// raised by a builtin oracle on inputs like division by zero: domain errors
// are retryable with a different context, protocol errors are not.

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <functional>
#include <string>
#include <utility>

#include "example.hpp"

namespace agsynth {

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Oracle {
    std::string kind;   // "builtin:NAME" or "cmd:SHELL", for reports
    std::function<Value(const std::string& input, const Context& ctx)> query;

    Value operator()(const std::string& input, const Context& ctx) const {
        return query(input, ctx);
    }
};

inline Oracle make_function_oracle(
    std::string kind, std::function<Value(const std::string&, const Context&)> fn) {
    return Oracle{std::move(kind), std::move(fn)};
}

namespace detail {

// Runs `sh -c command`, writing `payload` to its stdin and collecting its
// stdout. Returns the exit status or throws OracleError on plumbing failure.
inline int run_pipe_command(const std::string& command, const std::string& payload,
                            std::string& reply) {
    int in_pipe[2];    // parent writes -> child stdin
    int out_pipe[2];   // child stdout -> parent reads
    if (pipe(in_pipe) != 0) throw OracleError("oracle pipe failed: " + std::string(strerror(errno)));
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw OracleError("oracle pipe failed: " + std::string(strerror(errno)));
    }
    pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        throw OracleError("oracle fork failed: " + std::string(strerror(errno)));
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    // Ignore SIGPIPE around the write: a child that exits without reading
    // should surface as a protocol error, not kill the process.
    struct sigaction ign {}, old {};
    ign.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &ign, &old);
    size_t off = 0;
    while (off < payload.size()) {
        ssize_t n = write(in_pipe[1], payload.data() + off, payload.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;   // child closed stdin early; let the exit status decide
        }
        off += static_cast<size_t>(n);
    }
    close(in_pipe[1]);
    sigaction(SIGPIPE, &old, nullptr);
    reply.clear();
    char buf[4096];
    for (;;) {
        ssize_t n = read(out_pipe[0], buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (n == 0) break;
        reply.append(buf, static_cast<size_t>(n));
    }
    close(out_pipe[0]);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

}   // namespace detail

// External oracle: one subprocess per query, JSON in / JSON out, exit 0.
inline Oracle make_command_oracle(const std::string& command) {
    auto fn = [command](const std::string& input, const Context& ctx) -> Value {
        nlohmann::json jctx = nlohmann::json::object();
        for (const auto& [name, v] : ctx) jctx[name] = value_to_json(v);
        std::string payload =
            nlohmann::json{{"input", input}, {"context", jctx}}.dump() + "\n";
        std::string reply;
        int code = detail::run_pipe_command(command, payload, reply);
        if (code != 0)
            throw OracleError("oracle command '" + command + "' exited with status " +
                              std::to_string(code) + " on input \"" + input + "\"");
        try {
            return value_from_json(nlohmann::json::parse(reply));
        } catch (const std::exception& ex) {
            throw OracleError("oracle command '" + command + "' sent a malformed reply on input \"" +
                              input + "\": " + ex.what());
        }
    };
    return Oracle{"cmd:" + command, std::move(fn)};
}

}   // namespace agsynth
