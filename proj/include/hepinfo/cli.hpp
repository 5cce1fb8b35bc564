#pragma once

// hepctl: submit jobs and inspect the cluster from the command line.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/expected.hpp"
#include "hepinfo/protocol.hpp"

namespace hepinfo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitErrReply = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConnection = 3;

inline constexpr const char* kDefaultMaster = "127.0.0.1:7070";

struct SubmitCmd {
    JobSpec spec;
    friend bool operator==(const SubmitCmd&, const SubmitCmd&) = default;
};
struct StatusCmd {
    JobId job_id = 0;
    friend bool operator==(const StatusCmd&, const StatusCmd&) = default;
};
struct NodesCmd {
    friend bool operator==(const NodesCmd&, const NodesCmd&) = default;
};
struct JobsCmd {
    friend bool operator==(const JobsCmd&, const JobsCmd&) = default;
};

using CliCommand = std::variant<SubmitCmd, StatusCmd, NodesCmd, JobsCmd>;

struct Invocation {
    CliCommand command;
    std::string master;
};

/// Process context parse_args may fall back on.
struct Environment {
    std::optional<std::string> master_addr;  // HEP_MASTER_ADDR
    std::string user;                        // invoking account
    std::string cwd;                         // default --workdir
};

struct UsageError {
    std::string message;  // empty when help was requested
    bool help = false;
};

/// args excludes the program name.
Expected<Invocation, UsageError> parse_args(std::span<const std::string> args,
                                            const Environment& env);

std::string usage();

proto::Message to_request(const CliCommand& cmd);

/// True once `reply` ends the exchange for `cmd`.
bool is_final_reply(const CliCommand& cmd, const proto::Message& reply);

struct Rendered {
    int exit_code = kExitOk;
    std::string out;
    std::string err;
};

/// Formats the replies received for `cmd`.
Rendered render(const CliCommand& cmd, const std::vector<proto::Message>& replies);

/// Connects, sends the request, collects replies and renders them.
Rendered execute(const Invocation& inv);

}  // namespace hepinfo::cli
