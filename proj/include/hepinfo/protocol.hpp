#pragma once

// Line-oriented text protocol spoken between agents, clients and the master.
//
//   REGISTER <node_id> <ip> <cpu_cores> <total_mem_bytes>
//   HEARTBEAT <node_id> <acr_milli> <amr_bytes> <running_jobs>
//   JOBDONE <node_id> <job_id> <exit_code>
//   SUBMIT <user> <workdir> <command...>
//   STATUS <job_id>
//   NODES
//   JOBS
//   DISPATCH <job_id> <user> <workdir> <command...>
//   JOBID <job_id>
//   STATE <job_id> <state> <node_id|-> <submit_ts> <exit_code|->
//   NODE <node_id> <ip> <acr_milli> <amr_bytes> <running_jobs> <age_ms> <yes|no>
//   OK
//   ERR <code> <text...>
//
// Fields are separated by exactly one space. The trailing free-text field of
// SUBMIT, DISPATCH and ERR runs to the end of the line.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/expected.hpp"

namespace hepinfo::proto {

struct Register {
    NodeStatic node;
    friend bool operator==(const Register&, const Register&) = default;
};

struct Heartbeat {
    NodeId node;
    std::int32_t acr_milli = 0;
    std::uint64_t amr_bytes = 0;
    std::uint32_t running_jobs = 0;
    friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

struct JobDone {
    NodeId node;
    JobId job_id = 0;
    std::int32_t exit_code = 0;
    friend bool operator==(const JobDone&, const JobDone&) = default;
};

struct Submit {
    JobSpec spec;
    friend bool operator==(const Submit&, const Submit&) = default;
};

struct StatusQuery {
    JobId job_id = 0;
    friend bool operator==(const StatusQuery&, const StatusQuery&) = default;
};

struct NodesQuery {
    friend bool operator==(const NodesQuery&, const NodesQuery&) = default;
};

struct JobsQuery {
    friend bool operator==(const JobsQuery&, const JobsQuery&) = default;
};

struct Dispatch {
    JobId job_id = 0;
    JobSpec spec;
    friend bool operator==(const Dispatch&, const Dispatch&) = default;
};

struct JobIdReply {
    JobId job_id = 0;
    friend bool operator==(const JobIdReply&, const JobIdReply&) = default;
};

struct StateRow {
    JobId job_id = 0;
    JobState state = JobState::Queued;
    std::optional<NodeId> node;
    EpochMs submit_ts = 0;
    std::optional<std::int32_t> exit_code;
    friend bool operator==(const StateRow&, const StateRow&) = default;
};

struct NodeRow {
    NodeId node;
    std::string ip;
    std::int32_t acr_milli = 0;
    std::uint64_t amr_bytes = 0;
    std::uint32_t running_jobs = 0;
    std::int64_t age_ms = 0;
    bool eligible = false;
    friend bool operator==(const NodeRow&, const NodeRow&) = default;
};

struct Ok {
    friend bool operator==(const Ok&, const Ok&) = default;
};

struct Err {
    std::string code;
    std::string text;
    friend bool operator==(const Err&, const Err&) = default;
};

using Message = std::variant<Register, Heartbeat, JobDone, Submit, StatusQuery, NodesQuery,
                             JobsQuery, Dispatch, JobIdReply, StateRow, NodeRow, Ok, Err>;

/// Upper-case keyword that starts the encoded form of m.
std::string_view keyword(const Message& m);

/// Canonical line for m, '\n' terminated. m must satisfy the field invariants.
std::string encode(const Message& m);

struct DecodeError {
    enum class Kind { UnknownKeyword, BadArity, BadField };
    Kind kind;
    std::size_t index = 0;  // 1-based field position for BadField

    friend bool operator==(const DecodeError&, const DecodeError&) = default;
};

std::string describe(const DecodeError& e);

/// Parses one line. A single trailing '\n' is accepted and ignored.
Expected<Message, DecodeError> decode(std::string_view line);

inline constexpr std::size_t kMaxLineBytes = 65536;

enum class FrameError { LineTooLong, TruncatedFinalLine };

std::string_view to_string(FrameError e) noexcept;

/// Incremental '\n' splitter for a byte stream.
///
/// Bytes may arrive in arbitrary chunks; complete lines are returned in order
/// and an unterminated tail is buffered. A line whose content exceeds
/// kMaxLineBytes poisons the reader.
class FrameReader {
public:
    Expected<std::vector<std::string>, FrameError> feed(std::string_view bytes);

    /// Call at end of stream. Fails if a partial line is still buffered.
    Status<FrameError> finish() const;

    const std::string& pending() const noexcept { return pending_; }

private:
    std::string pending_;
    bool failed_ = false;
};

}  // namespace hepinfo::proto
