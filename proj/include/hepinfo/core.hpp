#pragma once

// Domain types shared by the master, agents, client and simulator.

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hepinfo/expected.hpp"

namespace hepinfo {

using EpochMs = std::int64_t;
using JobId = std::uint64_t;

/// True for a nonempty run of [A-Za-z0-9._-]. Node ids, user names,
/// error codes and ledger reason tokens all share this lexical class.
bool is_token(std::string_view s) noexcept;

/// True for four canonical decimal octets (0-255, no leading zeros).
bool is_dotted_quad(std::string_view s) noexcept;

/// A token other than "-".
class NodeId {
public:
    static std::optional<NodeId> parse(std::string_view s);

    const std::string& str() const noexcept { return value_; }

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
    friend bool operator==(const NodeId&, const NodeId&) = default;

private:
    explicit NodeId(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

struct NodeStatic {
    std::string id;
    std::string ip;
    std::int64_t cpu_cores = 0;
    std::uint64_t total_mem_bytes = 0;

    friend bool operator==(const NodeStatic&, const NodeStatic&) = default;
};

enum class NodeError { BadId, BadIp, BadCores, BadMem };

std::string_view to_string(NodeError e) noexcept;

/// Checks NodeStatic invariants; the error names the first violated field.
Status<NodeError> validate_node_static(const NodeStatic& s);

/// ACR/AMR measurement reported by a worker.
struct ResourceSnapshot {
    std::int32_t acr_milli = 0;       // idle CPU capacity, 0..1000
    std::uint64_t amr_bytes = 0;      // available memory
    std::uint32_t running_jobs = 0;
    EpochMs taken_at = 0;

    friend bool operator==(const ResourceSnapshot&, const ResourceSnapshot&) = default;
};

inline constexpr std::int32_t kMaxAcrMilli = 1000;

bool is_valid_acr(std::int64_t acr_milli) noexcept;

struct JobSpec {
    std::string user;
    std::string workdir;
    std::string command;

    friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

/// user is a token, workdir is absolute with no whitespace, command is a
/// nonempty single line of UTF-8.
bool is_valid_job_spec(const JobSpec& s) noexcept;
bool is_valid_workdir(std::string_view s) noexcept;
bool is_valid_free_text(std::string_view s) noexcept;

enum class JobState { Queued, Dispatched, Done, Failed, Lost };

inline constexpr JobState kAllJobStates[] = {
    JobState::Queued, JobState::Dispatched, JobState::Done, JobState::Failed, JobState::Lost};

std::string_view to_string(JobState s) noexcept;
std::optional<JobState> parse_job_state(std::string_view s) noexcept;

bool is_legal_transition(JobState from, JobState to) noexcept;
bool is_terminal(JobState s) noexcept;

struct JobRecord {
    JobId job_id = 0;
    JobSpec spec;
    EpochMs submit_ts = 0;
    std::uint64_t seq = 0;
    JobState state = JobState::Queued;
    std::optional<NodeId> assigned;
    std::optional<std::int32_t> exit_code;

    friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

struct TransitionError {
    JobState from;
    JobState to;
};

/// Moves a record along a legal lifecycle edge. Assignment and exit code
/// are recorded by the caller; this only guards the state machine.
Expected<JobRecord, TransitionError> job_transition(JobRecord r, JobState to);

/// Monotonic job id source. Not thread-safe; owned by the master loop.
class JobIdCounter {
public:
    JobIdCounter() = default;
    explicit JobIdCounter(JobId last) : last_(last) {}

    JobId next() noexcept { return ++last_; }
    JobId last() const noexcept { return last_; }

private:
    JobId last_ = 0;
};

struct Config {
    std::int64_t heartbeat_interval_ms = 2000;
    std::int64_t stale_after_ms = 6000;
    std::int64_t dispatch_penalty_milli = 50;
    std::uint16_t listen_port = 7070;
    std::string workspace_root = "/Jugrid";
};

/// Empty when the configuration is usable, otherwise a description.
std::optional<std::string> validate_config(const Config& cfg);

class Clock {
public:
    virtual ~Clock() = default;
    virtual EpochMs now() = 0;
};

/// Wall clock in epoch milliseconds, clamped so it never runs backwards.
class SystemClock final : public Clock {
public:
    EpochMs now() override;

private:
    std::atomic<EpochMs> last_{0};
};

/// Clock advanced explicitly; used by the simulator and tests.
class ManualClock final : public Clock {
public:
    explicit ManualClock(EpochMs start = 0) : now_(start) {}
    EpochMs now() override { return now_; }
    void advance_to(EpochMs t) { if (t > now_) now_ = t; }

private:
    EpochMs now_;
};

}  // namespace hepinfo
