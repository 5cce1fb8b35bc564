#pragma once

// Worker-side pieces: resource probing, job execution in the shared
// workspace and the heartbeat/reconnect loop.

#include <sys/types.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/expected.hpp"
#include "hepinfo/net.hpp"
#include "hepinfo/protocol.hpp"

namespace hepinfo::agent {

/// One reading of the host's counters. load1_milli is the 1-minute load
/// average in thousandths.
struct ProbeReading {
    std::int64_t cores = 0;
    std::uint64_t load1_milli = 0;
    std::uint64_t mem_total_bytes = 0;
    std::uint64_t mem_available_bytes = 0;
};

class SystemProbe {
public:
    virtual ~SystemProbe() = default;
    /// nullopt when the counters cannot be read.
    virtual std::optional<ProbeReading> read() = 0;
};

/// Reads /proc/loadavg and /proc/meminfo.
class ProcProbe final : public SystemProbe {
public:
    explicit ProcProbe(std::filesystem::path proc_root = "/proc") : root_(std::move(proc_root)) {}
    std::optional<ProbeReading> read() override;

private:
    std::filesystem::path root_;
};

/// Returns a fixed reading; tests and the simulator use it.
class FixedProbe final : public SystemProbe {
public:
    explicit FixedProbe(std::optional<ProbeReading> r) : reading_(r) {}
    std::optional<ProbeReading> read() override { return reading_; }
    void set(std::optional<ProbeReading> r) { reading_ = r; }

private:
    std::optional<ProbeReading> reading_;
};

/// Parses "/proc/loadavg" text into milli-load. Exact for the two-decimal
/// values the kernel prints.
std::optional<std::uint64_t> parse_loadavg(std::string_view text);
/// MemTotal and MemAvailable from "/proc/meminfo" text, in bytes.
std::optional<std::pair<std::uint64_t, std::uint64_t>> parse_meminfo(std::string_view text);

/// acr_milli = max(0, 1000 - floor(1000 * load1 / cores)).
std::int32_t acr_from_load(std::uint64_t load1_milli, std::int64_t cores) noexcept;

struct ProbeUnavailable {};

Expected<ResourceSnapshot, ProbeUnavailable> sample(SystemProbe& probe, std::uint32_t running_jobs,
                                                    EpochMs now);

// Exit codes reported for jobs that never ran.
inline constexpr std::int32_t kExitNotRunnable = 126;
inline constexpr std::int32_t kExitNotFound = 127;

/// True iff `workdir` exists, is a directory, and resolves (symlinks
/// included) to `root` or somewhere beneath it.
bool workdir_contained(const std::filesystem::path& workdir, const std::filesystem::path& root);

struct Launch {
    std::optional<pid_t> pid;        // set when a process was started
    std::int32_t exit_code = 0;      // meaningful only when pid is empty
};

/// Starts `/bin/sh -c <command>` in the job's workdir with stdout/stderr
/// redirected to <workdir>/<job_id>.out and .err. Nothing is started (and
/// 126 is reported) when the workdir is missing or outside `root`.
Launch launch_job(JobId job_id, const JobSpec& spec, const std::filesystem::path& root);

/// Blocks until the process exits. A signal death maps to 128 + signo.
std::int32_t wait_job(pid_t pid);

/// launch_job followed by wait_job.
std::int32_t run_job(JobId job_id, const JobSpec& spec, const std::filesystem::path& root);

/// Reconnect delays: 1 s, 2 s, 4 s, ... capped at 30 s.
class Backoff {
public:
    static constexpr std::int64_t kInitialMs = 1000;
    static constexpr std::int64_t kMaxMs = 30000;

    std::int64_t next_ms() noexcept {
        std::int64_t d = current_;
        current_ = std::min(current_ * 2, kMaxMs);
        return d;
    }
    void reset() noexcept { current_ = kInitialMs; }

private:
    std::int64_t current_ = kInitialMs;
};

/// Side effects the heartbeat loop needs, injectable for tests.
struct LoopIo {
    std::function<bool()> connect;  // connect and complete REGISTER
    std::function<bool()> connected;
    std::function<std::optional<ResourceSnapshot>()> sample;
    std::function<bool(const ResourceSnapshot&)> send_heartbeat;
    std::function<bool(std::int64_t)> sleep_ms;  // false once shutting down
};

/// Sends a heartbeat every interval while connected; when the link drops,
/// retries the connection with Backoff delays. A failed sample skips that
/// cycle's heartbeat only. Returns when sleep_ms reports shutdown.
void heartbeat_loop(const LoopIo& io, std::int64_t interval_ms);

struct RunningJob {
    pid_t pid = -1;
    EpochMs started_at = 0;
};

struct AgentOptions {
    net::HostPort master;
    std::string node_id;
    std::filesystem::path workroot = "/Jugrid";
    std::optional<std::string> advertise_ip;  // default: the socket's local address
    std::int64_t heartbeat_interval_ms = 2000;
};

/// The worker daemon. run() blocks until stop() is called.
class Agent {
public:
    Agent(AgentOptions opts, SystemProbe& probe, Clock& clock);
    ~Agent();

    void run();
    void stop();

    std::size_t running_jobs() const;

private:
    bool connect_and_register();
    bool send_line(const proto::Message& m);
    void reader_loop(std::shared_ptr<net::Fd> conn, std::unique_ptr<net::LineReader> lines);
    void start_job(const proto::Dispatch& d);
    void report_done(JobId job, std::int32_t exit_code);
    void drop_connection(const std::shared_ptr<net::Fd>& conn);
    void flush_unsent_locked();

    AgentOptions opts_;
    SystemProbe& probe_;
    Clock& clock_;

    std::atomic<bool> stopping_{false};
    mutable std::mutex mu_;  // guards everything below, and socket writes
    std::condition_variable cv_;
    std::shared_ptr<net::Fd> conn_;
    std::thread reader_;
    std::map<JobId, RunningJob> running_;
    std::vector<std::thread> waiters_;
    std::deque<proto::JobDone> unsent_;
};

}  // namespace hepinfo::agent
