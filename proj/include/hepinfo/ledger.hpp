#pragma once

// Append-only job event log kept by the master. One event per line:
//
//   <ts> SUBMIT <job_id> <user> <workdir> <command...>
//   <ts> ASSIGN <job_id> <node_id>
//   <ts> DONE <job_id> <exit_code>
//   <ts> FAIL <job_id> <reason>
//   <ts> LOST <job_id> <node_id>
//
// A nonzero DONE exit code means the job FAILED after running.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/expected.hpp"

namespace hepinfo {

namespace ledger {

struct Submitted {
    JobSpec spec;
    friend bool operator==(const Submitted&, const Submitted&) = default;
};
struct Assigned {
    NodeId node;
    friend bool operator==(const Assigned&, const Assigned&) = default;
};
struct Finished {
    std::int32_t exit_code = 0;
    friend bool operator==(const Finished&, const Finished&) = default;
};
struct Failed {
    std::string reason;
    friend bool operator==(const Failed&, const Failed&) = default;
};
struct Lost {
    NodeId node;
    friend bool operator==(const Lost&, const Lost&) = default;
};

}  // namespace ledger

struct LedgerEvent {
    EpochMs ts = 0;
    JobId job_id = 0;
    std::variant<ledger::Submitted, ledger::Assigned, ledger::Finished, ledger::Failed,
                 ledger::Lost>
        body;

    friend bool operator==(const LedgerEvent&, const LedgerEvent&) = default;
};

std::string encode_event(const LedgerEvent& e);
std::optional<LedgerEvent> parse_event(std::string_view line);

class LedgerSink {
public:
    virtual ~LedgerSink() = default;
    /// Must not return until the event is durable enough to replay.
    virtual void append(const LedgerEvent& e) = 0;
};

/// Keeps encoded lines in memory. Used by the simulator and tests.
class MemoryLedger final : public LedgerSink {
public:
    void append(const LedgerEvent& e) override { lines_.push_back(encode_event(e)); }
    const std::vector<std::string>& lines() const noexcept { return lines_; }
    std::string contents() const;

private:
    std::vector<std::string> lines_;
};

/// Appends to a file, issuing one write per event.
class FileLedger final : public LedgerSink {
public:
    explicit FileLedger(const std::filesystem::path& path, bool sync = false);
    ~FileLedger() override;
    FileLedger(const FileLedger&) = delete;
    FileLedger& operator=(const FileLedger&) = delete;

    void append(const LedgerEvent& e) override;

private:
    int fd_ = -1;
    bool sync_;
};

struct CorruptLedger {
    std::size_t line_no = 0;  // 1-based
};

struct RecoveredState {
    std::map<JobId, JobRecord> jobs;
    JobId max_job_id = 0;
    std::uint64_t max_seq = 0;
    /// Jobs that were in flight when the log ended; now marked LOST.
    std::vector<JobId> lost_on_recovery;
};

/// Rebuilds the job table from ledger text. An unterminated or malformed
/// final line is treated as torn and skipped.
Expected<RecoveredState, CorruptLedger> replay(std::string_view contents);

/// replay() over a file; a missing file yields an empty state.
Expected<RecoveredState, CorruptLedger> recover(const std::filesystem::path& path);

}  // namespace hepinfo
