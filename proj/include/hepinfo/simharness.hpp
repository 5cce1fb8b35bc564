#pragma once

// Deterministic cluster simulation on a virtual clock.
//
// The simulator feeds REGISTER, HEARTBEAT, SUBMIT and JOBDONE messages into
// the same Master the daemon runs, so placement behaviour observed here is
// that of the shipped scheduler. Jobs do not execute; each one occupies its
// node for a fixed service time.
//
// Scenario text format, one record per line ('#' comments allowed):
//
//   NODE <id> <ip> <cores> <mem_bytes>
//   TRACE <id> <at_ms> <acr_milli> <amr_bytes>
//   JOB <at_ms> <user> <workdir> <service_ms> <command...>
//   HORIZON <ms>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/expected.hpp"
#include "hepinfo/ledger.hpp"
#include "hepinfo/registry.hpp"
#include "hepinfo/scheduler.hpp"

namespace hepinfo::sim {

struct TracePoint {
    EpochMs at = 0;
    ResourceSnapshot snapshot;
};

struct SimNode {
    NodeStatic info;
    std::vector<TracePoint> trace;
};

struct Arrival {
    EpochMs at = 0;
    JobSpec spec;
    std::int64_t service_time_ms = 0;
};

struct Scenario {
    std::vector<SimNode> nodes;
    std::vector<Arrival> arrivals;
    EpochMs horizon_ms = 0;
    Config cfg;
};

struct InvalidScenario {
    std::size_t line = 0;  // 0 when not tied to a line of scenario text
    std::string message;
};

std::optional<InvalidScenario> validate(const Scenario& s);

Expected<Scenario, InvalidScenario> parse_scenario(std::string_view text);
Expected<Scenario, InvalidScenario> load_scenario(const std::filesystem::path& path);

struct DispatchEntry {
    EpochMs at = 0;
    JobId job_id = 0;
    NodeId node;

    friend bool operator==(const DispatchEntry&, const DispatchEntry&) = default;
};

struct DispatchLog {
    std::vector<DispatchEntry> entries;
    std::map<JobId, JobRecord> jobs;
    std::vector<NodeId> nodes;

    friend bool operator==(const DispatchLog&, const DispatchLog&) = default;
};

struct Hooks {
    LedgerSink* ledger = nullptr;
    /// Called for every placement with the candidate set and the choice.
    DecisionObserver on_decision;
};

Expected<DispatchLog, InvalidScenario> run(const Scenario& s, const Hooks& hooks = {});

/// Independent placement reference: every candidate's effective score is
/// computed in arbitrary precision, the whole set is sorted by
/// (-score, running_jobs, node id) and the first entry returned.
std::optional<NodeId> oracle_select(std::span<const NodeRecord> candidates, const Config& cfg);

struct BalanceReport {
    std::map<NodeId, std::size_t> counts;
    std::size_t spread = 0;  // max count - min count
};

/// Counts cover every node listed in the log plus any node that received
/// a dispatch.
BalanceReport balance_report(const DispatchLog& log);

/// "<t> <job_id> <node>" per dispatch, then BALANCE and SPREAD lines.
std::string render(const DispatchLog& log, const BalanceReport& report);

}  // namespace hepinfo::sim
