#pragma once

// Most-available-node placement with a strict first-come first-serve queue.

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/registry.hpp"

namespace hepinfo {

/// Availability of a node in milli-units: the floored mean of its idle CPU
/// fraction and its free memory fraction, both in thousandths.
std::int32_t score(const NodeRecord& r) noexcept;

/// score(r) minus dispatch_penalty_milli for every dispatch the node has
/// received since its last heartbeat, floored at zero.
std::int64_t effective_score(const NodeRecord& r, const Config& cfg) noexcept;

/// Highest effective score wins; ties go to fewer running jobs, then the
/// lexicographically smallest node id.
std::optional<NodeId> select_node(std::span<const NodeRecord> candidates, const Config& cfg);

struct QueueEntry {
    EpochMs submit_ts = 0;
    std::uint64_t seq = 0;
    JobId job_id = 0;

    friend auto operator<=>(const QueueEntry&, const QueueEntry&) = default;
};

/// Queued jobs ordered by (submit_ts, seq).
class PendingQueue {
public:
    void push(const JobRecord& r) { entries_.insert(QueueEntry{r.submit_ts, r.seq, r.job_id}); }
    void push(QueueEntry e) { entries_.insert(e); }
    bool erase(const QueueEntry& e) { return entries_.erase(e) > 0; }

    const QueueEntry& front() const { return *entries_.begin(); }
    void pop_front() { entries_.erase(entries_.begin()); }

    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::set<QueueEntry> entries_;
};

struct DispatchDecision {
    JobId job_id = 0;
    NodeId node;
    EpochMs decided_at = 0;

    friend bool operator==(const DispatchDecision&, const DispatchDecision&) = default;
};

/// Sees the candidate set handed to select_node and the node it chose.
using DecisionObserver = std::function<void(std::span<const NodeRecord>, const NodeId&)>;

/// Places queued jobs head-first until the queue empties or no node is
/// eligible. Each placement is charged to the registry via note_dispatch
/// before the next job is considered. Placed jobs leave the queue.
std::vector<DispatchDecision> drain(PendingQueue& queue, Registry& registry, EpochMs now,
                                    const Config& cfg, const DecisionObserver& observer = {});

}  // namespace hepinfo
