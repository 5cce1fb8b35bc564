#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/ledger.hpp"
#include "hepinfo/protocol.hpp"
#include "hepinfo/registry.hpp"
#include "hepinfo/scheduler.hpp"

namespace hepinfo {

/// Opaque handle for a peer connection, assigned by the transport.
using ConnId = std::uint64_t;

struct Outbound {
    ConnId to = 0;
    proto::Message msg;
};

/// The master's state machine: node registry, pending queue, job table and
/// the agent connection bindings. Transport-free; the network server and the
/// simulator both drive it with decoded messages and a clock reading.
///
/// Every ledger append for an event happens before the returned outbound
/// messages exist, so a caller that sends them afterwards gets write-ahead
/// ordering for free.
class Master {
public:
    Master(Config cfg, LedgerSink& ledger);
    Master(Config cfg, LedgerSink& ledger, RecoveredState recovered);

    /// Applies one request. Queries never change state.
    std::vector<Outbound> on_message(ConnId origin, const proto::Message& m, EpochMs now);

    /// on_message followed by tick() when the message was a SUBMIT or a
    /// HEARTBEAT. Replies come first.
    std::vector<Outbound> handle(ConnId origin, const proto::Message& m, EpochMs now);

    /// Decodes a raw line; undecodable input yields ERR bad-request.
    std::vector<Outbound> handle_line(ConnId origin, std::string_view line, EpochMs now);

    /// Places queued jobs and emits DISPATCH to the chosen agents.
    std::vector<Outbound> tick(EpochMs now);

    /// Transport lost `conn`. If it was an agent's current connection, the
    /// jobs running there become LOST.
    void on_disconnect(ConnId conn, EpochMs now);
    void on_agent_disconnect(const NodeId& id, EpochMs now);

    const Registry& registry() const noexcept { return registry_; }
    const std::map<JobId, JobRecord>& jobs() const noexcept { return jobs_; }
    const PendingQueue& queue() const noexcept { return queue_; }
    const Config& config() const noexcept { return cfg_; }
    std::optional<ConnId> connection_of(const NodeId& id) const;

    void set_decision_observer(DecisionObserver obs) { observer_ = std::move(obs); }

private:
    std::vector<Outbound> reply(ConnId to, proto::Message m);
    static proto::StateRow state_row(const JobRecord& r);

    Config cfg_;
    LedgerSink& ledger_;
    Registry registry_;
    PendingQueue queue_;
    std::map<JobId, JobRecord> jobs_;
    JobIdCounter ids_;
    std::uint64_t next_seq_ = 0;
    std::map<NodeId, ConnId> agent_conn_;
    std::map<ConnId, NodeId> conn_agent_;
    DecisionObserver observer_;
};

}  // namespace hepinfo
