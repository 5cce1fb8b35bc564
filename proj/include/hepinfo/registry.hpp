#pragma once

#include <map>
#include <optional>
#include <vector>

#include "hepinfo/core.hpp"
#include "hepinfo/expected.hpp"
#include "hepinfo/protocol.hpp"

namespace hepinfo {

struct NodeRecord {
    NodeStatic info;
    ResourceSnapshot last;
    EpochMs last_heartbeat_at = 0;
    std::uint32_t in_flight = 0;  // dispatches since the last heartbeat

    NodeId id() const { return *NodeId::parse(info.id); }

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

enum class RegistryError { UnknownNode };

/// The master's table of worker nodes, keyed and ordered by node id.
///
/// A node is eligible for dispatch while its heartbeat age is at most
/// Config::stale_after_ms (inclusive). Freshly registered nodes start with
/// a zero snapshot and count as heartbeated at registration time.
/// Single writer; callers serialize access.
class Registry {
public:
    /// s must already satisfy validate_node_static.
    void register_node(const NodeStatic& s, EpochMs now);

    Status<RegistryError> heartbeat(const NodeId& id, const ResourceSnapshot& snap, EpochMs now);

    Status<RegistryError> note_dispatch(const NodeId& id);

    std::vector<NodeRecord> eligible(EpochMs now, const Config& cfg) const;

    std::vector<proto::NodeRow> table_rows(EpochMs now, const Config& cfg) const;

    const NodeRecord* find(const NodeId& id) const;
    bool contains(const NodeId& id) const { return find(id) != nullptr; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }

    static bool is_fresh(const NodeRecord& r, EpochMs now, const Config& cfg) noexcept;

private:
    std::map<NodeId, NodeRecord> nodes_;
};

}  // namespace hepinfo
