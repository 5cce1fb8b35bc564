#include "hepinfo/registry.hpp"

#include <algorithm>

namespace hepinfo {

void Registry::register_node(const NodeStatic& s, EpochMs now) {
    NodeRecord rec;
    rec.info = s;
    rec.last = ResourceSnapshot{0, 0, 0, now};
    rec.last_heartbeat_at = now;
    rec.in_flight = 0;
    nodes_.insert_or_assign(*NodeId::parse(s.id), std::move(rec));
}

Status<RegistryError> Registry::heartbeat(const NodeId& id, const ResourceSnapshot& snap,
                                          EpochMs now) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return Unexpected{RegistryError::UnknownNode};
    NodeRecord& rec = it->second;
    rec.last = snap;
    rec.last.acr_milli = std::clamp(snap.acr_milli, 0, kMaxAcrMilli);
    rec.last.amr_bytes = std::min(snap.amr_bytes, rec.info.total_mem_bytes);
    rec.last_heartbeat_at = now;
    rec.in_flight = 0;
    return {};
}

Status<RegistryError> Registry::note_dispatch(const NodeId& id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return Unexpected{RegistryError::UnknownNode};
    ++it->second.in_flight;
    return {};
}

bool Registry::is_fresh(const NodeRecord& r, EpochMs now, const Config& cfg) noexcept {
    return now - r.last_heartbeat_at <= cfg.stale_after_ms;
}

std::vector<NodeRecord> Registry::eligible(EpochMs now, const Config& cfg) const {
    std::vector<NodeRecord> out;
    for (const auto& [id, rec] : nodes_) {
        if (is_fresh(rec, now, cfg)) out.push_back(rec);
    }
    return out;
}

std::vector<proto::NodeRow> Registry::table_rows(EpochMs now, const Config& cfg) const {
    std::vector<proto::NodeRow> rows;
    rows.reserve(nodes_.size());
    for (const auto& [id, rec] : nodes_) {
        rows.push_back(proto::NodeRow{
            id,
            rec.info.ip,
            rec.last.acr_milli,
            rec.last.amr_bytes,
            rec.last.running_jobs,
            std::max<EpochMs>(0, now - rec.last_heartbeat_at),
            is_fresh(rec, now, cfg),
        });
    }
    return rows;
}

const NodeRecord* Registry::find(const NodeId& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

}  // namespace hepinfo
