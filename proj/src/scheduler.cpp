#include "hepinfo/scheduler.hpp"

#include <algorithm>

namespace hepinfo {

namespace {
__extension__ typedef unsigned __int128 u128;
__extension__ typedef __int128 i128;
}  // namespace

std::int32_t score(const NodeRecord& r) noexcept {
    const std::uint64_t total = std::max<std::uint64_t>(r.info.total_mem_bytes, 1);
    const std::uint64_t amr = std::min(r.last.amr_bytes, total);
    const auto amr_frac = static_cast<std::int64_t>(u128{amr} * 1000 / total);
    const std::int64_t acr = std::clamp<std::int64_t>(r.last.acr_milli, 0, kMaxAcrMilli);
    return static_cast<std::int32_t>((acr + amr_frac) / 2);
}

std::int64_t effective_score(const NodeRecord& r, const Config& cfg) noexcept {
    const i128 penalty = i128{cfg.dispatch_penalty_milli} * r.in_flight;
    const i128 eff = i128{score(r)} - penalty;
    return eff > 0 ? static_cast<std::int64_t>(eff) : 0;
}

std::optional<NodeId> select_node(std::span<const NodeRecord> candidates, const Config& cfg) {
    const NodeRecord* best = nullptr;
    std::int64_t best_score = 0;
    for (const NodeRecord& c : candidates) {
        const std::int64_t s = effective_score(c, cfg);
        if (best == nullptr || s > best_score ||
            (s == best_score && (c.last.running_jobs < best->last.running_jobs ||
                                 (c.last.running_jobs == best->last.running_jobs &&
                                  c.info.id < best->info.id)))) {
            best = &c;
            best_score = s;
        }
    }
    if (best == nullptr) return std::nullopt;
    return best->id();
}

std::vector<DispatchDecision> drain(PendingQueue& queue, Registry& registry, EpochMs now,
                                    const Config& cfg, const DecisionObserver& observer) {
    std::vector<DispatchDecision> out;
    while (!queue.empty()) {
        const auto candidates = registry.eligible(now, cfg);
        auto node = select_node(candidates, cfg);
        if (!node) break;
        if (observer) observer(candidates, *node);
        out.push_back(DispatchDecision{queue.front().job_id, *node, now});
        queue.pop_front();
        registry.note_dispatch(*node);
    }
    return out;
}

}  // namespace hepinfo
