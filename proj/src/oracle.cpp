#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>

#include "hepinfo/simharness.hpp"

namespace hepinfo::sim {

namespace {

using Big = boost::multiprecision::cpp_int;

struct Ranked {
    Big score;
    std::uint32_t running;
    std::string id;
};

Big exact_effective(const NodeRecord& r, const Config& cfg) {
    Big total = r.info.total_mem_bytes;
    Big amr = r.last.amr_bytes;
    if (amr > total) amr = total;
    Big amr_frac = (amr * 1000) / total;  // non-negative, so division floors
    Big base = (Big(r.last.acr_milli) + amr_frac) / 2;
    Big eff = base - Big(cfg.dispatch_penalty_milli) * Big(r.in_flight);
    return eff < 0 ? Big(0) : eff;
}

}  // namespace

std::optional<NodeId> oracle_select(std::span<const NodeRecord> candidates, const Config& cfg) {
    if (candidates.empty()) return std::nullopt;
    std::vector<Ranked> all;
    all.reserve(candidates.size());
    for (const auto& c : candidates) {
        all.push_back(Ranked{exact_effective(c, cfg), c.last.running_jobs, c.info.id});
    }
    std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.running != b.running) return a.running < b.running;
        return a.id < b.id;
    });
    return NodeId::parse(all.front().id);
}

}  // namespace hepinfo::sim
