#include "hepinfo/simharness.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "hepinfo/master.hpp"

namespace hepinfo::sim {

namespace {

std::optional<std::int64_t> parse_nonneg(std::string_view s) {
    if (s.empty() || (s.size() > 1 && s[0] == '0')) return std::nullopt;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    if (s.empty() || (s.size() > 1 && s[0] == '0')) return std::nullopt;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view s, std::size_t max_fields) {
    std::vector<std::string_view> out;
    while (out.size() + 1 < max_fields) {
        std::size_t sp = s.find(' ');
        if (sp == std::string_view::npos) break;
        out.push_back(s.substr(0, sp));
        s.remove_prefix(sp + 1);
    }
    out.push_back(s);
    return out;
}

enum class EventKind { Heartbeat, Arrival, Tick, Completion };

struct Event {
    EpochMs at;
    std::uint64_t order;  // insertion order breaks timestamp ties
    EventKind kind;
    std::size_t node = 0;
    std::size_t index = 0;  // trace point or arrival index
    JobId job = 0;

    bool operator>(const Event& o) const {
        return at != o.at ? at > o.at : order > o.order;
    }
};

constexpr ConnId kClientConn = 0;

ConnId node_conn(std::size_t i) { return i + 1; }

}  // namespace

std::optional<InvalidScenario> validate(const Scenario& s) {
    if (auto e = validate_config(s.cfg)) return InvalidScenario{0, *e};
    if (s.horizon_ms <= 0) return InvalidScenario{0, "horizon must be positive"};
    std::set<std::string> ids;
    for (const auto& n : s.nodes) {
        if (auto st = validate_node_static(n.info); !st) {
            return InvalidScenario{0, "node '" + n.info.id + "': " + std::string(to_string(st.error()))};
        }
        if (!ids.insert(n.info.id).second) {
            return InvalidScenario{0, "duplicate node " + n.info.id};
        }
        EpochMs prev = 0;
        for (const auto& p : n.trace) {
            if (p.at < prev) return InvalidScenario{0, "trace of " + n.info.id + " is not sorted"};
            if (p.at >= s.horizon_ms) return InvalidScenario{0, "trace point beyond horizon"};
            if (!is_valid_acr(p.snapshot.acr_milli)) return InvalidScenario{0, "acr out of range"};
            prev = p.at;
        }
    }
    EpochMs prev = 0;
    for (const auto& a : s.arrivals) {
        if (a.at < prev) return InvalidScenario{0, "arrivals are not sorted"};
        if (a.at >= s.horizon_ms) return InvalidScenario{0, "arrival beyond horizon"};
        if (!is_valid_job_spec(a.spec)) return InvalidScenario{0, "invalid job"};
        if (a.service_time_ms < 0) return InvalidScenario{0, "negative service time"};
        prev = a.at;
    }
    return std::nullopt;
}

Expected<Scenario, InvalidScenario> parse_scenario(std::string_view text) {
    Scenario s;
    bool have_horizon = false;
    std::size_t line_no = 0;
    auto fail = [&](std::string msg) { return Unexpected{InvalidScenario{line_no, std::move(msg)}}; };

    while (!text.empty()) {
        ++line_no;
        std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (line.empty() || line.front() == '#') continue;

        std::string_view kw = line.substr(0, line.find(' '));
        if (kw == "NODE") {
            auto f = split(line, 5);
            if (f.size() != 5 || f[4].find(' ') != std::string_view::npos) return fail("NODE needs 4 fields");
            auto cores = parse_nonneg(f[3]);
            auto mem = parse_u64(f[4]);
            if (!cores || !mem) return fail("bad NODE number");
            NodeStatic info{std::string(f[1]), std::string(f[2]), *cores, *mem};
            if (auto st = validate_node_static(info); !st) return fail(std::string(to_string(st.error())));
            s.nodes.push_back(SimNode{std::move(info), {}});
        } else if (kw == "TRACE") {
            auto f = split(line, 5);
            if (f.size() != 5 || f[4].find(' ') != std::string_view::npos) return fail("TRACE needs 4 fields");
            auto it = std::find_if(s.nodes.begin(), s.nodes.end(),
                                   [&](const SimNode& n) { return n.info.id == f[1]; });
            if (it == s.nodes.end()) return fail("TRACE for undeclared node");
            auto at = parse_nonneg(f[2]);
            auto acr = parse_nonneg(f[3]);
            auto amr = parse_u64(f[4]);
            if (!at || !acr || !amr || !is_valid_acr(*acr)) return fail("bad TRACE field");
            it->trace.push_back(TracePoint{*at, ResourceSnapshot{static_cast<std::int32_t>(*acr), *amr, 0, *at}});
        } else if (kw == "JOB") {
            auto f = split(line, 6);
            if (f.size() != 6) return fail("JOB needs 5 fields");
            auto at = parse_nonneg(f[1]);
            auto service = parse_nonneg(f[4]);
            if (!at || !service) return fail("bad JOB number");
            JobSpec spec{std::string(f[2]), std::string(f[3]), std::string(f[5])};
            if (!is_valid_job_spec(spec)) return fail("bad JOB spec");
            s.arrivals.push_back(Arrival{*at, std::move(spec), *service});
        } else if (kw == "HORIZON") {
            auto f = split(line, 2);
            if (f.size() != 2) return fail("HORIZON needs 1 field");
            auto h = parse_nonneg(f[1]);
            if (!h) return fail("bad HORIZON");
            s.horizon_ms = *h;
            have_horizon = true;
        } else {
            return fail("unknown record '" + std::string(kw) + "'");
        }
    }
    line_no = 0;
    if (!have_horizon) return fail("missing HORIZON");
    if (auto e = validate(s)) return Unexpected{*e};
    return s;
}

Expected<Scenario, InvalidScenario> load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return Unexpected{InvalidScenario{0, "cannot read " + path.string()}};
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

Expected<DispatchLog, InvalidScenario> run(const Scenario& s, const Hooks& hooks) {
    if (auto e = validate(s)) return Unexpected{*e};

    MemoryLedger scratch;
    Master master(s.cfg, hooks.ledger ? *hooks.ledger : static_cast<LedgerSink&>(scratch));
    if (hooks.on_decision) master.set_decision_observer(hooks.on_decision);

    DispatchLog log;
    std::vector<NodeId> ids;
    std::map<ConnId, std::size_t> conn_node;
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        ids.push_back(*NodeId::parse(s.nodes[i].info.id));
        conn_node.emplace(node_conn(i), i);
        master.handle(node_conn(i), proto::Register{s.nodes[i].info}, 0);
    }
    log.nodes = ids;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::uint64_t order = 0;
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        for (std::size_t k = 0; k < s.nodes[i].trace.size(); ++k) {
            events.push(Event{s.nodes[i].trace[k].at, order++, EventKind::Heartbeat, i, k, 0});
        }
    }
    for (std::size_t k = 0; k < s.arrivals.size(); ++k) {
        events.push(Event{s.arrivals[k].at, order++, EventKind::Arrival, 0, k, 0});
    }
    for (EpochMs t = 0; t < s.horizon_ms; t += s.cfg.heartbeat_interval_ms) {
        events.push(Event{t, order++, EventKind::Tick, 0, 0, 0});
    }

    std::vector<std::uint32_t> in_service(s.nodes.size(), 0);
    std::map<JobId, std::int64_t> service_of;

    auto absorb = [&](std::vector<Outbound> out, EpochMs now, std::optional<std::size_t> arrival) {
        for (auto& o : out) {
            if (auto* j = std::get_if<proto::JobIdReply>(&o.msg); j && arrival) {
                service_of[j->job_id] = s.arrivals[*arrival].service_time_ms;
            } else if (auto* d = std::get_if<proto::Dispatch>(&o.msg)) {
                const std::size_t n = conn_node.at(o.to);
                log.entries.push_back(DispatchEntry{now, d->job_id, ids[n]});
                ++in_service[n];
                events.push(Event{now + service_of.at(d->job_id), order++, EventKind::Completion, n, 0,
                                  d->job_id});
            }
        }
    };

    while (!events.empty()) {
        Event ev = events.top();
        events.pop();
        if (ev.at >= s.horizon_ms) break;
        switch (ev.kind) {
            case EventKind::Heartbeat: {
                const auto& snap = s.nodes[ev.node].trace[ev.index].snapshot;
                proto::Heartbeat hb{ids[ev.node], snap.acr_milli, snap.amr_bytes, in_service[ev.node]};
                absorb(master.handle(node_conn(ev.node), hb, ev.at), ev.at, std::nullopt);
                break;
            }
            case EventKind::Arrival:
                absorb(master.handle(kClientConn, proto::Submit{s.arrivals[ev.index].spec}, ev.at),
                       ev.at, ev.index);
                break;
            case EventKind::Tick:
                absorb(master.tick(ev.at), ev.at, std::nullopt);
                break;
            case EventKind::Completion:
                --in_service[ev.node];
                absorb(master.handle(node_conn(ev.node), proto::JobDone{ids[ev.node], ev.job, 0}, ev.at),
                       ev.at, std::nullopt);
                break;
        }
    }

    log.jobs = master.jobs();
    return log;
}

BalanceReport balance_report(const DispatchLog& log) {
    BalanceReport r;
    for (const auto& id : log.nodes) r.counts.emplace(id, 0);
    for (const auto& e : log.entries) ++r.counts[e.node];
    if (!r.counts.empty()) {
        auto [lo, hi] = std::minmax_element(r.counts.begin(), r.counts.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
        r.spread = hi->second - lo->second;
    }
    return r;
}

std::string render(const DispatchLog& log, const BalanceReport& report) {
    std::string out;
    for (const auto& e : log.entries) {
        out += std::to_string(e.at) + ' ' + std::to_string(e.job_id) + ' ' + e.node.str() + '\n';
    }
    for (const auto& [id, n] : report.counts) {
        out += "BALANCE " + id.str() + ' ' + std::to_string(n) + '\n';
    }
    out += "SPREAD " + std::to_string(report.spread) + '\n';
    return out;
}

}  // namespace hepinfo::sim
