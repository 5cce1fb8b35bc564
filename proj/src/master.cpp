#include "hepinfo/master.hpp"

#include <spdlog/spdlog.h>

#include <cassert>

namespace hepinfo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

proto::Message err(std::string code, std::string text) {
    return proto::Err{std::move(code), std::move(text)};
}

// Callers only request edges they have already checked.
void move_to(JobRecord& job, JobState to) {
    auto next = job_transition(std::move(job), to);
    assert(next.has_value());
    job = std::move(*next);
}

}  // namespace

Master::Master(Config cfg, LedgerSink& ledger) : cfg_(std::move(cfg)), ledger_(ledger) {}

Master::Master(Config cfg, LedgerSink& ledger, RecoveredState recovered)
    : cfg_(std::move(cfg)),
      ledger_(ledger),
      jobs_(std::move(recovered.jobs)),
      ids_(recovered.max_job_id),
      next_seq_(recovered.max_seq) {
    for (const auto& [id, r] : jobs_) {
        if (r.state == JobState::Queued) queue_.push(r);
    }
}

std::vector<Outbound> Master::reply(ConnId to, proto::Message m) {
    std::vector<Outbound> out;
    out.push_back(Outbound{to, std::move(m)});
    return out;
}

proto::StateRow Master::state_row(const JobRecord& r) {
    return proto::StateRow{r.job_id, r.state, r.assigned, r.submit_ts, r.exit_code};
}

std::optional<ConnId> Master::connection_of(const NodeId& id) const {
    auto it = agent_conn_.find(id);
    if (it == agent_conn_.end()) return std::nullopt;
    return it->second;
}

std::vector<Outbound> Master::on_message(ConnId origin, const proto::Message& m, EpochMs now) {
    return std::visit(
        overloaded{
            [&](const proto::Register& r) -> std::vector<Outbound> {
                if (!validate_node_static(r.node)) {
                    return reply(origin, err("bad-request", "invalid node description"));
                }
                NodeId id = *NodeId::parse(r.node.id);
                registry_.register_node(r.node, now);
                if (auto old = agent_conn_.find(id); old != agent_conn_.end()) {
                    conn_agent_.erase(old->second);
                }
                if (auto prev = conn_agent_.find(origin); prev != conn_agent_.end()) {
                    agent_conn_.erase(prev->second);
                }
                agent_conn_.insert_or_assign(id, origin);
                conn_agent_.insert_or_assign(origin, id);
                spdlog::debug("node {} registered from {}", id.str(), r.node.ip);
                return reply(origin, proto::Ok{});
            },
            [&](const proto::Heartbeat& h) -> std::vector<Outbound> {
                ResourceSnapshot snap{h.acr_milli, h.amr_bytes, h.running_jobs, now};
                if (!is_valid_acr(h.acr_milli)) {
                    return reply(origin, err("bad-request", "acr out of range"));
                }
                if (!registry_.heartbeat(h.node, snap, now)) {
                    return reply(origin,
                                 err("unknown-node", "node " + h.node.str() + " is not registered"));
                }
                return reply(origin, proto::Ok{});
            },
            [&](const proto::JobDone& d) -> std::vector<Outbound> {
                auto it = jobs_.find(d.job_id);
                if (it == jobs_.end()) {
                    return reply(origin, err("unknown-job", "no job " + std::to_string(d.job_id)));
                }
                JobRecord& job = it->second;
                if (job.state != JobState::Dispatched || job.assigned != d.node || d.exit_code < 0) {
                    return reply(origin, err("bad-request", "job " + std::to_string(d.job_id) +
                                                                " is not running on " +
                                                                d.node.str()));
                }
                ledger_.append(LedgerEvent{now, d.job_id, ledger::Finished{d.exit_code}});
                move_to(job, d.exit_code == 0 ? JobState::Done : JobState::Failed);
                job.exit_code = d.exit_code;
                return reply(origin, proto::Ok{});
            },
            [&](const proto::Submit& s) -> std::vector<Outbound> {
                if (!is_valid_job_spec(s.spec)) {
                    return reply(origin, err("bad-request", "invalid job"));
                }
                JobRecord r;
                r.job_id = ids_.next();
                r.spec = s.spec;
                r.submit_ts = now;
                r.seq = ++next_seq_;
                ledger_.append(LedgerEvent{now, r.job_id, ledger::Submitted{r.spec}});
                queue_.push(r);
                const JobId id = r.job_id;
                jobs_.emplace(id, std::move(r));
                return reply(origin, proto::JobIdReply{id});
            },
            [&](const proto::StatusQuery& q) -> std::vector<Outbound> {
                auto it = jobs_.find(q.job_id);
                if (it == jobs_.end()) {
                    return reply(origin, err("unknown-job", "no job " + std::to_string(q.job_id)));
                }
                return reply(origin, state_row(it->second));
            },
            [&](const proto::NodesQuery&) -> std::vector<Outbound> {
                std::vector<Outbound> out;
                for (auto& row : registry_.table_rows(now, cfg_)) {
                    out.push_back(Outbound{origin, std::move(row)});
                }
                out.push_back(Outbound{origin, proto::Ok{}});
                return out;
            },
            [&](const proto::JobsQuery&) -> std::vector<Outbound> {
                std::vector<Outbound> out;
                for (const auto& [id, r] : jobs_) out.push_back(Outbound{origin, state_row(r)});
                out.push_back(Outbound{origin, proto::Ok{}});
                return out;
            },
            [&](const auto& other) -> std::vector<Outbound> {
                return reply(origin, err("bad-request", std::string(proto::keyword(other)) +
                                                            " is not a request"));
            },
        },
        m);
}

std::vector<Outbound> Master::handle(ConnId origin, const proto::Message& m, EpochMs now) {
    auto out = on_message(origin, m, now);
    if (std::holds_alternative<proto::Submit>(m) || std::holds_alternative<proto::Heartbeat>(m)) {
        auto sends = tick(now);
        out.insert(out.end(), std::make_move_iterator(sends.begin()),
                   std::make_move_iterator(sends.end()));
    }
    return out;
}

std::vector<Outbound> Master::handle_line(ConnId origin, std::string_view line, EpochMs now) {
    auto m = proto::decode(line);
    if (!m) return reply(origin, err("bad-request", proto::describe(m.error())));
    return handle(origin, *m, now);
}

std::vector<Outbound> Master::tick(EpochMs now) {
    std::vector<Outbound> out;
    for (const DispatchDecision& d : drain(queue_, registry_, now, cfg_, observer_)) {
        JobRecord& job = jobs_.at(d.job_id);
        auto conn = connection_of(d.node);
        if (!conn) {
            ledger_.append(LedgerEvent{now, d.job_id, ledger::Failed{"unreachable"}});
            move_to(job, JobState::Failed);
            spdlog::debug("job {} failed: node {} has no connection", d.job_id, d.node.str());
            continue;
        }
        ledger_.append(LedgerEvent{now, d.job_id, ledger::Assigned{d.node}});
        move_to(job, JobState::Dispatched);
        job.assigned = d.node;
        out.push_back(Outbound{*conn, proto::Dispatch{d.job_id, job.spec}});
    }
    return out;
}

void Master::on_disconnect(ConnId conn, EpochMs now) {
    auto it = conn_agent_.find(conn);
    if (it == conn_agent_.end()) return;
    NodeId id = it->second;
    on_agent_disconnect(id, now);
}

void Master::on_agent_disconnect(const NodeId& id, EpochMs now) {
    if (auto it = agent_conn_.find(id); it != agent_conn_.end()) {
        conn_agent_.erase(it->second);
        agent_conn_.erase(it);
    }
    for (auto& [job_id, job] : jobs_) {
        if (job.state == JobState::Dispatched && job.assigned == id) {
            ledger_.append(LedgerEvent{now, job_id, ledger::Lost{id}});
            move_to(job, JobState::Lost);
        }
    }
    spdlog::debug("node {} disconnected", id.str());
}

}  // namespace hepinfo
