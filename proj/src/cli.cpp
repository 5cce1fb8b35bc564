#include "hepinfo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>

#include "hepinfo/net.hpp"

namespace hepinfo::cli {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string state_line(const proto::StateRow& s) {
    std::string out = std::to_string(s.job_id);
    out += ' ';
    out += to_string(s.state);
    out += ' ';
    out += s.node ? s.node->str() : "-";
    out += ' ' + std::to_string(s.submit_ts) + ' ';
    out += s.exit_code ? std::to_string(*s.exit_code) : "-";
    out += '\n';
    return out;
}

std::string node_table(const std::vector<proto::NodeRow>& rows) {
    constexpr std::size_t kCols = 7;
    std::vector<std::array<std::string, kCols>> cells;
    cells.push_back({"NODE", "IP", "ACR", "AMR", "RUN", "AGE", "ELIG"});
    for (const auto& r : rows) {
        cells.push_back({r.node.str(), r.ip, std::to_string(r.acr_milli), std::to_string(r.amr_bytes),
                         std::to_string(r.running_jobs), std::to_string(r.age_ms),
                         r.eligible ? "yes" : "no"});
    }
    std::array<std::size_t, kCols> width{};
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < kCols; ++i) width[i] = std::max(width[i], row[i].size());
    }
    std::string out;
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < kCols; ++i) {
            out += row[i];
            if (i + 1 < kCols) out += std::string(width[i] - row[i].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

Rendered protocol_failure(const std::string& what) {
    return Rendered{kExitConnection, "", "hepctl: " + what + "\n"};
}

}  // namespace

std::string usage() {
    return "usage: hepctl [--master HOST:PORT] <command>\n"
           "  submit [--user U] [--workdir D] -- <command...>\n"
           "  status <job_id>\n"
           "  nodes\n"
           "  jobs\n"
           "The master address defaults to $HEP_MASTER_ADDR, then 127.0.0.1:7070.\n";
}

Expected<Invocation, UsageError> parse_args(std::span<const std::string> args,
                                            const Environment& env) {
    CLI::App app{"hepctl"};
    app.set_help_flag("-h,--help");
    app.require_subcommand(1);
    app.fallthrough();

    std::string master;
    app.add_option("--master", master, "master address HOST:PORT");

    std::string user = env.user;
    std::string workdir = env.cwd;
    std::vector<std::string> command;
    auto* submit = app.add_subcommand("submit", "queue a job");
    submit->add_option("--user", user);
    submit->add_option("--workdir", workdir);
    submit->add_option("command", command)->required();

    std::uint64_t job_id = 0;
    auto* status = app.add_subcommand("status", "show one job");
    status->add_option("job_id", job_id)->required();

    auto* nodes = app.add_subcommand("nodes", "list worker nodes");
    auto* jobs = app.add_subcommand("jobs", "list all jobs");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        return Unexpected{UsageError{"", true}};
    } catch (const CLI::ParseError& e) {
        return Unexpected{UsageError{e.what()}};
    }

    Invocation inv;
    if (!master.empty()) {
        inv.master = master;
    } else {
        inv.master = env.master_addr.value_or(kDefaultMaster);
    }
    if (!net::parse_host_port(inv.master)) {
        return Unexpected{UsageError{"bad master address '" + inv.master + "'"}};
    }

    if (submit->parsed()) {
        std::string joined;
        for (const auto& part : command) {
            if (!joined.empty()) joined += ' ';
            joined += part;
        }
        JobSpec spec{user, workdir, joined};
        if (!is_token(spec.user)) return Unexpected{UsageError{"invalid user '" + user + "'"}};
        if (!is_valid_workdir(spec.workdir))
            return Unexpected{UsageError{"workdir must be an absolute path without spaces"}};
        if (!is_valid_free_text(spec.command)) return Unexpected{UsageError{"empty or invalid command"}};
        inv.command = SubmitCmd{std::move(spec)};
    } else if (status->parsed()) {
        if (job_id == 0) return Unexpected{UsageError{"job ids start at 1"}};
        inv.command = StatusCmd{job_id};
    } else if (nodes->parsed()) {
        inv.command = NodesCmd{};
    } else if (jobs->parsed()) {
        inv.command = JobsCmd{};
    } else {
        return Unexpected{UsageError{"missing command"}};
    }
    return inv;
}

proto::Message to_request(const CliCommand& cmd) {
    return std::visit(overloaded{
                          [](const SubmitCmd& s) -> proto::Message { return proto::Submit{s.spec}; },
                          [](const StatusCmd& s) -> proto::Message { return proto::StatusQuery{s.job_id}; },
                          [](const NodesCmd&) -> proto::Message { return proto::NodesQuery{}; },
                          [](const JobsCmd&) -> proto::Message { return proto::JobsQuery{}; },
                      },
                      cmd);
}

bool is_final_reply(const CliCommand& cmd, const proto::Message& reply) {
    if (std::holds_alternative<proto::Err>(reply)) return true;
    return std::visit(overloaded{
                          [&](const SubmitCmd&) { return std::holds_alternative<proto::JobIdReply>(reply); },
                          [&](const StatusCmd&) { return std::holds_alternative<proto::StateRow>(reply); },
                          [&](const NodesCmd&) { return std::holds_alternative<proto::Ok>(reply); },
                          [&](const JobsCmd&) { return std::holds_alternative<proto::Ok>(reply); },
                      },
                      cmd);
}

Rendered render(const CliCommand& cmd, const std::vector<proto::Message>& replies) {
    if (replies.empty() || !is_final_reply(cmd, replies.back())) {
        return protocol_failure("incomplete reply from master");
    }
    if (auto* e = std::get_if<proto::Err>(&replies.back())) {
        std::string line = proto::encode(*e);
        return Rendered{kExitErrReply, "", line};
    }

    Rendered r;
    if (std::holds_alternative<SubmitCmd>(cmd)) {
        r.out = "job " + std::to_string(std::get<proto::JobIdReply>(replies.back()).job_id) + " submitted\n";
    } else if (std::holds_alternative<StatusCmd>(cmd)) {
        r.out = state_line(std::get<proto::StateRow>(replies.back()));
    } else if (std::holds_alternative<NodesCmd>(cmd)) {
        std::vector<proto::NodeRow> rows;
        for (std::size_t i = 0; i + 1 < replies.size(); ++i) {
            auto* row = std::get_if<proto::NodeRow>(&replies[i]);
            if (!row) return protocol_failure("unexpected reply to NODES");
            rows.push_back(*row);
        }
        r.out = node_table(rows);
    } else {
        for (std::size_t i = 0; i + 1 < replies.size(); ++i) {
            auto* row = std::get_if<proto::StateRow>(&replies[i]);
            if (!row) return protocol_failure("unexpected reply to JOBS");
            r.out += state_line(*row);
        }
    }
    return r;
}

Rendered execute(const Invocation& inv) {
    auto addr = net::parse_host_port(inv.master);
    if (!addr) return Rendered{kExitUsage, "", "hepctl: bad master address\n" + usage()};
    auto fd = net::connect_tcp(*addr);
    if (!fd) return protocol_failure("cannot connect to " + inv.master + ": " + fd.error());
    if (!net::send_all(fd->get(), proto::encode(to_request(inv.command)))) {
        return protocol_failure("send to " + inv.master + " failed");
    }

    net::LineReader lines(fd->get());
    std::vector<proto::Message> replies;
    while (replies.empty() || !is_final_reply(inv.command, replies.back())) {
        auto line = lines.next(std::chrono::milliseconds{10000});
        if (!line) return protocol_failure("connection to " + inv.master + " closed early");
        auto m = proto::decode(*line);
        if (!m) return protocol_failure("malformed reply: " + proto::describe(m.error()));
        replies.push_back(std::move(*m));
    }
    return render(inv.command, replies);
}

}  // namespace hepinfo::cli
