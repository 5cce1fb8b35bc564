// hepmaster: the master daemon. Owns the node registry, job queue and
// ledger; dispatches queued jobs to the most available worker.

#include <CLI11.hpp>
#include <csignal>
#include <spdlog/spdlog.h>

#include "hepinfo/ledger.hpp"
#include "hepinfo/master.hpp"
#include "hepinfo/master_server.hpp"
#include "hepinfo/net.hpp"

namespace {
hepinfo::MasterServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
    using namespace hepinfo;

    Config cfg;
    std::string listen = "0.0.0.0:" + std::to_string(cfg.listen_port);
    std::string ledger_path;
    bool verbose = false;

    CLI::App app{"hepmaster - cluster master daemon"};
    app.add_option("--listen", listen, "address to listen on, HOST:PORT")->capture_default_str();
    app.add_option("--ledger", ledger_path, "append-only job ledger")->required();
    app.add_option("--heartbeat-ms", cfg.heartbeat_interval_ms, "expected heartbeat interval")
        ->capture_default_str();
    app.add_option("--stale-ms", cfg.stale_after_ms, "heartbeat age after which a node is ineligible")
        ->capture_default_str();
    app.add_option("--penalty", cfg.dispatch_penalty_milli, "score penalty per un-heartbeated dispatch")
        ->capture_default_str();
    app.add_flag("-v,--verbose", verbose);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (verbose) spdlog::set_level(spdlog::level::debug);

    auto addr = net::parse_host_port(listen);
    if (!addr) {
        spdlog::error("bad --listen address '{}'", listen);
        return 2;
    }
    cfg.listen_port = addr->port;
    if (auto problem = validate_config(cfg)) {
        spdlog::error("{}", *problem);
        return 2;
    }

    auto recovered = recover(ledger_path);
    if (!recovered) {
        spdlog::error("ledger {} is corrupt at line {}", ledger_path, recovered.error().line_no);
        return 1;
    }

    try {
        FileLedger ledger(ledger_path, true);
        SystemClock clock;
        const EpochMs now = clock.now();
        for (JobId id : recovered->lost_on_recovery) {
            const auto& job = recovered->jobs.at(id);
            ledger.append(LedgerEvent{now, id, ledger::Lost{*job.assigned}});
        }
        spdlog::info("recovered {} jobs ({} lost) from {}", recovered->jobs.size(),
                     recovered->lost_on_recovery.size(), ledger_path);

        Master master(cfg, ledger, std::move(*recovered));

        auto listener = net::listen_tcp(*addr);
        if (!listener) {
            spdlog::error("cannot listen on {}: {}", listen, listener.error());
            return 1;
        }
        MasterServer server(master, clock, std::move(*listener));
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::signal(SIGPIPE, SIG_IGN);

        spdlog::info("hepmaster listening on {}:{}", addr->host, server.port());
        server.run();
        g_server = nullptr;
        spdlog::info("hepmaster stopped");
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
