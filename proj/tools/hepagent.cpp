// hepagent: the worker daemon. Reports load and free memory to the master
// and runs dispatched jobs in the shared workspace.

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <spdlog/spdlog.h>

#include "hepinfo/agent.hpp"
#include "hepinfo/net.hpp"

namespace {
hepinfo::agent::Agent* g_agent = nullptr;

void on_signal(int) {
    if (g_agent) g_agent->stop();
}
}  // namespace

int main(int argc, char** argv) {
    using namespace hepinfo;

    std::string master;
    std::string node_id;
    std::string workroot = Config{}.workspace_root;
    std::string ip;
    std::int64_t heartbeat_ms = Config{}.heartbeat_interval_ms;

    CLI::App app{"hepagent - cluster worker daemon"};
    app.add_option("--master", master, "master address HOST:PORT (default $HEP_MASTER_ADDR)");
    app.add_option("--node-id", node_id, "this worker's node id")->required();
    app.add_option("--workroot", workroot, "shared workspace root")->capture_default_str();
    app.add_option("--ip", ip, "address to advertise (default: local socket address)");
    app.add_option("--heartbeat-ms", heartbeat_ms, "heartbeat interval")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (master.empty()) {
        if (const char* env = std::getenv("HEP_MASTER_ADDR")) master = env;
    }
    auto addr = net::parse_host_port(master);
    if (!addr) {
        spdlog::error("need --master HOST:PORT or HEP_MASTER_ADDR");
        return 2;
    }
    if (!is_token(node_id)) {
        spdlog::error("invalid node id '{}'", node_id);
        return 2;
    }
    if (!ip.empty() && !is_dotted_quad(ip)) {
        spdlog::error("invalid --ip '{}'", ip);
        return 2;
    }
    if (heartbeat_ms <= 0) {
        spdlog::error("--heartbeat-ms must be positive");
        return 2;
    }

    agent::AgentOptions opts;
    opts.master = *addr;
    opts.node_id = node_id;
    opts.workroot = workroot;
    if (!ip.empty()) opts.advertise_ip = ip;
    opts.heartbeat_interval_ms = heartbeat_ms;

    agent::ProcProbe probe;
    SystemClock clock;
    agent::Agent a(opts, probe, clock);
    g_agent = &a;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);

    spdlog::info("hepagent {} starting; master {}, workroot {}", node_id, addr->str(), workroot);
    a.run();
    g_agent = nullptr;
    return 0;
}
