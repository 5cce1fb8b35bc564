#include <doctest.h>

#include <unistd.h>

#include <thread>

#include "hepinfo/agent.hpp"
#include "hepinfo/cli.hpp"
#include "hepinfo/master_server.hpp"

using namespace hepinfo;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

// Master server plus agents in this process, talking over loopback.
struct Cluster {
    fs::path root;
    MemoryLedger ledger;
    SystemClock clock;
    Config cfg;
    std::unique_ptr<Master> master;
    std::unique_ptr<MasterServer> server;
    std::thread server_thread;
    agent::FixedProbe probe{agent::ProbeReading{4, 0, 8ull << 30, 8ull << 30}};
    std::vector<std::unique_ptr<agent::Agent>> agents;
    std::vector<std::thread> agent_threads;

    Cluster() {
        root = fs::temp_directory_path() / ("hepinfo-live-" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root / "alice");
        cfg.heartbeat_interval_ms = 200;
        cfg.stale_after_ms = 600;
        master = std::make_unique<Master>(cfg, ledger);
        auto l = net::listen_tcp(net::HostPort{"127.0.0.1", 0});
        REQUIRE(l);
        server = std::make_unique<MasterServer>(*master, clock, std::move(*l));
        server_thread = std::thread([this] { server->run(); });
    }

    ~Cluster() {
        for (auto& a : agents) a->stop();
        for (auto& t : agent_threads) t.join();
        server->stop();
        server_thread.join();
        fs::remove_all(root);
    }

    std::string addr() const { return "127.0.0.1:" + std::to_string(server->port()); }

    void add_agent(const std::string& id) {
        agent::AgentOptions o;
        o.master = net::HostPort{"127.0.0.1", server->port()};
        o.node_id = id;
        o.workroot = root;
        o.heartbeat_interval_ms = cfg.heartbeat_interval_ms;
        agents.push_back(std::make_unique<agent::Agent>(o, probe, clock));
        agent_threads.emplace_back([a = agents.back().get()] { a->run(); });
    }

    cli::Rendered ctl(cli::CliCommand c) { return cli::execute(cli::Invocation{std::move(c), addr()}); }

    // Polls `status` until the job reaches `want` or the deadline passes.
    bool wait_state(JobId id, const std::string& want, std::chrono::seconds limit = 15s) {
        const auto deadline = std::chrono::steady_clock::now() + limit;
        while (std::chrono::steady_clock::now() < deadline) {
            auto r = ctl(cli::StatusCmd{id});
            if (r.exit_code == 0 && r.out.find(" " + want + " ") != std::string::npos) return true;
            std::this_thread::sleep_for(50ms);
        }
        return false;
    }

    bool wait_nodes(std::size_t n) {
        for (int i = 0; i < 200; ++i) {
            auto r = ctl(cli::NodesCmd{});
            if (static_cast<std::size_t>(std::count(r.out.begin(), r.out.end(), '\n')) == n + 1) return true;
            std::this_thread::sleep_for(25ms);
        }
        return false;
    }
};

}  // namespace

TEST_CASE("jobs run end to end over loopback") {
    Cluster c;
    for (const char* id : {"node01", "node02", "node03"}) c.add_agent(id);
    REQUIRE(c.wait_nodes(3));

    auto nodes = c.ctl(cli::NodesCmd{});
    CHECK(nodes.exit_code == 0);
    CHECK(nodes.out.rfind("NODE", 0) == 0);
    CHECK(nodes.out.find("node02") != std::string::npos);

    const std::string wd = (c.root / "alice").string();
    auto sub = c.ctl(cli::SubmitCmd{JobSpec{"alice", wd, "echo hi"}});
    CHECK(sub.exit_code == 0);
    CHECK(sub.out == "job 1 submitted\n");
    REQUIRE(c.wait_state(1, "DONE"));
    CHECK(fs::exists(c.root / "alice" / "1.out"));

    auto bad = c.ctl(cli::SubmitCmd{JobSpec{"alice", wd, "exit 5"}});
    CHECK(bad.out == "job 2 submitted\n");
    REQUIRE(c.wait_state(2, "FAILED"));
    CHECK(c.ctl(cli::StatusCmd{2}).out.find(" 5\n") != std::string::npos);

    auto escape = c.ctl(cli::SubmitCmd{JobSpec{"alice", "/etc", "true"}});
    REQUIRE(c.wait_state(3, "FAILED"));
    CHECK(c.ctl(cli::StatusCmd{3}).out.find(" 126\n") != std::string::npos);

    auto unknown = c.ctl(cli::StatusCmd{99});
    CHECK(unknown.exit_code == cli::kExitErrReply);
    CHECK(unknown.err.rfind("ERR unknown-job", 0) == 0);

    auto jobs = c.ctl(cli::JobsCmd{});
    CHECK(std::count(jobs.out.begin(), jobs.out.end(), '\n') == 3);
}

TEST_CASE("an agent that goes away loses its running job") {
    Cluster c;
    c.add_agent("node01");
    REQUIRE(c.wait_nodes(1));
    const std::string wd = (c.root / "alice").string();
    c.ctl(cli::SubmitCmd{JobSpec{"alice", wd, "sleep 30"}});
    REQUIRE(c.wait_state(1, "DISPATCHED"));

    c.agents[0]->stop();
    c.agent_threads[0].join();
    c.agents.clear();
    c.agent_threads.clear();
    CHECK(c.wait_state(1, "LOST", 5s));
}
