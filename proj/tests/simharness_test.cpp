#include <doctest.h>

#include <unistd.h>

#include <fstream>

#include "hepinfo/simharness.hpp"
#include "support/generators.hpp"
#include "support/replay_oracle.hpp"

using namespace hepinfo;
using namespace hepinfo::sim;
using hepinfo::testing::Rng;

namespace {

constexpr std::uint64_t GiB = 1ull << 30;

NodeId nid(const std::string& s) { return *NodeId::parse(s); }

// Three identical 4-core / 8 GiB workers, idle, heartbeating every 2 s.
Scenario three_workers(std::size_t jobs, std::int64_t service_ms, EpochMs horizon = 10000) {
    Scenario s;
    s.horizon_ms = horizon;
    for (int i = 1; i <= 3; ++i) {
        SimNode n{NodeStatic{"node0" + std::to_string(i), "192.0.0." + std::to_string(i + 1), 4, 8 * GiB}, {}};
        for (EpochMs t = 0; t < horizon; t += 2000) {
            n.trace.push_back(TracePoint{t, ResourceSnapshot{1000, 8 * GiB, 0, t}});
        }
        s.nodes.push_back(n);
    }
    for (std::size_t j = 0; j < jobs; ++j) {
        s.arrivals.push_back(Arrival{0, JobSpec{"alice", "/Jugrid/alice", "root -b"}, service_ms});
    }
    return s;
}

// Last time `node` reported at or before `t`; registration at 0 counts.
EpochMs last_report(const SimNode& node, EpochMs t) {
    EpochMs last = 0;
    for (const auto& p : node.trace) {
        if (p.at <= t) last = std::max(last, p.at);
    }
    return last;
}

}  // namespace

TEST_CASE("run examples") {
    auto log = run(three_workers(6, 1000));
    REQUIRE(log);
    REQUIRE(log->entries.size() == 6);
    const char* cycle[] = {"node01", "node02", "node03", "node01", "node02", "node03"};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(log->entries[i].at == 0);
        CHECK(log->entries[i].job_id == i + 1);
        CHECK(log->entries[i].node == nid(cycle[i]));
    }
    for (const auto& [id, j] : log->jobs) CHECK(j.state == JobState::Done);

    MemoryLedger ledger;
    auto idle = run(three_workers(0, 1000), Hooks{&ledger, {}});
    REQUIRE(idle);
    CHECK(idle->entries.empty());
    CHECK(idle->jobs.empty());
    CHECK(ledger.lines().empty());

    Scenario silent;
    silent.horizon_ms = 20000;
    silent.nodes.push_back(SimNode{NodeStatic{"node01", "192.0.0.2", 4, 8 * GiB},
                                   {TracePoint{0, ResourceSnapshot{1000, 8 * GiB, 0, 0}}}});
    silent.arrivals.push_back(Arrival{7000, JobSpec{"alice", "/Jugrid/alice", "x"}, 100});
    auto stuck = run(silent);
    REQUIRE(stuck);
    CHECK(stuck->entries.empty());
    REQUIRE(stuck->jobs.size() == 1);
    CHECK(stuck->jobs.at(1).state == JobState::Queued);
}

TEST_CASE("oracle_select examples") {
    Config cfg;
    CHECK_FALSE(oracle_select({}, cfg));
    NodeRecord r;
    r.info = NodeStatic{"node05", "1.2.3.4", 1, 1};
    std::vector<NodeRecord> one{r};
    CHECK(oracle_select(one, cfg) == nid("node05"));
}

TEST_CASE("balance_report examples") {
    auto log = run(three_workers(6, 1000));
    REQUIRE(log);
    auto rep = balance_report(*log);
    CHECK(rep.counts == std::map<NodeId, std::size_t>{{nid("node01"), 2}, {nid("node02"), 2}, {nid("node03"), 2}});
    CHECK(rep.spread == 0);

    Scenario lopsided = three_workers(9, 100, 10000);
    lopsided.nodes[1].trace.clear();
    lopsided.nodes[2].trace.clear();
    for (auto& a : lopsided.arrivals) a.at = 8000;
    auto one = run(lopsided);
    REQUIRE(one);
    auto r1 = balance_report(*one);
    CHECK(r1.counts.at(nid("node01")) == 9);
    CHECK(r1.spread == 9);

    CHECK(balance_report(DispatchLog{}).counts.empty());
    CHECK(balance_report(DispatchLog{}).spread == 0);
}

TEST_CASE("render format") {
    auto log = run(three_workers(3, 1000));
    REQUIRE(log);
    CHECK(render(*log, balance_report(*log)) ==
          "0 1 node01\n0 2 node02\n0 3 node03\n"
          "BALANCE node01 1\nBALANCE node02 1\nBALANCE node03 1\nSPREAD 0\n");
}

TEST_CASE("parse_scenario") {
    const char* text =
        "# comment\n"
        "NODE node01 192.0.0.2 4 8589934592\n"
        "\n"
        "TRACE node01 0 1000 8589934592\n"
        "TRACE node01 2000 500 4294967296\n"
        "JOB 0 alice /Jugrid/alice 1000 aliroot -b -q run.C\n"
        "HORIZON 5000\n";
    auto s = parse_scenario(text);
    REQUIRE(s);
    REQUIRE(s->nodes.size() == 1);
    CHECK(s->nodes[0].info == NodeStatic{"node01", "192.0.0.2", 4, 8589934592ull});
    CHECK(s->nodes[0].trace.size() == 2);
    CHECK(s->nodes[0].trace[1].snapshot.acr_milli == 500);
    REQUIRE(s->arrivals.size() == 1);
    CHECK(s->arrivals[0].spec.command == "aliroot -b -q run.C");
    CHECK(s->arrivals[0].service_time_ms == 1000);
    CHECK(s->horizon_ms == 5000);

    auto err = [](const char* t) { return parse_scenario(t).error(); };
    CHECK(err("NODE node01 192.0.0.2 4 1\n").message.find("HORIZON") != std::string::npos);
    CHECK(err("HORIZON 100\nBOGUS x\n").line == 2);
    CHECK(err("HORIZON 100\nTRACE ghost 0 1 1\n").line == 2);
    CHECK(err("HORIZON 100\nNODE n 300.1.1.1 4 1\n").line == 2);
    CHECK(err("HORIZON 100\nNODE n 1.1.1.1 4\n").line == 2);
    CHECK(err("HORIZON 100\nNODE n 1.1.1.1 4 1\nTRACE n 0 1001 1\n").line == 3);
    CHECK(err("HORIZON 100\nJOB 0 alice relative 1 x\n").line == 2);
    CHECK(err("HORIZON 100\nJOB 200 alice /w 1 x\n").message.find("horizon") != std::string::npos);
    CHECK(err("HORIZON 100\nJOB 50 alice /w 1 x\nJOB 10 alice /w 1 x\n").message.find("sorted") != std::string::npos);
    CHECK(err("HORIZON 100\nNODE n 1.1.1.1 4 1\nNODE n 1.1.1.2 4 1\n").message.find("duplicate") != std::string::npos);
    CHECK_FALSE(parse_scenario("HORIZON 0\n"));
}

TEST_CASE("load_scenario reads files") {
    auto path = std::filesystem::temp_directory_path() / ("hepinfo-scn-" + std::to_string(::getpid()));
    std::ofstream(path) << "HORIZON 10\n";
    auto s = load_scenario(path);
    REQUIRE(s);
    CHECK(s->horizon_ms == 10);
    std::filesystem::remove(path);
    CHECK_FALSE(load_scenario(path));
}

TEST_CASE("invalid scenarios are rejected by run") {
    Scenario s = three_workers(1, 10);
    s.arrivals[0].service_time_ms = -1;
    CHECK_FALSE(run(s));
    s = three_workers(1, 10);
    s.cfg.heartbeat_interval_ms = 0;
    CHECK_FALSE(run(s));
}

TEST_CASE("property: simulation is deterministic") {
    Rng rng(61);
    for (int i = 0; i < 50; ++i) {
        const Scenario s = testing::random_scenario(rng);
        MemoryLedger a, b;
        auto x = run(s, Hooks{&a, {}});
        auto y = run(s, Hooks{&b, {}});
        REQUIRE(x);
        REQUIRE(y);
        CHECK(*x == *y);
        CHECK(a.lines() == b.lines());
    }
}

TEST_CASE("property: every decision agrees with the oracle") {
    Rng rng(62);
    std::size_t decisions = 0;
    for (int i = 0; i < 200; ++i) {
        const Scenario s = testing::random_scenario(rng);
        Hooks h;
        h.on_decision = [&](std::span<const NodeRecord> c, const NodeId& chosen) {
            ++decisions;
            CHECK(oracle_select(c, s.cfg) == chosen);
        };
        auto log = run(s, h);
        REQUIRE(log);
    }
    CHECK(decisions > 500);
}

TEST_CASE("property: FCFS, staleness and conservation") {
    Rng rng(63);
    for (int i = 0; i < 200; ++i) {
        const Scenario s = testing::random_scenario(rng);
        MemoryLedger ledger;
        auto log = run(s, Hooks{&ledger, {}});
        REQUIRE(log);

        for (std::size_t k = 1; k < log->entries.size(); ++k) {
            const auto& a = log->jobs.at(log->entries[k - 1].job_id);
            const auto& b = log->jobs.at(log->entries[k].job_id);
            CHECK(std::tie(a.submit_ts, a.seq) < std::tie(b.submit_ts, b.seq));
        }

        for (const auto& e : log->entries) {
            auto it = std::find_if(s.nodes.begin(), s.nodes.end(),
                                   [&](const SimNode& n) { return n.info.id == e.node.str(); });
            REQUIRE(it != s.nodes.end());
            CHECK(e.at - last_report(*it, e.at) <= s.cfg.stale_after_ms);
        }

        CHECK(log->jobs.size() == s.arrivals.size());
        std::size_t queued = 0, failed = 0, placed = 0;
        for (const auto& [id, j] : log->jobs) {
            if (j.state == JobState::Queued) ++queued;
            else if (j.state == JobState::Failed) ++failed;
            else ++placed;
        }
        CHECK(placed == log->entries.size());
        CHECK(queued + failed + placed == s.arrivals.size());

        CHECK(testing::to_oracle(log->jobs) == testing::oracle_replay(ledger.contents(), false));
    }
}
