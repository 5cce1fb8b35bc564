#include <doctest.h>

#include <set>

#include <boost/multiprecision/cpp_int.hpp>

#include "hepinfo/scheduler.hpp"
#include "hepinfo/simharness.hpp"
#include "support/generators.hpp"

using namespace hepinfo;
using hepinfo::testing::Rng;

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

constexpr std::uint64_t GiB = 1ull << 30;

NodeId nid(const std::string& s) { return *NodeId::parse(s); }

NodeRecord rec(const std::string& id, std::int32_t acr, std::uint64_t amr, std::uint64_t total = 8 * GiB,
               std::uint32_t in_flight = 0, std::uint32_t running = 0) {
    NodeRecord r;
    r.info = NodeStatic{id, "192.0.0.2", 4, total};
    r.last = ResourceSnapshot{acr, amr, running, 0};
    r.in_flight = in_flight;
    return r;
}

cpp_int floor_of(const cpp_rational& q) {
    cpp_int n = numerator(q), d = denominator(q);
    cpp_int f = n / d;
    if (n < 0 && f * d != n) --f;
    return f;
}

// Exact rational evaluation, floored at each stage the definition floors.
cpp_int exact_score(const NodeRecord& r) {
    cpp_rational amr = cpp_int(std::min(r.last.amr_bytes, r.info.total_mem_bytes));
    cpp_rational frac = floor_of(amr * 1000 / cpp_int(r.info.total_mem_bytes));
    return floor_of((cpp_rational(r.last.acr_milli) + frac) / 2);
}

cpp_int exact_effective(const NodeRecord& r, const Config& cfg) {
    cpp_int e = exact_score(r) - cpp_int(cfg.dispatch_penalty_milli) * r.in_flight;
    return e < 0 ? cpp_int(0) : e;
}

// Applies the placement rules one job at a time, charging in-flight
// dispatches by hand.
std::vector<std::string> hand_drain(std::vector<NodeRecord> nodes, std::size_t jobs, const Config& cfg) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < jobs && !nodes.empty(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            auto a = exact_effective(nodes[i], cfg), b = exact_effective(nodes[best], cfg);
            if (a > b || (a == b && (nodes[i].last.running_jobs < nodes[best].last.running_jobs ||
                                     (nodes[i].last.running_jobs == nodes[best].last.running_jobs &&
                                      nodes[i].info.id < nodes[best].info.id)))) {
                best = i;
            }
        }
        out.push_back(nodes[best].info.id);
        ++nodes[best].in_flight;
    }
    return out;
}

JobRecord job(JobId id, EpochMs ts, std::uint64_t seq) {
    JobRecord r;
    r.job_id = id;
    r.submit_ts = ts;
    r.seq = seq;
    return r;
}

}  // namespace

TEST_CASE("score examples") {
    NodeRecord a = rec("node01", 800, 4 * GiB);
    CHECK(exact_score(a) == 650);
    CHECK(score(a) == 650);
    CHECK(score(rec("n", 0, 0)) == 0);
    CHECK(score(rec("n", 1000, 8 * GiB)) == 1000);
    CHECK(score(rec("n", 1, 0)) == 0);
    CHECK(score(rec("n", 0, 1, 3)) == 166);
    CHECK(score(rec("n", 999, 2, 3)) == 832);
}

TEST_CASE("effective_score examples") {
    Config cfg;
    NodeRecord a = rec("node01", 800, 4 * GiB, 8 * GiB, 2);
    CHECK(exact_effective(a, cfg) == 550);
    CHECK(effective_score(a, cfg) == 550);
    a.in_flight = 0;
    CHECK(effective_score(a, cfg) == score(a));
    NodeRecord low = rec("n", 200, 0, 8 * GiB, 3);
    REQUIRE(score(low) == 100);
    CHECK(effective_score(low, cfg) == 0);

    Config huge;
    huge.dispatch_penalty_milli = INT64_MAX;
    CHECK(effective_score(rec("n", 1000, 8 * GiB, 8 * GiB, UINT32_MAX), huge) == 0);
}

TEST_CASE("select_node examples") {
    Config cfg;
    std::vector<NodeRecord> two = {rec("node01", 800, 4 * GiB), rec("node02", 600, 8 * GiB)};
    CHECK(score(two[1]) == 800);
    CHECK(select_node(two, cfg) == nid("node02"));

    std::vector<NodeRecord> one = {rec("node07", 0, 0)};
    CHECK(select_node(one, cfg) == nid("node07"));

    std::vector<NodeRecord> same = {rec("node02", 500, GiB), rec("node01", 500, GiB)};
    CHECK(select_node(same, cfg) == nid("node01"));

    CHECK_FALSE(select_node({}, cfg));
}

TEST_CASE("select_node tie-break order") {
    Config cfg;
    // Equal score: fewer running jobs beats a smaller id.
    std::vector<NodeRecord> v = {rec("node01", 500, GiB, 8 * GiB, 0, 3), rec("node02", 500, GiB, 8 * GiB, 0, 1)};
    CHECK(select_node(v, cfg) == nid("node02"));
    // Higher score beats fewer running jobs.
    v = {rec("node01", 502, GiB, 8 * GiB, 0, 9), rec("node02", 500, GiB, 8 * GiB, 0, 0)};
    CHECK(select_node(v, cfg) == nid("node01"));
}

TEST_CASE("drain examples") {
    Config cfg;
    Registry reg;
    for (const char* id : {"node01", "node02", "node03"}) {
        reg.register_node(NodeStatic{id, "192.0.0.2", 4, 8 * GiB}, 0);
        reg.heartbeat(nid(id), ResourceSnapshot{1000, 8 * GiB, 0, 0}, 0);
    }
    PendingQueue q;
    for (JobId j = 1; j <= 6; ++j) q.push(job(j, 0, j));

    auto decisions = drain(q, reg, 0, cfg);
    std::vector<std::string> got;
    for (const auto& d : decisions) got.push_back(d.node.str());
    const std::vector<std::string> cycle = {"node01", "node02", "node03", "node01", "node02", "node03"};
    CHECK(got == cycle);
    CHECK(q.empty());
    for (std::size_t i = 0; i < decisions.size(); ++i) CHECK(decisions[i].job_id == i + 1);

    PendingQueue empty;
    CHECK(drain(empty, reg, 0, cfg).empty());

    Registry none;
    PendingQueue five;
    for (JobId j = 1; j <= 5; ++j) five.push(job(j, 0, j));
    CHECK(drain(five, none, 0, cfg).empty());
    CHECK(five.size() == 5);

    Registry stale;
    stale.register_node(NodeStatic{"node01", "192.0.0.2", 4, 8 * GiB}, 0);
    CHECK(drain(five, stale, 10000, cfg).empty());
    CHECK(five.size() == 5);
}

TEST_CASE("hand simulation reproduces the identical-node cycle") {
    Config cfg;
    std::vector<NodeRecord> nodes;
    for (const char* id : {"node01", "node02", "node03"}) nodes.push_back(rec(id, 1000, 8 * GiB));
    const std::vector<std::string> cycle = {"node01", "node02", "node03", "node01", "node02", "node03"};
    CHECK(hand_drain(nodes, 6, cfg) == cycle);
}

TEST_CASE("pending queue orders by submit time then sequence") {
    PendingQueue q;
    q.push(job(3, 100, 3));
    q.push(job(1, 50, 7));
    q.push(job(2, 100, 2));
    q.push(job(4, 50, 1));
    std::vector<JobId> order;
    for (const auto& e : q) order.push_back(e.job_id);
    CHECK(order == std::vector<JobId>{4, 1, 2, 3});
    CHECK(q.front().job_id == 4);
    q.pop_front();
    CHECK(q.front().job_id == 1);
    CHECK(q.erase(QueueEntry{100, 2, 2}));
    CHECK_FALSE(q.erase(QueueEntry{100, 2, 2}));
    CHECK(q.size() == 2);
}

TEST_CASE("property: score and effective_score match exact arithmetic") {
    Rng rng(31);
    for (int i = 0; i < 5000; ++i) {
        NodeRecord r = testing::random_record(rng, "n");
        if (testing::uniform(rng, 0, 3) == 0) r.last.amr_bytes = testing::random_u64(rng);
        if (testing::uniform(rng, 0, 3) == 0) r.info.total_mem_bytes = std::max<std::uint64_t>(1, testing::random_u64(rng));
        Config cfg;
        cfg.dispatch_penalty_milli = static_cast<std::int64_t>(testing::uniform(rng, 0, 1000));
        CHECK(cpp_int(score(r)) == exact_score(r));
        CHECK(cpp_int(effective_score(r, cfg)) == exact_effective(r, cfg));
        CHECK(score(r) >= 0);
        CHECK(score(r) <= 1000);
    }
}

TEST_CASE("property: select_node agrees with the oracle") {
    Rng rng(32);
    for (int i = 0; i < 2000; ++i) {
        auto c = testing::random_candidates(rng, testing::uniform(rng, 0, 20));
        Config cfg;
        cfg.dispatch_penalty_milli = static_cast<std::int64_t>(testing::uniform(rng, 0, 200));
        CHECK(select_node(c, cfg) == sim::oracle_select(c, cfg));
    }
}

TEST_CASE("property: selection ignores candidate order") {
    Rng rng(33);
    for (int i = 0; i < 1000; ++i) {
        auto c = testing::random_candidates(rng, testing::uniform(rng, 1, 15));
        Config cfg;
        auto first = select_node(c, cfg);
        std::shuffle(c.begin(), c.end(), rng);
        CHECK(select_node(c, cfg) == first);
    }
}

TEST_CASE("property: raising a node's resources never lowers its score") {
    Rng rng(34);
    for (int i = 0; i < 3000; ++i) {
        NodeRecord r = testing::random_record(rng, "n");
        NodeRecord up = r;
        up.last.acr_milli = static_cast<std::int32_t>(testing::uniform(rng, r.last.acr_milli, 1000));
        up.last.amr_bytes = testing::uniform(rng, r.last.amr_bytes, r.info.total_mem_bytes);
        CHECK(score(up) >= score(r));
        Config cfg;
        NodeRecord busier = r;
        busier.in_flight += 1;
        CHECK(effective_score(busier, cfg) <= effective_score(r, cfg));
    }
}

TEST_CASE("property: the winner's effective score is maximal") {
    Rng rng(35);
    for (int i = 0; i < 2000; ++i) {
        auto c = testing::random_candidates(rng, testing::uniform(rng, 1, 30));
        Config cfg;
        auto w = select_node(c, cfg);
        REQUIRE(w);
        auto it = std::find_if(c.begin(), c.end(), [&](const NodeRecord& r) { return r.info.id == w->str(); });
        REQUIRE(it != c.end());
        for (const auto& r : c) CHECK(effective_score(r, cfg) <= effective_score(*it, cfg));
    }
}

TEST_CASE("property: drain is FCFS and only targets eligible nodes") {
    Rng rng(36);
    for (int iter = 0; iter < 300; ++iter) {
        Config cfg;
        Registry reg;
        const EpochMs now = 20000;
        std::set<std::string> fresh;
        for (std::size_t i = 0, n = testing::uniform(rng, 0, 6); i < n; ++i) {
            const std::string id = testing::node_name(i);
            const EpochMs seen = static_cast<EpochMs>(testing::uniform(rng, 10000, now));
            reg.register_node(NodeStatic{id, "10.0.0.1", 2, 4 * GiB}, 0);
            reg.heartbeat(nid(id),
                          ResourceSnapshot{static_cast<std::int32_t>(testing::uniform(rng, 0, 1000)),
                                           testing::uniform(rng, 0, 4 * GiB), 0, seen},
                          seen);
            if (now - seen <= cfg.stale_after_ms) fresh.insert(id);
        }
        PendingQueue q;
        const std::size_t jobs = testing::uniform(rng, 0, 30);
        for (JobId j = 1; j <= jobs; ++j) {
            q.push(job(j, static_cast<EpochMs>(testing::uniform(rng, 0, 5)), j));
        }
        std::vector<QueueEntry> order(q.begin(), q.end());

        std::vector<std::string> hand = hand_drain(reg.eligible(now, cfg), jobs, cfg);
        auto decisions = drain(q, reg, now, cfg);
        if (fresh.empty()) {
            CHECK(decisions.empty());
            CHECK(q.size() == jobs);
            continue;
        }
        REQUIRE(decisions.size() == jobs);
        for (std::size_t i = 0; i < decisions.size(); ++i) {
            CHECK(decisions[i].job_id == order[i].job_id);
            CHECK(fresh.count(decisions[i].node.str()) == 1);
            CHECK(decisions[i].node.str() == hand[i]);
        }
    }
}
