#include <doctest.h>

#include "hepinfo/cli.hpp"
#include "hepinfo/net.hpp"

using namespace hepinfo;
using namespace hepinfo::cli;

namespace {

const Environment kEnv{std::nullopt, "bob", "/Jugrid/bob"};

Expected<Invocation, UsageError> parse(std::vector<std::string> args, const Environment& env = kEnv) {
    return parse_args(args, env);
}

NodeId nid(const char* s) { return *NodeId::parse(s); }

}  // namespace

TEST_CASE("parse_args examples") {
    auto submit = parse({"submit", "--user", "alice", "--workdir", "/Jugrid/alice", "--", "aliroot", "-b", "-q", "run.C"});
    REQUIRE(submit);
    CHECK(submit->command == CliCommand{SubmitCmd{JobSpec{"alice", "/Jugrid/alice", "aliroot -b -q run.C"}}});
    CHECK(submit->master == kDefaultMaster);

    auto status = parse({"status", "7"});
    REQUIRE(status);
    CHECK(status->command == CliCommand{StatusCmd{7}});

    auto missing = parse({"status"});
    REQUIRE_FALSE(missing);
    CHECK_FALSE(missing.error().help);
    CHECK_FALSE(missing.error().message.empty());
}

TEST_CASE("parse_args defaults and master address") {
    auto s = parse({"submit", "--", "root", "-b"});
    REQUIRE(s);
    CHECK(s->command == CliCommand{SubmitCmd{JobSpec{"bob", "/Jugrid/bob", "root -b"}}});

    CHECK(parse({"nodes"})->command == CliCommand{NodesCmd{}});
    CHECK(parse({"jobs"})->command == CliCommand{JobsCmd{}});

    Environment env = kEnv;
    env.master_addr = "10.0.0.5:9000";
    CHECK(parse({"jobs"}, env)->master == "10.0.0.5:9000");
    CHECK(parse({"--master", "127.0.0.1:1234", "jobs"}, env)->master == "127.0.0.1:1234");
    CHECK(parse({"jobs", "--master", "127.0.0.1:1234"}, env)->master == "127.0.0.1:1234");
}

TEST_CASE("parse_args usage errors") {
    CHECK_FALSE(parse({}));
    CHECK_FALSE(parse({"frobnicate"}));
    CHECK_FALSE(parse({"status", "abc"}));
    CHECK_FALSE(parse({"status", "0"}));
    CHECK_FALSE(parse({"status", "1", "2"}));
    CHECK_FALSE(parse({"submit"}));
    CHECK_FALSE(parse({"submit", "--workdir", "relative", "--", "x"}));
    CHECK_FALSE(parse({"submit", "--user", "bad user", "--", "x"}));
    CHECK_FALSE(parse({"--master", "nohost", "jobs"}));
    CHECK_FALSE(parse({"--master", "h:99999", "jobs"}));
    auto help = parse({"--help"});
    REQUIRE_FALSE(help);
    CHECK(help.error().help);
    CHECK(usage().find("submit") != std::string::npos);
}

TEST_CASE("requests") {
    CHECK(proto::encode(to_request(StatusCmd{7})) == "STATUS 7\n");
    CHECK(proto::encode(to_request(NodesCmd{})) == "NODES\n");
    CHECK(proto::encode(to_request(JobsCmd{})) == "JOBS\n");
    CHECK(proto::encode(to_request(SubmitCmd{JobSpec{"a", "/w", "c d"}})) == "SUBMIT a /w c d\n");
}

TEST_CASE("render golden output") {
    auto sub = render(SubmitCmd{}, {proto::JobIdReply{1}});
    CHECK(sub.exit_code == kExitOk);
    CHECK(sub.out == "job 1 submitted\n");

    auto st = render(StatusCmd{7}, {proto::StateRow{7, JobState::Done, nid("node02"), 1700000000000, 0}});
    CHECK(st.exit_code == kExitOk);
    CHECK(st.out == "7 DONE node02 1700000000000 0\n");

    auto queued = render(StatusCmd{8}, {proto::StateRow{8, JobState::Queued, std::nullopt, 5, std::nullopt}});
    CHECK(queued.out == "8 QUEUED - 5 -\n");

    auto unknown = render(StatusCmd{99}, {proto::Err{"unknown-job", "no job 99"}});
    CHECK(unknown.exit_code == kExitErrReply);
    CHECK(unknown.out.empty());
    CHECK(unknown.err == "ERR unknown-job no job 99\n");

    auto nodes = render(NodesCmd{}, {proto::NodeRow{nid("node01"), "192.0.0.2", 650, 4294967296ull, 1, 1000, true},
                                     proto::NodeRow{nid("node02"), "192.0.0.3", 1000, 0, 0, 12000, false},
                                     proto::NodeRow{nid("node03"), "192.0.0.4", 5, 77, 10, 0, true}, proto::Ok{}});
    CHECK(nodes.exit_code == kExitOk);
    CHECK(nodes.out ==
          "NODE    IP         ACR   AMR         RUN  AGE    ELIG\n"
          "node01  192.0.0.2  650   4294967296  1    1000   yes\n"
          "node02  192.0.0.3  1000  0           0    12000  no\n"
          "node03  192.0.0.4  5     77          10   0      yes\n");

    auto empty_nodes = render(NodesCmd{}, {proto::Ok{}});
    CHECK(empty_nodes.out == "NODE  IP  ACR  AMR  RUN  AGE  ELIG\n");

    auto jobs = render(JobsCmd{}, {proto::StateRow{1, JobState::Lost, nid("node01"), 3, std::nullopt},
                                   proto::StateRow{2, JobState::Failed, nid("node02"), 4, 127}, proto::Ok{}});
    CHECK(jobs.out == "1 LOST node01 3 -\n2 FAILED node02 4 127\n");
    CHECK(render(JobsCmd{}, {proto::Ok{}}).out.empty());
}

TEST_CASE("render rejects incomplete or unexpected replies") {
    CHECK(render(SubmitCmd{}, {}).exit_code == kExitConnection);
    CHECK(render(SubmitCmd{}, {proto::Ok{}}).exit_code == kExitConnection);
    CHECK(render(NodesCmd{}, {proto::StateRow{1, JobState::Queued, std::nullopt, 0, std::nullopt}, proto::Ok{}})
              .exit_code == kExitConnection);
    CHECK(render(JobsCmd{}, {proto::NodeRow{nid("n"), "1.1.1.1", 0, 0, 0, 0, true}, proto::Ok{}}).exit_code ==
          kExitConnection);
}

TEST_CASE("final reply detection") {
    CHECK(is_final_reply(SubmitCmd{}, proto::JobIdReply{1}));
    CHECK(is_final_reply(NodesCmd{}, proto::Ok{}));
    CHECK_FALSE(is_final_reply(NodesCmd{}, proto::NodeRow{nid("n"), "1.1.1.1", 0, 0, 0, 0, true}));
    CHECK(is_final_reply(JobsCmd{}, proto::Err{"x", "y"}));
    CHECK_FALSE(is_final_reply(JobsCmd{}, proto::StateRow{}));
}

TEST_CASE("execute reports an unreachable master") {
    // Bind then close a port so nothing is listening on it.
    auto l = net::listen_tcp(net::HostPort{"127.0.0.1", 0});
    REQUIRE(l);
    const auto port = net::local_port(l->get());
    l->reset();
    auto r = execute(Invocation{JobsCmd{}, "127.0.0.1:" + std::to_string(port)});
    CHECK(r.exit_code == kExitConnection);
    CHECK_FALSE(r.err.empty());
}
