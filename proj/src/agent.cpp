#include "hepinfo/agent.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace hepinfo::agent {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::optional<std::uint64_t> parse_loadavg(std::string_view text) {
    std::string_view first = text.substr(0, text.find_first_of(" \t\n"));
    std::size_t dot = first.find('.');
    std::string_view whole = first.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : first.substr(dot + 1);
    if (whole.empty() || frac.size() > 3) return std::nullopt;
    std::uint64_t w = 0;
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
    if (ec != std::errc{} || p != whole.data() + whole.size()) return std::nullopt;
    std::uint64_t f = 0;
    std::uint64_t scale = 1000;
    for (char c : frac) {
        if (c < '0' || c > '9') return std::nullopt;
        scale /= 10;
        f += static_cast<std::uint64_t>(c - '0') * scale;
    }
    return w * 1000 + f;
}

std::optional<std::pair<std::uint64_t, std::uint64_t>> parse_meminfo(std::string_view text) {
    std::optional<std::uint64_t> total, avail;
    while (!text.empty()) {
        std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        std::size_t colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        std::string_view key = line.substr(0, colon);
        if (key != "MemTotal" && key != "MemAvailable") continue;
        std::string_view rest = line.substr(colon + 1);
        std::size_t b = rest.find_first_not_of(' ');
        if (b == std::string_view::npos) return std::nullopt;
        rest.remove_prefix(b);
        std::uint64_t kib = 0;
        auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), kib);
        if (ec != std::errc{}) return std::nullopt;
        (key == "MemTotal" ? total : avail) = kib * 1024;
    }
    if (!total || !avail) return std::nullopt;
    return std::pair{*total, *avail};
}

std::optional<ProbeReading> ProcProbe::read() {
    auto load = slurp(root_ / "loadavg");
    auto mem = slurp(root_ / "meminfo");
    if (!load || !mem) return std::nullopt;
    auto l = parse_loadavg(*load);
    auto m = parse_meminfo(*mem);
    long cores = ::sysconf(_SC_NPROCESSORS_ONLN);
    if (!l || !m || cores < 1) return std::nullopt;
    return ProbeReading{cores, *l, m->first, m->second};
}

std::int32_t acr_from_load(std::uint64_t load1_milli, std::int64_t cores) noexcept {
    if (cores < 1) return 0;
    const std::uint64_t busy = load1_milli / static_cast<std::uint64_t>(cores);
    if (busy >= static_cast<std::uint64_t>(kMaxAcrMilli)) return 0;
    return kMaxAcrMilli - static_cast<std::int32_t>(busy);
}

Expected<ResourceSnapshot, ProbeUnavailable> sample(SystemProbe& probe, std::uint32_t running_jobs,
                                                    EpochMs now) {
    auto r = probe.read();
    if (!r || r->cores < 1) return Unexpected{ProbeUnavailable{}};
    return ResourceSnapshot{acr_from_load(r->load1_milli, r->cores),
                            std::min(r->mem_available_bytes, r->mem_total_bytes), running_jobs, now};
}

bool workdir_contained(const fs::path& workdir, const fs::path& root) {
    std::error_code ec;
    if (!workdir.is_absolute() || !fs::is_directory(workdir, ec)) return false;
    const fs::path real_dir = fs::canonical(workdir, ec);
    if (ec) return false;
    const fs::path real_root = fs::weakly_canonical(root, ec);
    if (ec) return false;
    auto r = real_root.begin();
    auto d = real_dir.begin();
    for (; r != real_root.end(); ++r, ++d) {
        if (r->empty()) continue;  // trailing separator
        if (d == real_dir.end() || *r != *d) return false;
    }
    return true;
}

Launch launch_job(JobId job_id, const JobSpec& spec, const fs::path& root) {
    const fs::path dir = spec.workdir;
    if (!workdir_contained(dir, root)) return Launch{std::nullopt, kExitNotRunnable};

    const std::string id = std::to_string(job_id);
    net::Fd out(::open((dir / (id + ".out")).c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    net::Fd err(::open((dir / (id + ".err")).c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    net::Fd null_in(::open("/dev/null", O_RDONLY | O_CLOEXEC));
    if (!out.valid() || !err.valid() || !null_in.valid()) return Launch{std::nullopt, kExitNotRunnable};

    // Everything the child touches is prepared before fork.
    const std::string dir_s = dir.string();
    const std::string cmd = spec.command;
    char sh[] = "/bin/sh";
    char dash_c[] = "-c";
    std::vector<char> cmd_buf(cmd.begin(), cmd.end());
    cmd_buf.push_back('\0');
    char* argv[] = {sh, dash_c, cmd_buf.data(), nullptr};

    pid_t pid = ::fork();
    if (pid < 0) return Launch{std::nullopt, kExitNotFound};
    if (pid == 0) {
        ::setpgid(0, 0);
        if (::chdir(dir_s.c_str()) != 0) ::_exit(kExitNotRunnable);
        if (::dup2(null_in.get(), 0) < 0 || ::dup2(out.get(), 1) < 0 || ::dup2(err.get(), 2) < 0)
            ::_exit(kExitNotRunnable);
        ::execv(sh, argv);
        ::_exit(kExitNotFound);
    }
    return Launch{pid, 0};
}

std::int32_t wait_job(pid_t pid) {
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) return kExitNotFound;
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return kExitNotFound;
}

std::int32_t run_job(JobId job_id, const JobSpec& spec, const fs::path& root) {
    Launch l = launch_job(job_id, spec, root);
    if (!l.pid) return l.exit_code;
    return wait_job(*l.pid);
}

void heartbeat_loop(const LoopIo& io, std::int64_t interval_ms) {
    Backoff backoff;
    bool up = io.connect();
    while (true) {
        if (!up) {
            if (!io.sleep_ms(backoff.next_ms())) return;
            up = io.connect();
            if (up) backoff.reset();
            continue;
        }
        if (auto snap = io.sample()) {
            if (!io.send_heartbeat(*snap)) {
                up = false;
                continue;
            }
        }
        if (!io.sleep_ms(interval_ms)) return;
        if (!io.connected()) up = false;
    }
}

Agent::Agent(AgentOptions opts, SystemProbe& probe, Clock& clock)
    : opts_(std::move(opts)), probe_(probe), clock_(clock) {}

Agent::~Agent() {
    stop();
    if (reader_.joinable()) reader_.join();
    for (auto& t : waiters_) {
        if (t.joinable()) t.join();
    }
}

std::size_t Agent::running_jobs() const {
    std::lock_guard lk(mu_);
    return running_.size();
}

bool Agent::connect_and_register() {
    if (reader_.joinable()) reader_.join();

    auto fd = net::connect_tcp(opts_.master);
    if (!fd) {
        spdlog::warn("cannot reach master {}: {}", opts_.master.str(), fd.error());
        return false;
    }
    auto reading = probe_.read();
    if (!reading) {
        spdlog::warn("probe unavailable; postponing registration");
        return false;
    }
    NodeStatic self{opts_.node_id,
                    opts_.advertise_ip.value_or(net::local_ipv4(fd->get()).value_or("127.0.0.1")),
                    reading->cores, reading->mem_total_bytes};
    if (!net::send_all(fd->get(), proto::encode(proto::Register{self}))) return false;

    auto lines = std::make_unique<net::LineReader>(fd->get());
    auto reply = lines->next(std::chrono::milliseconds{5000});
    if (!reply) return false;
    auto msg = proto::decode(*reply);
    if (!msg || !std::holds_alternative<proto::Ok>(*msg)) {
        spdlog::error("master refused registration: {}", *reply);
        return false;
    }
    spdlog::info("registered with {} as {} ({})", opts_.master.str(), self.id, self.ip);

    auto conn = std::make_shared<net::Fd>(std::move(*fd));
    {
        std::lock_guard lk(mu_);
        conn_ = conn;
        flush_unsent_locked();
    }
    reader_ = std::thread(&Agent::reader_loop, this, conn, std::move(lines));
    return true;
}

bool Agent::send_line(const proto::Message& m) {
    std::lock_guard lk(mu_);
    if (!conn_) return false;
    if (net::send_all(conn_->get(), proto::encode(m))) return true;
    ::shutdown(conn_->get(), SHUT_RDWR);
    conn_.reset();
    return false;
}

void Agent::flush_unsent_locked() {
    while (conn_ && !unsent_.empty()) {
        if (!net::send_all(conn_->get(), proto::encode(unsent_.front()))) {
            ::shutdown(conn_->get(), SHUT_RDWR);
            conn_.reset();
            return;
        }
        unsent_.pop_front();
    }
}

void Agent::drop_connection(const std::shared_ptr<net::Fd>& conn) {
    std::lock_guard lk(mu_);
    if (conn_ == conn) conn_.reset();
    cv_.notify_all();
}

void Agent::reader_loop(std::shared_ptr<net::Fd> conn, std::unique_ptr<net::LineReader> lines) {
    while (auto line = lines->next()) {
        auto msg = proto::decode(*line);
        if (!msg) {
            spdlog::warn("ignoring undecodable line from master: {}", proto::describe(msg.error()));
            continue;
        }
        if (auto* d = std::get_if<proto::Dispatch>(&*msg)) {
            start_job(*d);
        } else if (auto* e = std::get_if<proto::Err>(&*msg)) {
            spdlog::warn("master error: {} {}", e->code, e->text);
        }
    }
    if (!stopping_) spdlog::warn("lost connection to master");
    drop_connection(conn);
}

void Agent::start_job(const proto::Dispatch& d) {
    std::lock_guard lk(mu_);
    if (running_.count(d.job_id)) return;
    Launch l = launch_job(d.job_id, d.spec, opts_.workroot);
    if (!l.pid) {
        spdlog::warn("job {} not started (exit {})", d.job_id, l.exit_code);
        unsent_.push_back(proto::JobDone{*NodeId::parse(opts_.node_id), d.job_id, l.exit_code});
        flush_unsent_locked();
        return;
    }
    spdlog::info("job {} started as pid {} in {}", d.job_id, *l.pid, d.spec.workdir);
    running_.emplace(d.job_id, RunningJob{*l.pid, clock_.now()});
    const pid_t pid = *l.pid;
    const JobId job = d.job_id;
    waiters_.emplace_back([this, pid, job] { report_done(job, wait_job(pid)); });
}

void Agent::report_done(JobId job, std::int32_t exit_code) {
    std::lock_guard lk(mu_);
    running_.erase(job);
    spdlog::info("job {} finished with exit code {}", job, exit_code);
    unsent_.push_back(proto::JobDone{*NodeId::parse(opts_.node_id), job, exit_code});
    flush_unsent_locked();
}

void Agent::run() {
    LoopIo io;
    io.connect = [this] { return !stopping_ && connect_and_register(); };
    io.connected = [this] {
        std::lock_guard lk(mu_);
        return conn_ != nullptr;
    };
    io.sample = [this]() -> std::optional<ResourceSnapshot> {
        auto s = agent::sample(probe_, static_cast<std::uint32_t>(running_jobs()), clock_.now());
        if (!s) {
            spdlog::warn("probe unavailable; skipping heartbeat");
            return std::nullopt;
        }
        return *s;
    };
    io.send_heartbeat = [this](const ResourceSnapshot& s) {
        return send_line(proto::Heartbeat{*NodeId::parse(opts_.node_id), s.acr_milli, s.amr_bytes,
                                          s.running_jobs});
    };
    io.sleep_ms = [this](std::int64_t ms) {
        std::unique_lock lk(mu_);
        const bool had_link = conn_ != nullptr;
        cv_.wait_for(lk, std::chrono::milliseconds{ms},
                     [&] { return stopping_.load() || (had_link && !conn_); });
        return !stopping_.load();
    };
    heartbeat_loop(io, opts_.heartbeat_interval_ms);

    if (reader_.joinable()) reader_.join();
    std::vector<std::thread> waiters;
    {
        std::lock_guard lk(mu_);
        for (const auto& [job, r] : running_) ::kill(-r.pid, SIGTERM);
        waiters.swap(waiters_);
    }
    for (auto& t : waiters) t.join();
}

void Agent::stop() {
    std::lock_guard lk(mu_);
    stopping_ = true;
    if (conn_) ::shutdown(conn_->get(), SHUT_RDWR);
    cv_.notify_all();
}

}  // namespace hepinfo::agent
