#include "hepinfo/master_server.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <stdexcept>
#include <system_error>
#include <vector>

#include <spdlog/spdlog.h>

namespace hepinfo {

MasterServer::MasterServer(Master& master, Clock& clock, net::Fd listener)
    : master_(master), clock_(clock), listener_(std::move(listener)) {
    int p[2];
    if (::pipe2(p, O_CLOEXEC | O_NONBLOCK) != 0) {
        throw std::system_error(errno, std::generic_category(), "pipe");
    }
    wake_rd_.reset(p[0]);
    wake_wr_.reset(p[1]);
    net::set_nonblocking(listener_.get());
}

MasterServer::~MasterServer() = default;

std::uint16_t MasterServer::port() const { return net::local_port(listener_.get()); }

void MasterServer::stop() noexcept {
    char b = 1;
    [[maybe_unused]] auto n = ::write(wake_wr_.get(), &b, 1);
}

void MasterServer::run() {
    using namespace std::chrono;
    const auto interval = milliseconds{master_.config().heartbeat_interval_ms};
    auto next_tick = steady_clock::now() + interval;

    while (true) {
        std::vector<pollfd> fds;
        std::vector<ConnId> ids;
        fds.push_back(pollfd{wake_rd_.get(), POLLIN, 0});
        fds.push_back(pollfd{listener_.get(), POLLIN, 0});
        for (auto& [id, c] : conns_) {
            short ev = POLLIN;
            if (!c.out.empty()) ev |= POLLOUT;
            fds.push_back(pollfd{c.fd.get(), ev, 0});
            ids.push_back(id);
        }

        auto wait = duration_cast<milliseconds>(next_tick - steady_clock::now()).count();
        int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::max<long>(0, wait)));
        if (rc < 0 && errno != EINTR) throw std::system_error(errno, std::generic_category(), "poll");

        if (fds[0].revents & POLLIN) break;
        if (fds[1].revents & POLLIN) accept_all();

        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto it = conns_.find(ids[i]);
            if (it == conns_.end()) continue;
            const short rev = fds[i + 2].revents;
            if (rev & (POLLIN | POLLHUP | POLLERR)) read_from(ids[i], it->second);
            it = conns_.find(ids[i]);
            if (it != conns_.end() && (rev & POLLOUT)) flush(it->second);
        }

        if (steady_clock::now() >= next_tick) {
            dispatch(master_.tick(clock_.now()));
            next_tick = steady_clock::now() + interval;
        }

        std::vector<ConnId> done;
        for (auto& [id, c] : conns_) {
            if (c.closing && c.out.empty()) done.push_back(id);
        }
        for (ConnId id : done) close_conn(id);
    }
}

void MasterServer::accept_all() {
    while (true) {
        int fd = ::accept4(listener_.get(), nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
        if (fd < 0) return;
        Conn c;
        c.fd.reset(fd);
        conns_.emplace(next_id_++, std::move(c));
    }
}

void MasterServer::read_from(ConnId id, Conn& c) {
    char buf[8192];
    while (true) {
        ssize_t n = ::recv(c.fd.get(), buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
        if (n <= 0) {
            close_conn(id);
            return;
        }
        auto lines = c.frames.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        if (!lines) {
            c.out += proto::encode(proto::Err{"bad-request", "line too long"});
            c.closing = true;
            return;
        }
        for (const auto& line : *lines) {
            auto m = proto::decode(line);
            if (m) {
                if (auto* r = std::get_if<proto::Register>(&*m)) {
                    spdlog::info("REGISTER {} {} cores={} mem={}", r->node.id, r->node.ip,
                                 r->node.cpu_cores, r->node.total_mem_bytes);
                } else if (auto* s = std::get_if<proto::Submit>(&*m)) {
                    spdlog::info("SUBMIT {} {} {}", s->spec.user, s->spec.workdir, s->spec.command);
                } else if (auto* d = std::get_if<proto::JobDone>(&*m)) {
                    spdlog::info("JOBDONE {} job {} exit {}", d->node.str(), d->job_id, d->exit_code);
                }
            }
            dispatch(master_.handle_line(id, line, clock_.now()));
            if (!conns_.count(id)) return;
        }
    }
}

void MasterServer::dispatch(std::vector<Outbound> out) {
    for (auto& o : out) {
        if (auto* d = std::get_if<proto::Dispatch>(&o.msg)) {
            spdlog::info("DISPATCH job {} -> conn {}", d->job_id, o.to);
        }
        auto it = conns_.find(o.to);
        if (it == conns_.end()) continue;
        it->second.out += proto::encode(o.msg);
        flush(it->second);
    }
}

void MasterServer::flush(Conn& c) {
    while (!c.out.empty()) {
        ssize_t n = ::send(c.fd.get(), c.out.data(), c.out.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) {
            if (errno != EAGAIN && errno != EWOULDBLOCK) {
                c.out.clear();
                c.closing = true;
            }
            return;
        }
        c.out.erase(0, static_cast<std::size_t>(n));
    }
}

void MasterServer::close_conn(ConnId id) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    conns_.erase(it);
    master_.on_disconnect(id, clock_.now());
}

}  // namespace hepinfo
