#include "hepinfo/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace hepinfo::net {

std::optional<HostPort> parse_host_port(std::string_view s) {
    std::size_t colon = s.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) return std::nullopt;
    std::string_view port_s = s.substr(colon + 1);
    unsigned v = 0;
    auto [p, ec] = std::from_chars(port_s.data(), port_s.data() + port_s.size(), v);
    if (ec != std::errc{} || p != port_s.data() + port_s.size() || v > 65535) return std::nullopt;
    return HostPort{std::string(s.substr(0, colon)), static_cast<std::uint16_t>(v)};
}

void Fd::reset(int fd) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
}

namespace {

struct AddrInfo {
    addrinfo* head = nullptr;
    ~AddrInfo() {
        if (head) freeaddrinfo(head);
    }
};

Expected<AddrInfo*, std::string> resolve(const HostPort& addr, bool passive, AddrInfo& out) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    const std::string port = std::to_string(addr.port);
    const char* host = addr.host.empty() || addr.host == "*" ? nullptr : addr.host.c_str();
    int rc = getaddrinfo(host, port.c_str(), &hints, &out.head);
    if (rc != 0) return Unexpected{std::string(gai_strerror(rc))};
    return &out;
}

}  // namespace

Expected<Fd, std::string> connect_tcp(const HostPort& addr) {
    AddrInfo ai;
    auto r = resolve(addr, false, ai);
    if (!r) return Unexpected{r.error()};
    std::string last = "no address";
    for (addrinfo* p = ai.head; p; p = p->ai_next) {
        Fd fd(::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol));
        if (!fd.valid()) {
            last = std::strerror(errno);
            continue;
        }
        if (::connect(fd.get(), p->ai_addr, p->ai_addrlen) == 0) {
            int one = 1;
            ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return fd;
        }
        last = std::strerror(errno);
    }
    return Unexpected{last};
}

Expected<Fd, std::string> listen_tcp(const HostPort& addr) {
    AddrInfo ai;
    auto r = resolve(addr, true, ai);
    if (!r) return Unexpected{r.error()};
    std::string last = "no address";
    for (addrinfo* p = ai.head; p; p = p->ai_next) {
        Fd fd(::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol));
        if (!fd.valid()) {
            last = std::strerror(errno);
            continue;
        }
        int one = 1;
        ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd.get(), p->ai_addr, p->ai_addrlen) == 0 && ::listen(fd.get(), 64) == 0) {
            return fd;
        }
        last = std::strerror(errno);
    }
    return Unexpected{last};
}

std::uint16_t local_port(int fd) {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len) != 0) return 0;
    return ntohs(sa.sin_port);
}

std::optional<std::string> local_ipv4(int fd) {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len) != 0 || sa.sin_family != AF_INET)
        return std::nullopt;
    char buf[INET_ADDRSTRLEN];
    if (!::inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf)) return std::nullopt;
    return std::string(buf);
}

bool send_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

void set_nonblocking(int fd) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

std::optional<std::string> LineReader::next(std::chrono::milliseconds timeout) {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + timeout;
    while (head_ == ready_.size()) {
        ready_.clear();
        head_ = 0;
        int wait_ms = -1;
        if (timeout.count() >= 0) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
            if (left.count() <= 0) return std::nullopt;
            wait_ms = static_cast<int>(left.count());
        }
        pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, wait_ms);
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) return std::nullopt;
        char buf[4096];
        ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return std::nullopt;
        auto lines = frames_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        if (!lines) return std::nullopt;
        ready_ = std::move(*lines);
    }
    return std::move(ready_[head_++]);
}

}  // namespace hepinfo::net
