#pragma once

// Thin POSIX TCP helpers shared by the daemons and the client.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hepinfo/expected.hpp"
#include "hepinfo/protocol.hpp"

namespace hepinfo::net {

struct HostPort {
    std::string host;
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
};

/// "host:port"; the port must be 0-65535.
std::optional<HostPort> parse_host_port(std::string_view s);

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(o.release()) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) reset(o.release());
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;

    int get() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    int release() noexcept {
        int f = fd_;
        fd_ = -1;
        return f;
    }
    void reset(int fd = -1) noexcept;

private:
    int fd_ = -1;
};

Expected<Fd, std::string> connect_tcp(const HostPort& addr);
Expected<Fd, std::string> listen_tcp(const HostPort& addr);

/// Port a listening or connected socket is bound to locally.
std::uint16_t local_port(int fd);
/// Local IPv4 address of a connected socket in dotted-quad form.
std::optional<std::string> local_ipv4(int fd);

/// Writes everything or fails. Blocking sockets only.
bool send_all(int fd, std::string_view bytes);

void set_nonblocking(int fd);

/// Blocking line reader over a socket.
class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    /// Next complete line without its terminator. nullopt on EOF, error,
    /// framing violation or timeout.
    std::optional<std::string> next(std::chrono::milliseconds timeout = std::chrono::milliseconds{-1});

private:
    int fd_;
    proto::FrameReader frames_;
    std::vector<std::string> ready_;
    std::size_t head_ = 0;
};

}  // namespace hepinfo::net
