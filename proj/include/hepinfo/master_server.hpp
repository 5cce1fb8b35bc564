#pragma once

#include <atomic>
#include <map>
#include <string>

#include "hepinfo/master.hpp"
#include "hepinfo/net.hpp"

namespace hepinfo {

/// TCP front end for a Master. One thread runs a poll loop that reads
/// lines from every connection, feeds them to the Master in arrival order
/// and writes the resulting replies and DISPATCH lines. A periodic tick
/// fires every heartbeat interval.
class MasterServer {
public:
    MasterServer(Master& master, Clock& clock, net::Fd listener);
    ~MasterServer();
    MasterServer(const MasterServer&) = delete;
    MasterServer& operator=(const MasterServer&) = delete;

    /// Runs until stop(). Safe to call stop() from another thread or a
    /// signal handler.
    void run();
    void stop() noexcept;

    std::uint16_t port() const;

private:
    struct Conn {
        net::Fd fd;
        proto::FrameReader frames;
        std::string out;
        bool closing = false;
    };

    void accept_all();
    void read_from(ConnId id, Conn& c);
    void dispatch(std::vector<Outbound> out);
    void flush(Conn& c);
    void close_conn(ConnId id);

    Master& master_;
    Clock& clock_;
    net::Fd listener_;
    net::Fd wake_rd_, wake_wr_;
    std::map<ConnId, Conn> conns_;
    ConnId next_id_ = 1;
};

}  // namespace hepinfo
