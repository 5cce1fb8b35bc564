#include "hepinfo/ledger.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace hepinfo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    if (s.empty() || (s.size() > 1 && s[0] == '0')) return std::nullopt;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

// Pops the next space-terminated field off `s`.
std::optional<std::string_view> next_field(std::string_view& s) {
    std::size_t sp = s.find(' ');
    if (sp == std::string_view::npos) return std::nullopt;
    auto f = s.substr(0, sp);
    s.remove_prefix(sp + 1);
    return f;
}

}  // namespace

std::string encode_event(const LedgerEvent& e) {
    std::string out = std::to_string(e.ts);
    out += ' ';
    std::visit(overloaded{
                   [&](const ledger::Submitted& s) {
                       out += "SUBMIT " + std::to_string(e.job_id) + ' ' + s.spec.user + ' ' +
                              s.spec.workdir + ' ' + s.spec.command;
                   },
                   [&](const ledger::Assigned& a) {
                       out += "ASSIGN " + std::to_string(e.job_id) + ' ' + a.node.str();
                   },
                   [&](const ledger::Finished& f) {
                       out += "DONE " + std::to_string(e.job_id) + ' ' +
                              std::to_string(f.exit_code);
                   },
                   [&](const ledger::Failed& f) {
                       out += "FAIL " + std::to_string(e.job_id) + ' ' + f.reason;
                   },
                   [&](const ledger::Lost& l) {
                       out += "LOST " + std::to_string(e.job_id) + ' ' + l.node.str();
                   },
               },
               e.body);
    out += '\n';
    return out;
}

std::optional<LedgerEvent> parse_event(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    auto ts_s = next_field(line);
    auto kind = next_field(line);
    if (!ts_s || !kind) return std::nullopt;
    auto ts = parse_u64(*ts_s);
    if (!ts || *ts > static_cast<std::uint64_t>(INT64_MAX)) return std::nullopt;

    LedgerEvent e;
    e.ts = static_cast<EpochMs>(*ts);

    if (*kind == "SUBMIT") {
        auto id = next_field(line);
        auto user = next_field(line);
        auto workdir = next_field(line);
        if (!id || !user || !workdir) return std::nullopt;
        auto job = parse_u64(*id);
        JobSpec spec{std::string(*user), std::string(*workdir), std::string(line)};
        if (!job || *job == 0 || !is_valid_job_spec(spec)) return std::nullopt;
        e.job_id = *job;
        e.body = ledger::Submitted{std::move(spec)};
        return e;
    }

    auto id = next_field(line);
    if (!id) return std::nullopt;
    auto job = parse_u64(*id);
    if (!job || *job == 0) return std::nullopt;
    e.job_id = *job;
    std::string_view last = line;

    if (*kind == "ASSIGN" || *kind == "LOST") {
        auto node = NodeId::parse(last);
        if (!node) return std::nullopt;
        if (*kind == "ASSIGN") {
            e.body = ledger::Assigned{*node};
        } else {
            e.body = ledger::Lost{*node};
        }
        return e;
    }
    if (*kind == "DONE") {
        auto code = parse_u64(last);
        if (!code || *code > static_cast<std::uint64_t>(INT32_MAX)) return std::nullopt;
        e.body = ledger::Finished{static_cast<std::int32_t>(*code)};
        return e;
    }
    if (*kind == "FAIL") {
        if (!is_token(last)) return std::nullopt;
        e.body = ledger::Failed{std::string(last)};
        return e;
    }
    return std::nullopt;
}

std::string MemoryLedger::contents() const {
    std::string out;
    for (const auto& l : lines_) out += l;
    return out;
}

FileLedger::FileLedger(const std::filesystem::path& path, bool sync) : sync_(sync) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw std::system_error(errno, std::generic_category(), "open ledger " + path.string());
    }
}

FileLedger::~FileLedger() {
    if (fd_ >= 0) ::close(fd_);
}

void FileLedger::append(const LedgerEvent& e) {
    const std::string line = encode_event(e);
    std::size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::system_error(errno, std::generic_category(), "ledger write");
        }
        off += static_cast<std::size_t>(n);
    }
    if (sync_) ::fdatasync(fd_);
}

Expected<RecoveredState, CorruptLedger> replay(std::string_view contents) {
    RecoveredState st;
    std::size_t line_no = 0;
    while (!contents.empty()) {
        ++line_no;
        std::size_t nl = contents.find('\n');
        if (nl == std::string_view::npos) break;  // torn tail
        std::string_view line = contents.substr(0, nl);
        contents.remove_prefix(nl + 1);
        const bool is_final = contents.empty();

        auto ev = parse_event(line);
        if (!ev) {
            if (is_final) break;
            return Unexpected{CorruptLedger{line_no}};
        }

        auto it = st.jobs.find(ev->job_id);
        const bool ok = std::visit(
            overloaded{
                [&](const ledger::Submitted& s) {
                    if (it != st.jobs.end()) return false;
                    JobRecord r;
                    r.job_id = ev->job_id;
                    r.spec = s.spec;
                    r.submit_ts = ev->ts;
                    r.seq = ++st.max_seq;
                    st.jobs.emplace(r.job_id, std::move(r));
                    st.max_job_id = std::max(st.max_job_id, ev->job_id);
                    return true;
                },
                [&](const ledger::Assigned& a) {
                    if (it == st.jobs.end()) return false;
                    auto next = job_transition(it->second, JobState::Dispatched);
                    if (!next) return false;
                    it->second = std::move(*next);
                    it->second.assigned = a.node;
                    return true;
                },
                [&](const ledger::Finished& f) {
                    if (it == st.jobs.end()) return false;
                    auto next = job_transition(
                        it->second, f.exit_code == 0 ? JobState::Done : JobState::Failed);
                    if (!next) return false;
                    it->second = std::move(*next);
                    it->second.exit_code = f.exit_code;
                    return true;
                },
                [&](const ledger::Failed&) {
                    if (it == st.jobs.end()) return false;
                    auto next = job_transition(it->second, JobState::Failed);
                    if (!next) return false;
                    it->second = std::move(*next);
                    return true;
                },
                [&](const ledger::Lost&) {
                    if (it == st.jobs.end()) return false;
                    auto next = job_transition(it->second, JobState::Lost);
                    if (!next) return false;
                    it->second = std::move(*next);
                    return true;
                },
            },
            ev->body);
        if (!ok) return Unexpected{CorruptLedger{line_no}};
    }

    for (auto& [id, r] : st.jobs) {
        if (r.state == JobState::Dispatched) {
            r.state = JobState::Lost;
            st.lost_on_recovery.push_back(id);
        }
    }
    return st;
}

Expected<RecoveredState, CorruptLedger> recover(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return RecoveredState{};
    std::ostringstream buf;
    buf << in.rdbuf();
    return replay(buf.str());
}

}  // namespace hepinfo
