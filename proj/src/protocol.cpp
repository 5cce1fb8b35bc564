#include "hepinfo/protocol.hpp"

#include <charconv>
#include <limits>
#include <type_traits>

namespace hepinfo::proto {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Canonical unsigned decimal: "0" or a nonzero digit followed by digits.
template <class U>
std::optional<U> parse_uint(std::string_view s) {
    static_assert(std::is_unsigned_v<U>);
    if (s.empty() || (s.size() > 1 && s[0] == '0')) return std::nullopt;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    U v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_bounded(std::string_view s, std::int64_t lo, std::int64_t hi) {
    auto v = parse_uint<std::uint64_t>(s);
    if (!v || *v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        return std::nullopt;
    auto i = static_cast<std::int64_t>(*v);
    if (i < lo || i > hi) return std::nullopt;
    return i;
}

constexpr std::int64_t kI32Max = std::numeric_limits<std::int32_t>::max();
constexpr std::int64_t kI64Max = std::numeric_limits<std::int64_t>::max();

std::optional<JobId> parse_job_id(std::string_view s) {
    auto v = parse_uint<std::uint64_t>(s);
    if (!v || *v == 0) return std::nullopt;
    return v;
}

std::optional<std::int32_t> parse_exit_code(std::string_view s) {
    auto v = parse_bounded(s, 0, kI32Max);
    if (!v) return std::nullopt;
    return static_cast<std::int32_t>(*v);
}

DecodeError bad_field(std::size_t i) { return {DecodeError::Kind::BadField, i}; }
DecodeError bad_arity() { return {DecodeError::Kind::BadArity, 0}; }

std::vector<std::string_view> split_spaces(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t sp = s.find(' ', pos);
        if (sp == std::string_view::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, sp - pos));
        pos = sp + 1;
    }
}

// Takes `fixed` space-separated fields followed by a rest-of-line field.
bool split_with_rest(std::string_view s, std::size_t fixed, std::vector<std::string_view>& out) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < fixed; ++i) {
        std::size_t sp = s.find(' ', pos);
        if (sp == std::string_view::npos) return false;
        out.push_back(s.substr(pos, sp - pos));
        pos = sp + 1;
    }
    out.push_back(s.substr(pos));
    return true;
}

using Result = Expected<Message, DecodeError>;

Result decode_register(const std::vector<std::string_view>& f) {
    NodeStatic n;
    if (!is_token(f[0])) return Unexpected{bad_field(1)};
    n.id = std::string(f[0]);
    if (!is_dotted_quad(f[1])) return Unexpected{bad_field(2)};
    n.ip = std::string(f[1]);
    auto cores = parse_bounded(f[2], 1, kI64Max);
    if (!cores) return Unexpected{bad_field(3)};
    n.cpu_cores = *cores;
    auto mem = parse_uint<std::uint64_t>(f[3]);
    if (!mem || *mem == 0) return Unexpected{bad_field(4)};
    n.total_mem_bytes = *mem;
    return Message{Register{std::move(n)}};
}

Result decode_heartbeat(const std::vector<std::string_view>& f) {
    auto id = NodeId::parse(f[0]);
    if (!id) return Unexpected{bad_field(1)};
    auto acr = parse_bounded(f[1], 0, kMaxAcrMilli);
    if (!acr) return Unexpected{bad_field(2)};
    auto amr = parse_uint<std::uint64_t>(f[2]);
    if (!amr) return Unexpected{bad_field(3)};
    auto running = parse_uint<std::uint32_t>(f[3]);
    if (!running) return Unexpected{bad_field(4)};
    return Message{Heartbeat{*id, static_cast<std::int32_t>(*acr), *amr, *running}};
}

Result decode_jobdone(const std::vector<std::string_view>& f) {
    auto id = NodeId::parse(f[0]);
    if (!id) return Unexpected{bad_field(1)};
    auto job = parse_job_id(f[1]);
    if (!job) return Unexpected{bad_field(2)};
    auto code = parse_exit_code(f[2]);
    if (!code) return Unexpected{bad_field(3)};
    return Message{JobDone{*id, *job, *code}};
}

// Validates user/workdir/command starting at field index `first`.
std::optional<DecodeError> decode_spec(const std::vector<std::string_view>& f, std::size_t at,
                                       JobSpec& spec) {
    if (!is_token(f[at])) return bad_field(at + 1);
    if (!is_valid_workdir(f[at + 1])) return bad_field(at + 2);
    if (!is_valid_free_text(f[at + 2])) return bad_field(at + 3);
    spec = JobSpec{std::string(f[at]), std::string(f[at + 1]), std::string(f[at + 2])};
    return std::nullopt;
}

Result decode_state(const std::vector<std::string_view>& f) {
    StateRow row;
    auto job = parse_job_id(f[0]);
    if (!job) return Unexpected{bad_field(1)};
    row.job_id = *job;
    auto st = parse_job_state(f[1]);
    if (!st) return Unexpected{bad_field(2)};
    row.state = *st;
    if (f[2] != "-") {
        auto id = NodeId::parse(f[2]);
        if (!id) return Unexpected{bad_field(3)};
        row.node = *id;
    }
    auto ts = parse_bounded(f[3], 0, kI64Max);
    if (!ts) return Unexpected{bad_field(4)};
    row.submit_ts = *ts;
    if (f[4] != "-") {
        auto code = parse_exit_code(f[4]);
        if (!code) return Unexpected{bad_field(5)};
        row.exit_code = *code;
    }
    return Message{std::move(row)};
}

Result decode_node_row(const std::vector<std::string_view>& f) {
    auto id = NodeId::parse(f[0]);
    if (!id) return Unexpected{bad_field(1)};
    if (!is_dotted_quad(f[1])) return Unexpected{bad_field(2)};
    auto acr = parse_bounded(f[2], 0, kMaxAcrMilli);
    if (!acr) return Unexpected{bad_field(3)};
    auto amr = parse_uint<std::uint64_t>(f[3]);
    if (!amr) return Unexpected{bad_field(4)};
    auto running = parse_uint<std::uint32_t>(f[4]);
    if (!running) return Unexpected{bad_field(5)};
    auto age = parse_bounded(f[5], 0, kI64Max);
    if (!age) return Unexpected{bad_field(6)};
    bool eligible;
    if (f[6] == "yes") {
        eligible = true;
    } else if (f[6] == "no") {
        eligible = false;
    } else {
        return Unexpected{bad_field(7)};
    }
    return Message{NodeRow{*id, std::string(f[1]), static_cast<std::int32_t>(*acr), *amr, *running,
                           *age, eligible}};
}

struct Shape {
    std::string_view keyword;
    std::size_t fixed;  // fields before the optional rest-of-line field
    bool rest;
};

constexpr Shape kShapes[] = {
    {"REGISTER", 4, false}, {"HEARTBEAT", 4, false}, {"JOBDONE", 3, false},
    {"SUBMIT", 2, true},    {"STATUS", 1, false},    {"NODES", 0, false},
    {"JOBS", 0, false},     {"DISPATCH", 3, true},   {"JOBID", 1, false},
    {"STATE", 5, false},    {"NODE", 7, false},      {"OK", 0, false},
    {"ERR", 1, true},
};

void append_spec(std::string& out, const JobSpec& s) {
    out += s.user;
    out += ' ';
    out += s.workdir;
    out += ' ';
    out += s.command;
}

}  // namespace

std::string_view keyword(const Message& m) {
    return kShapes[m.index()].keyword;
}

std::string encode(const Message& m) {
    std::string out(keyword(m));
    auto field = [&out](const auto& v) {
        out += ' ';
        if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>) {
            out += std::to_string(v);
        } else {
            out += v;
        }
    };
    std::visit(overloaded{
                   [&](const Register& r) {
                       field(r.node.id);
                       field(r.node.ip);
                       field(r.node.cpu_cores);
                       field(r.node.total_mem_bytes);
                   },
                   [&](const Heartbeat& h) {
                       field(h.node.str());
                       field(h.acr_milli);
                       field(h.amr_bytes);
                       field(h.running_jobs);
                   },
                   [&](const JobDone& d) {
                       field(d.node.str());
                       field(d.job_id);
                       field(d.exit_code);
                   },
                   [&](const Submit& s) {
                       out += ' ';
                       append_spec(out, s.spec);
                   },
                   [&](const StatusQuery& s) { field(s.job_id); },
                   [&](const NodesQuery&) {},
                   [&](const JobsQuery&) {},
                   [&](const Dispatch& d) {
                       field(d.job_id);
                       out += ' ';
                       append_spec(out, d.spec);
                   },
                   [&](const JobIdReply& j) { field(j.job_id); },
                   [&](const StateRow& s) {
                       field(s.job_id);
                       field(std::string(to_string(s.state)));
                       field(s.node ? s.node->str() : std::string("-"));
                       field(s.submit_ts);
                       field(s.exit_code ? std::to_string(*s.exit_code) : std::string("-"));
                   },
                   [&](const NodeRow& n) {
                       field(n.node.str());
                       field(n.ip);
                       field(n.acr_milli);
                       field(n.amr_bytes);
                       field(n.running_jobs);
                       field(n.age_ms);
                       field(std::string(n.eligible ? "yes" : "no"));
                   },
                   [&](const Ok&) {},
                   [&](const Err& e) {
                       field(e.code);
                       field(e.text);
                   },
               },
               m);
    out += '\n';
    return out;
}

std::string describe(const DecodeError& e) {
    switch (e.kind) {
        case DecodeError::Kind::UnknownKeyword: return "unknown keyword";
        case DecodeError::Kind::BadArity: return "wrong number of fields";
        case DecodeError::Kind::BadField: return "bad field " + std::to_string(e.index);
    }
    return "?";
}

Expected<Message, DecodeError> decode(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);

    std::size_t sp = line.find(' ');
    std::string_view kw = line.substr(0, sp);
    std::string_view body = sp == std::string_view::npos ? std::string_view{} : line.substr(sp + 1);

    const Shape* shape = nullptr;
    for (const auto& s : kShapes) {
        if (s.keyword == kw) {
            shape = &s;
            break;
        }
    }
    if (!shape) return Unexpected{DecodeError{DecodeError::Kind::UnknownKeyword, 0}};

    if (shape->fixed == 0 && !shape->rest) {
        if (sp != std::string_view::npos) return Unexpected{bad_arity()};
        if (kw == "NODES") return Message{NodesQuery{}};
        if (kw == "JOBS") return Message{JobsQuery{}};
        return Message{Ok{}};
    }
    if (sp == std::string_view::npos) return Unexpected{bad_arity()};

    std::vector<std::string_view> f;
    if (shape->rest) {
        if (!split_with_rest(body, shape->fixed, f)) return Unexpected{bad_arity()};
    } else {
        f = split_spaces(body);
        if (f.size() != shape->fixed) return Unexpected{bad_arity()};
    }

    if (kw == "REGISTER") return decode_register(f);
    if (kw == "HEARTBEAT") return decode_heartbeat(f);
    if (kw == "JOBDONE") return decode_jobdone(f);
    if (kw == "SUBMIT") {
        Submit s;
        if (auto e = decode_spec(f, 0, s.spec)) return Unexpected{*e};
        return Message{std::move(s)};
    }
    if (kw == "STATUS" || kw == "JOBID") {
        auto job = parse_job_id(f[0]);
        if (!job) return Unexpected{bad_field(1)};
        if (kw == "STATUS") return Message{StatusQuery{*job}};
        return Message{JobIdReply{*job}};
    }
    if (kw == "DISPATCH") {
        Dispatch d;
        auto job = parse_job_id(f[0]);
        if (!job) return Unexpected{bad_field(1)};
        d.job_id = *job;
        if (auto e = decode_spec(f, 1, d.spec)) return Unexpected{*e};
        return Message{std::move(d)};
    }
    if (kw == "STATE") return decode_state(f);
    if (kw == "NODE") return decode_node_row(f);

    // ERR
    if (!is_token(f[0])) return Unexpected{bad_field(1)};
    if (!is_valid_free_text(f[1])) return Unexpected{bad_field(2)};
    return Message{Err{std::string(f[0]), std::string(f[1])}};
}

std::string_view to_string(FrameError e) noexcept {
    switch (e) {
        case FrameError::LineTooLong: return "LineTooLong";
        case FrameError::TruncatedFinalLine: return "TruncatedFinalLine";
    }
    return "?";
}

Expected<std::vector<std::string>, FrameError> FrameReader::feed(std::string_view bytes) {
    if (failed_) return Unexpected{FrameError::LineTooLong};
    std::vector<std::string> lines;
    while (!bytes.empty()) {
        std::size_t nl = bytes.find('\n');
        std::string_view chunk = bytes.substr(0, nl);
        if (pending_.size() + chunk.size() > kMaxLineBytes) {
            failed_ = true;
            pending_.clear();
            return Unexpected{FrameError::LineTooLong};
        }
        pending_.append(chunk);
        if (nl == std::string_view::npos) break;
        lines.push_back(std::move(pending_));
        pending_.clear();
        bytes.remove_prefix(nl + 1);
    }
    return lines;
}

Status<FrameError> FrameReader::finish() const {
    if (failed_) return Unexpected{FrameError::LineTooLong};
    if (!pending_.empty()) return Unexpected{FrameError::TruncatedFinalLine};
    return {};
}

}  // namespace hepinfo::proto
