#include "hepinfo/core.hpp"

#include <chrono>
#include <cstdint>

namespace hepinfo {

namespace {

bool is_token_char(char c) noexcept {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
}

// Validates UTF-8 structure, rejecting overlongs and surrogates.
bool is_utf8(std::string_view s) noexcept {
    std::size_t i = 0;
    while (i < s.size()) {
        auto b = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (b < 0x80) {
            ++i;
            continue;
        } else if ((b & 0xE0) == 0xC0) {
            len = 2;
            cp = b & 0x1F;
        } else if ((b & 0xF0) == 0xE0) {
            len = 3;
            cp = b & 0x0F;
        } else if ((b & 0xF8) == 0xF0) {
            len = 4;
            cp = b & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            auto c = static_cast<unsigned char>(s[i + k]);
            if ((c & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (c & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

}  // namespace

bool is_token(std::string_view s) noexcept {
    if (s.empty()) return false;
    for (char c : s) {
        if (!is_token_char(c)) return false;
    }
    return true;
}

bool is_dotted_quad(std::string_view s) noexcept {
    int octets = 0;
    std::size_t pos = 0;
    while (true) {
        std::size_t end = s.find('.', pos);
        std::string_view part = s.substr(pos, end == std::string_view::npos ? s.npos : end - pos);
        if (part.empty() || part.size() > 3) return false;
        if (part.size() > 1 && part[0] == '0') return false;
        int v = 0;
        for (char c : part) {
            if (c < '0' || c > '9') return false;
            v = v * 10 + (c - '0');
        }
        if (v > 255) return false;
        ++octets;
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return octets == 4;
}

std::optional<NodeId> NodeId::parse(std::string_view s) {
    // "-" marks an absent node in STATE rows.
    if (!is_token(s) || s == "-") return std::nullopt;
    return NodeId(std::string(s));
}

std::string_view to_string(NodeError e) noexcept {
    switch (e) {
        case NodeError::BadId: return "BadId";
        case NodeError::BadIp: return "BadIp";
        case NodeError::BadCores: return "BadCores";
        case NodeError::BadMem: return "BadMem";
    }
    return "?";
}

Status<NodeError> validate_node_static(const NodeStatic& s) {
    if (!NodeId::parse(s.id)) return Unexpected{NodeError::BadId};
    if (!is_dotted_quad(s.ip)) return Unexpected{NodeError::BadIp};
    if (s.cpu_cores < 1) return Unexpected{NodeError::BadCores};
    if (s.total_mem_bytes < 1) return Unexpected{NodeError::BadMem};
    return {};
}

bool is_valid_acr(std::int64_t acr_milli) noexcept {
    return acr_milli >= 0 && acr_milli <= kMaxAcrMilli;
}

bool is_valid_workdir(std::string_view s) noexcept {
    if (s.empty() || s.front() != '/') return false;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || u == 0x7F) return false;
    }
    return is_utf8(s);
}

bool is_valid_free_text(std::string_view s) noexcept {
    if (s.empty()) return false;
    for (char c : s) {
        if (c == '\n' || c == '\r' || c == '\0') return false;
    }
    return is_utf8(s);
}

bool is_valid_job_spec(const JobSpec& s) noexcept {
    return is_token(s.user) && is_valid_workdir(s.workdir) && is_valid_free_text(s.command);
}

std::string_view to_string(JobState s) noexcept {
    switch (s) {
        case JobState::Queued: return "QUEUED";
        case JobState::Dispatched: return "DISPATCHED";
        case JobState::Done: return "DONE";
        case JobState::Failed: return "FAILED";
        case JobState::Lost: return "LOST";
    }
    return "?";
}

std::optional<JobState> parse_job_state(std::string_view s) noexcept {
    for (JobState st : kAllJobStates) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

bool is_legal_transition(JobState from, JobState to) noexcept {
    switch (from) {
        case JobState::Queued:
            return to == JobState::Dispatched || to == JobState::Failed;
        case JobState::Dispatched:
            return to == JobState::Done || to == JobState::Failed || to == JobState::Lost;
        default:
            return false;
    }
}

bool is_terminal(JobState s) noexcept {
    return s == JobState::Done || s == JobState::Failed || s == JobState::Lost;
}

Expected<JobRecord, TransitionError> job_transition(JobRecord r, JobState to) {
    if (!is_legal_transition(r.state, to)) return Unexpected{TransitionError{r.state, to}};
    r.state = to;
    return r;
}

std::optional<std::string> validate_config(const Config& cfg) {
    if (cfg.heartbeat_interval_ms <= 0) return "heartbeat interval must be positive";
    if (cfg.stale_after_ms < cfg.heartbeat_interval_ms)
        return "stale window must be at least the heartbeat interval";
    if (cfg.dispatch_penalty_milli < 0) return "dispatch penalty must be non-negative";
    if (!is_valid_workdir(cfg.workspace_root)) return "workspace root must be an absolute path";
    return std::nullopt;
}

EpochMs SystemClock::now() {
    using namespace std::chrono;
    EpochMs t = duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    EpochMs prev = last_.load();
    while (t > prev && !last_.compare_exchange_weak(prev, t)) {
    }
    return t > prev ? t : prev;
}

}  // namespace hepinfo
