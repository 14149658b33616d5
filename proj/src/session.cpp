#include "fibo/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "fibo/bo_loop.hpp"
#include "fibo/io_util.hpp"

namespace fibo::session {

using nlohmann::json;
namespace fs = std::filesystem;

std::string session_file(const std::string& dir) { return (fs::path(dir) / "session.json").string(); }

bool session_exists(const std::string& dir) { return fs::exists(session_file(dir)); }

SessionState load_session(const std::string& dir) {
    const json j = json::parse(io::read_text(session_file(dir)));
    SessionState s;
    s.experiment_id = j.at("experiment_id").get<std::string>();
    s.dim = j.at("dim").get<int>();
    for (const auto& b : j.at("bounds")) s.bounds.emplace_back(b[0].get<double>(), b[1].get<double>());
    s.checkpoint_path = j.at("checkpoint").get<std::string>();
    for (const auto& h : j.at("history")) {
        s.history_x.push_back(h.at("x").get<std::vector<double>>());
        s.history_y.push_back(h.at("y").get<double>());
    }
    s.pending = j.at("pending").get<std::vector<std::vector<double>>>();
    s.initial_count = j.value("initial_count", 0);
    require(static_cast<int>(s.bounds.size()) == s.dim, "session: bounds/dim mismatch");
    return s;
}

void save_session(const std::string& dir, const SessionState& s) {
    fs::create_directories(dir);
    json j;
    j["experiment_id"] = s.experiment_id;
    j["dim"] = s.dim;
    json bounds = json::array();
    for (const auto& [lo, hi] : s.bounds) bounds.push_back({lo, hi});
    j["bounds"] = bounds;
    j["checkpoint"] = s.checkpoint_path;
    json history = json::array();
    for (std::size_t i = 0; i < s.history_y.size(); ++i)
        history.push_back({{"x", s.history_x[i]}, {"y", s.history_y[i]}});
    j["history"] = history;
    j["pending"] = s.pending;
    j["initial_count"] = s.initial_count;
    io::atomic_write_text(session_file(dir), j.dump(2) + "\n");
}

SessionLock::SessionLock(const std::string& dir) {
    fs::create_directories(dir);
    const std::string lock_path = (fs::path(dir) / ".lock").string();
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    require(fd_ >= 0, "session: cannot open lock file " + lock_path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        fail("session: another process holds the lock on " + dir);
    }
}

SessionLock::~SessionLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::vector<std::vector<double>> session_suggest(SessionState& state, const model::Model& m, int q,
                                                 std::uint64_t seed, bool force_discard) {
    require(q >= 1, "suggest: q must be >= 1");
    require(state.dim == m.cfg.dim, "suggest: session dimension " + std::to_string(state.dim) +
                                        " does not match checkpoint dimension " +
                                        std::to_string(m.cfg.dim));
    if (!state.pending.empty()) {
        require(force_discard,
                "suggest: a pending batch of " + std::to_string(state.pending.size()) +
                    " points awaits tell (use --force-discard to drop it)");
        state.pending.clear();
    }
    Rng rng(seed);
    std::vector<std::vector<double>> unit_points;
    if (state.history_y.empty()) {
        unit_points = bo::random_suggest(state.dim, q, rng);
    } else {
        Dataset data;
        data.dim = state.dim;
        for (std::size_t i = 0; i < state.history_y.size(); ++i) {
            std::vector<double> u(state.dim);
            for (int j = 0; j < state.dim; ++j) {
                const auto [lo, hi] = state.bounds[j];
                u[j] = (state.history_x[i][j] - lo) / (hi - lo);
                u[j] = std::clamp(u[j], 0.0, 1.0);
            }
            data.push(u, state.history_y[i]);
        }
        unit_points = bo::fibo_suggest(m, data, q, rng);
    }
    std::vector<std::vector<double>> native;
    native.reserve(unit_points.size());
    for (const auto& u : unit_points) {
        std::vector<double> x(state.dim);
        for (int j = 0; j < state.dim; ++j) {
            const auto [lo, hi] = state.bounds[j];
            x[j] = lo + u[j] * (hi - lo);
        }
        native.push_back(std::move(x));
    }
    state.pending = native;
    return native;
}

void session_tell(SessionState& state, const std::vector<double>& values) {
    require(!state.pending.empty(), "tell: no pending batch");
    require(values.size() == state.pending.size(),
            "tell: got " + std::to_string(values.size()) + " values for a pending batch of " +
                std::to_string(state.pending.size()));
    for (double v : values) require(is_finite(v), "tell: non-finite value");
    if (state.history_y.empty()) state.initial_count = static_cast<int>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        state.history_x.push_back(state.pending[i]);
        state.history_y.push_back(values[i]);
    }
    state.pending.clear();
}

SessionStatus session_status(const SessionState& state) {
    SessionStatus st;
    st.history_size = static_cast<int>(state.history_y.size());
    st.pending_size = static_cast<int>(state.pending.size());
    if (!state.history_y.empty()) {
        st.best_y = *std::max_element(state.history_y.begin(), state.history_y.end());
        st.has_best = true;
    }
    return st;
}

}  // namespace fibo::session
