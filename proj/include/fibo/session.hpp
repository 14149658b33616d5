#pragma once

#include <string>
#include <vector>

#include "fibo/model.hpp"

namespace fibo::session {

// Ask-tell experiment state, persisted as plain JSON in a session
// directory. Coordinates in the file are native; the model sees unit-cube
// coordinates through the bounds.
struct SessionState {
    std::string experiment_id;
    int dim = 0;
    std::vector<std::pair<double, double>> bounds;
    std::string checkpoint_path;
    std::vector<std::vector<double>> history_x;
    std::vector<double> history_y;
    std::vector<std::vector<double>> pending;
    int initial_count = 0;  // size of the first resolved batch (GAP baseline)
};

std::string session_file(const std::string& dir);
bool session_exists(const std::string& dir);
SessionState load_session(const std::string& dir);
// write-temp-then-rename; a killed process never corrupts the file
void save_session(const std::string& dir, const SessionState& state);

// One process per session directory (advisory flock).
class SessionLock {
public:
    explicit SessionLock(const std::string& dir);
    ~SessionLock();
    SessionLock(const SessionLock&) = delete;
    SessionLock& operator=(const SessionLock&) = delete;

private:
    int fd_ = -1;
};

// Suggests q native points and marks them pending. With no history the
// batch is the uniform initial design; afterwards it samples the model
// posterior. Errors on an unresolved pending batch unless force_discard.
std::vector<std::vector<double>> session_suggest(SessionState& state, const model::Model& m, int q,
                                                 std::uint64_t seed, bool force_discard);

// Resolves the pending batch; errors (leaving state untouched) if the
// value count does not match.
void session_tell(SessionState& state, const std::vector<double>& values);

struct SessionStatus {
    int history_size = 0;
    int pending_size = 0;
    double best_y = 0.0;
    bool has_best = false;
};

SessionStatus session_status(const SessionState& state);

}  // namespace fibo::session
