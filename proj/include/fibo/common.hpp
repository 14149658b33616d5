#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace fibo {

class FiboError : public std::runtime_error {
public:
    explicit FiboError(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw FiboError(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

inline bool is_finite(double v) { return std::isfinite(v); }

}  // namespace fibo
