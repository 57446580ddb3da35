#pragma once

#include <stdexcept>
#include <string>

namespace rw {

// Error categories surfaced through the C API as integer codes.
enum class ErrorCode : int {
    ok = 0,
    invalid_argument = 1,
    shape_mismatch = 2,
    format_version = 3,
    malformed_file = 4,
    io = 5,
    config = 6,
    non_finite = 7,
    out_of_range = 8,
    internal = 99,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void check(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) fail(code, what);
}

}  // namespace rw
