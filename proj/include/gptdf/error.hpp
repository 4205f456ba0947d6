#pragma once

#include <stdexcept>
#include <string>

namespace gptdf {

/// Error categories, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
    Usage = 2,      // bad arguments, missing files, malformed config
    Data = 3,       // input data violates a contract
    Numerical = 4,  // linear algebra or optimizer failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void usage_error(const std::string &what) { throw Error(ErrorKind::Usage, what); }
[[noreturn]] inline void data_error(const std::string &what) { throw Error(ErrorKind::Data, what); }
[[noreturn]] inline void numerical_error(const std::string &what) { throw Error(ErrorKind::Numerical, what); }

}  // namespace gptdf
