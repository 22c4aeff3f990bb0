#pragma once

#include <stdexcept>
#include <string>

namespace rslab {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, validation = 2, invariant = 3, io = 4 };

class Error : public std::runtime_error {
public:
    Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
    ExitCode code() const { return code_; }

private:
    ExitCode code_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error("usage error: " + w, ExitCode::validation) {}
};

struct ParseError : Error {
    ParseError(const std::string& file, long line, const std::string& w)
        : Error("parse error: " + file + ":" + std::to_string(line) + ": " + w, ExitCode::validation),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

struct DataError : Error {
    explicit DataError(const std::string& w) : Error("data error: " + w, ExitCode::validation) {}
};

struct ResourceError : Error {
    explicit ResourceError(const std::string& w) : Error("resource error: " + w, ExitCode::validation) {}
};

struct UnsupportedError : Error {
    explicit UnsupportedError(const std::string& w) : Error("unsupported: " + w, ExitCode::validation) {}
};

struct PoleError : Error {
    explicit PoleError(const std::string& w) : Error("pole: " + w, ExitCode::validation) {}
};

struct InvariantError : Error {
    explicit InvariantError(const std::string& w) : Error("invariant violated: " + w, ExitCode::invariant) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error("i/o error: " + w, ExitCode::io) {}
};

}  // namespace rslab
