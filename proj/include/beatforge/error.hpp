#pragma once

#include <stdexcept>
#include <string>

namespace beatforge {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    ok = 0,
    usage = 2,
    format = 3,
    contract = 4,
    numeric = 5,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept = 0;
};

class UsageError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// Malformed file or stream content. Messages carry the file name and byte offset when known.
class FormatError : public Error {
public:
    using Error::Error;
    FormatError(const std::string& file, long long offset, const std::string& what)
        : Error(file + ":" + std::to_string(offset) + ": " + what) {}
    ExitCode exit_code() const noexcept override { return ExitCode::format; }
};

// Violated precondition: shape mismatch, bad config, too little data.
class ContractError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::contract; }
};

class DimensionError : public ContractError {
public:
    using ContractError::ContractError;
};

class ConfigError : public ContractError {
public:
    using ContractError::ContractError;
};

// NaN/Inf produced, divergence, undefined cosine.
class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

}  // namespace beatforge
