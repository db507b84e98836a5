// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bayeslora {

/// Broad failure class; maps one-to-one onto CLI exit codes and C API status codes.
enum class ErrorKind {
    validation = 1,
    computation = 2,
    io = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Rejected input: bad shapes, out-of-range arguments, invalid records.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error(ErrorKind::validation, message) {}
};

/// Malformed text input. `line` is 1-based; 0 when not tied to a line.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& message, std::size_t line)
        : ValidationError(line ? message + " (line " + std::to_string(line) + ")" : message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ComputationError : public Error {
public:
    explicit ComputationError(const std::string& message) : Error(ErrorKind::computation, message) {}
};

class NotPositiveDefiniteError : public ComputationError {
public:
    explicit NotPositiveDefiniteError(std::size_t pivot)
        : ComputationError("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// A metric whose value does not exist for the given input (e.g. AUROC on one class).
class UndefinedMetricError : public ComputationError {
public:
    explicit UndefinedMetricError(const std::string& message) : ComputationError(message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

}  // namespace bayeslora
