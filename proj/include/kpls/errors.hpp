#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kpls {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_input : public error {
public:
    using error::error;
};

class invalid_state : public error {
public:
    using error::error;
};

/// Raised by triangular solves; carries the offending diagonal index.
class singular_matrix : public error {
public:
    singular_matrix(const std::string& what, std::size_t index) : error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class numerical_failure : public error {
public:
    using error::error;
};

/// The Krylov basis became numerically collinear; retry with fewer components.
class near_breakdown : public numerical_failure {
public:
    using numerical_failure::numerical_failure;
};

/// A finite-difference oracle could not be evaluated (a perturbed fit broke down).
class oracle_inconclusive : public error {
public:
    using error::error;
};

class selection_failed : public numerical_failure {
public:
    using numerical_failure::numerical_failure;
};

/// Malformed input file; line and column are 1-based, 0 when unknown.
class parse_error : public error {
public:
    parse_error(const std::string& what, std::size_t line, std::size_t column = 0)
        : error(what), line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

} // namespace kpls
