#pragma once

#include <stdexcept>
#include <string>

namespace ascentry {

/// Input outside the mathematical domain of an operation (NaN, singular angle, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller violated a structural precondition (wrong grid, mismatched sizes).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class RankDeficiencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bank angle / azimuth undefined in vertical flight.
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration; `what()` carries file/line context.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A callback produced NaN/Inf. Coordinates locate the offending row.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, long row, int phase = -1, int interval = -1,
                   int node = -1)
        : std::runtime_error(what), row_(row), phase_(phase), interval_(interval), node_(node) {}

    long row() const noexcept { return row_; }
    int phase() const noexcept { return phase_; }
    int interval() const noexcept { return interval_; }
    int node() const noexcept { return node_; }

private:
    long row_;
    int phase_;
    int interval_;
    int node_;
};

} // namespace ascentry
