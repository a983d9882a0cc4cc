/**
 * Exception types shared by every geopro module.
 *
 * Callers catch by category: contract/dimension errors are caller bugs,
 * data/parse errors come from input files, numeric errors from training.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geopro {

/// Violated precondition of an operation.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operand shapes are incompatible.
class DimensionError : public ContractError {
public:
    using ContractError::ContractError;
};

/// Operation invoked in the wrong lifecycle state (spent tape, missing grad).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// NaN/Inf produced where finite values are required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Point set too degenerate for superposition.
class DegeneracyError : public std::runtime_error {
public:
    DegeneracyError(const std::string& what, int rank)
        : std::runtime_error(what), rank_(rank) {}
    int rank() const noexcept { return rank_; }

private:
    int rank_;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data is missing or inconsistent.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace geopro
