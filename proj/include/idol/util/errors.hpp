#pragma once

#include <stdexcept>
#include <string>

namespace idol {

// Error categories map onto process exit codes in the command line driver:
// config/usage problems exit 2, data problems exit 3, numeric failures exit 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Shape mismatches between tensor operands.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Misuse of an API that has stateful preconditions (for example running
// backward twice over the same tape).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

} // namespace idol
