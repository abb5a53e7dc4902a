#pragma once

#include <stdexcept>
#include <string>

namespace nodfuse {

// Bad input or configuration; the CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure while computing on otherwise valid input; exit code 1.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace nodfuse
