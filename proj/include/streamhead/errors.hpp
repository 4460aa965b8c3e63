#pragma once

#include <stdexcept>
#include <string>

namespace streamhead {

// Caller broke a documented precondition (bad shape, index out of range, ...).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string & what) : std::logic_error(what) {}
};

// A training or inference step produced non-finite values; the step was not applied.
class TrainingDivergence : public std::runtime_error {
public:
    explicit TrainingDivergence(const std::string & what) : std::runtime_error(what) {}
};

// Checkpoint / file / config could not be loaded or does not match expectations.
class LoadError : public std::runtime_error {
public:
    explicit LoadError(const std::string & what) : std::runtime_error(what) {}
};

// Pearson correlation requested on fewer than 3 points or zero-variance data.
class UndefinedCorrelation : public std::runtime_error {
public:
    explicit UndefinedCorrelation(const std::string & what) : std::runtime_error(what) {}
};

#define STREAMHEAD_REQUIRE(cond, msg)                                              \
    do {                                                                           \
        if (!(cond)) {                                                             \
            throw ::streamhead::ContractViolation(std::string(__func__) + ": " + (msg)); \
        }                                                                          \
    } while (0)

} // namespace streamhead
