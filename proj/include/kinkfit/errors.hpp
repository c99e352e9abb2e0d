#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kinkfit {

// Every failure raised by the library derives from Error and carries a
// stable machine-readable class name used by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string error_class, const std::string& what)
        : std::runtime_error(what), class_(std::move(error_class)) {}
    const std::string& error_class() const noexcept { return class_; }

private:
    std::string class_;
};

#define KINKFIT_ERROR(Name, token)                                          \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(token, what) {}      \
    };

KINKFIT_ERROR(DomainError, "domain")
KINKFIT_ERROR(ValidationError, "validation")
KINKFIT_ERROR(DataError, "data")
KINKFIT_ERROR(InitializationError, "initialization")
KINKFIT_ERROR(IdentifiabilityError, "identifiability")
KINKFIT_ERROR(OptimizationError, "optimization")
KINKFIT_ERROR(BoundaryError, "boundary")
KINKFIT_ERROR(DegenerateDesignError, "degenerate_design")
KINKFIT_ERROR(InferenceError, "inference")
KINKFIT_ERROR(BootstrapError, "bootstrap")
KINKFIT_ERROR(ExportError, "export")
KINKFIT_ERROR(ConfigError, "config")

#undef KINKFIT_ERROR

// Non-finite intermediate while accumulating over observations.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t index)
        : Error("numeric", what + " (observation " + std::to_string(index) + ")"),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace kinkfit
