#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixforge {

/// Category of a failure. Every error the library raises carries one.
enum class ErrorKind {
    schema,
    cadence,
    domain,
    scale,
    parameter,
    dimension,
    insufficient_data,
    prior,
    initialization,
    sampler,
    fit,
    feasibility,
    undefined_metric,
    configuration,
    parse,
    version,
    bounds,
    key,
    io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::schema: return "schema";
    case ErrorKind::cadence: return "cadence";
    case ErrorKind::domain: return "domain";
    case ErrorKind::scale: return "scale";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::prior: return "prior";
    case ErrorKind::initialization: return "initialization";
    case ErrorKind::sampler: return "sampler";
    case ErrorKind::fit: return "fit";
    case ErrorKind::feasibility: return "feasibility";
    case ErrorKind::undefined_metric: return "undefined_metric";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::parse: return "parse";
    case ErrorKind::version: return "version";
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::key: return "key";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// True for failures caused by bad inputs or configuration rather than numerics.
    bool is_input_error() const noexcept {
        switch (kind_) {
        case ErrorKind::initialization:
        case ErrorKind::sampler:
        case ErrorKind::fit:
        case ErrorKind::undefined_metric:
            return false;
        default:
            return true;
        }
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

} // namespace mixforge
