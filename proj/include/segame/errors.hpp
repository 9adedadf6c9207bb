#pragma once

#include <stdexcept>
#include <string>

namespace segame {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// geometry
struct NonConvexInput : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };

// sensing
struct NotDirectional : Error { using Error::Error; };

// optimizer
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteObjective : Error { using Error::Error; };

// attacker
struct NoPathFound : Error { using Error::Error; };
struct InfeasibleSpec : Error { using Error::Error; };
struct InfeasibleInit : Error { using Error::Error; };

// harness
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error {
    std::string field;
    ValidationError(std::string field_path, const std::string& what_)
        : Error(field_path + ": " + what_), field(std::move(field_path)) {}
};
struct ScenarioInvalid : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace segame
