#pragma once

#include <stdexcept>
#include <string>

namespace fedbba {

// Every library failure derives from Error so callers can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error("invalid input: " + what) {}
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& what) : Error("invalid config: " + what) {}
};

struct DegenerateDistribution : Error {
    explicit DegenerateDistribution(const std::string& what)
        : Error("degenerate distribution: " + what) {}
};

struct DegenerateWeights : Error {
    explicit DegenerateWeights(const std::string& what) : Error("degenerate weights: " + what) {}
};

struct CriterionViolated : Error {
    CriterionViolated(double lambda_max, double required)
        : Error("defense criterion violated: lambda_max=" + std::to_string(lambda_max) +
                " < (R_max + theta)/2 = " + std::to_string(required)),
          lambda_max(lambda_max),
          required(required) {}
    double lambda_max;
    double required;
};

} // namespace fedbba
