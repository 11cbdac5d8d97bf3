#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace igplvm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when inputs violate a documented precondition (non-finite data,
/// invalid hyperparameters, shape mismatches).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Thrown when a numerical step fails (Cholesky breakdown, singular matrix).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_finite(const Matrix& m, const char* name) {
    if (!m.allFinite())
        throw DomainError(std::string(name) + " contains non-finite entries");
}

}  // namespace igplvm
