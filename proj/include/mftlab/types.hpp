#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mft {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Wealth domain of the control problem. `positive` problems are solved and
/// simulated in the log coordinate q = ln X.
enum class Domain { reals, positive };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// Bad caller input: wrong dimensions, out-of-range parameters.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy answer
/// (singular or badly conditioned matrix, non-finite values).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mft
