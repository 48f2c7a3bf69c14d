#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfmate {

using Index = std::int64_t;
using NodeId = std::int32_t;
using Label = std::int32_t;

/// Dense row-major matrix. Rows are nodes (or classes), columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

constexpr Label kUnlabeled = -1;

/// Bad input data: malformed files, dimension mismatches, invalid arguments.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value or otherwise failed numerically.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledNode {
    NodeId node;
    Label label;

    friend bool operator==(const LabeledNode&, const LabeledNode&) = default;
};

}  // namespace gfmate
