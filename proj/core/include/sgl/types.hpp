#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace sgl {

using Index = std::int64_t;

// Node embeddings and representations are stored one node per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace sgl
