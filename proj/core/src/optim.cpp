#include "sgl/optim.hpp"

#include <cmath>

#include "sgl/error.hpp"

namespace sgl {

Adam::Adam(Index rows, Index cols, AdamOptions options)
    : options_(options), m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

void Adam::step(Matrix& params, const Matrix& grad) {
  if (params.rows() != m_.rows() || params.cols() != m_.cols() || grad.rows() != m_.rows() ||
      grad.cols() != m_.cols()) {
    throw DimensionMismatchError("Adam state shape differs from parameters or gradient");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  params.array() -= options_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + options_.epsilon);
}

}  // namespace sgl
