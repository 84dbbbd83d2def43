#pragma once

#include <cstdint>

#include "sgl/types.hpp"

namespace sgl {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Dense Adam with bias correction. Moment buffers match the parameter shape.
class Adam {
 public:
  Adam() = default;
  Adam(Index rows, Index cols, AdamOptions options = {});

  void step(Matrix& params, const Matrix& grad);

  std::int64_t steps() const { return steps_; }
  const Matrix& first_moment() const { return m_; }
  const Matrix& second_moment() const { return v_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  Matrix m_;
  Matrix v_;
  std::int64_t steps_ = 0;
};

}  // namespace sgl
