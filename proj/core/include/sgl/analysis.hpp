#pragma once

#include <span>
#include <string>
#include <vector>

#include "sgl/types.hpp"

namespace sgl::analysis {

// g(x) = sqrt(1 - x^2) * exp(x / tau): norm scaling of one negative's
// gradient contribution as a function of its cosine similarity x to the
// anchor. Throws DomainError for |x| > 1 or tau <= 0.
double g_of_x(double x, double tau);

// Stationary point (sqrt(tau^2 + 4) - tau) / 2 of g on (-1, 1).
double x_star(double tau);

// ln g(x*) evaluated from its closed form.
double ln_g_star(double tau);

struct CurvePoint {
  double x = 0.0;
  double g = 0.0;
};

struct HardNegativeCurve {
  double tau = 1.0;
  std::vector<CurvePoint> samples;
  double x_star = 0.0;
  double g_star = 0.0;
  double ln_g_star = 0.0;

  // Largest sampled value and where it occurs.
  CurvePoint sampled_max() const;
};

// `resolution` uniform points on [-1, 1], endpoints included.
HardNegativeCurve hard_negative_curve(double tau, int resolution = 2001);

// Gradient of one anchor's InfoNCE term with respect to its anchor-view
// representation, split into the positive contribution c(u) and one
// contribution c(v) per negative.
struct GradientDecomposition {
  Index anchor = 0;
  double tau = 1.0;
  Vector s_anchor;                 // s'_u
  Vector positive;                 // c(u)
  std::vector<Index> negatives;    // candidate rows other than the anchor
  std::vector<Vector> negative_contributions;  // c(v), aligned with `negatives`
  std::vector<double> similarity;  // x_v = s'_u . s''_v, aligned with `negatives`
  std::vector<double> likelihood;  // P_uv, aligned with `negatives`
  double positive_likelihood = 0.0;  // P_uu
  Vector gradient;                 // (c(u) + sum_v c(v)) / (tau * |z'_u|)
};

// `negatives` lists contrast-view rows; the anchor row itself is skipped if
// present. Throws DegenerateRepresentationError on zero-norm inputs.
GradientDecomposition gradient_decomposition(const Matrix& anchor_view, const Matrix& contrast_view,
                                             Index anchor, std::span<const Index> negatives,
                                             double tau);

// Writes g_curve_tau_<tau>.csv (x,g,region) per temperature and
// hard_negative_summary.csv (tau,x_star,g_star,ln_g_star,sampled_max_x,sampled_max_g)
// into `output_dir`. Returns the written paths.
std::vector<std::string> emit_curves(std::span<const double> taus, int resolution,
                                     const std::string& output_dir);

}  // namespace sgl::analysis
