#include "sgl/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sgl/error.hpp"

namespace sgl::analysis {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0)) throw DomainError("temperature must be positive");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string tau_label(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", tau);
  return buf;
}

}  // namespace

double g_of_x(double x, double tau) {
  check_tau(tau);
  if (!(std::abs(x) <= 1.0)) throw DomainError("g(x) requires |x| <= 1");
  return std::sqrt(1.0 - x * x) * std::exp(x / tau);
}

double x_star(double tau) {
  check_tau(tau);
  return (std::sqrt(tau * tau + 4.0) - tau) / 2.0;
}

double ln_g_star(double tau) {
  check_tau(tau);
  const double r = (std::sqrt(tau * tau + 4.0) - tau) / 2.0;
  // ln( sqrt(1 - r^2) * exp(r / tau) ), expanded to avoid overflow at small tau.
  return 0.5 * std::log(1.0 - r * r) + (std::sqrt(tau * tau + 4.0) - tau) / (2.0 * tau);
}

CurvePoint HardNegativeCurve::sampled_max() const {
  CurvePoint best{0.0, -1.0};
  for (const auto& p : samples) {
    if (p.g > best.g) best = p;
  }
  return best;
}

HardNegativeCurve hard_negative_curve(double tau, int resolution) {
  check_tau(tau);
  if (resolution < 2) throw DomainError("curve resolution must be at least 2");
  HardNegativeCurve curve;
  curve.tau = tau;
  curve.samples.reserve(resolution);
  for (int k = 0; k < resolution; ++k) {
    // Endpoints are exact so g(-1) = g(1) = 0 appear on every grid.
    double x = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(resolution - 1);
    if (k == resolution - 1) x = 1.0;
    curve.samples.push_back({x, g_of_x(x, tau)});
  }
  curve.x_star = x_star(tau);
  curve.g_star = g_of_x(curve.x_star, tau);
  curve.ln_g_star = ln_g_star(tau);
  return curve;
}

GradientDecomposition gradient_decomposition(const Matrix& anchor_view, const Matrix& contrast_view,
                                             Index anchor, std::span<const Index> negatives,
                                             double tau) {
  check_tau(tau);
  auto unit = [](const auto& row, Index id) {
    const double n = row.norm();
    if (n == 0.0) {
      throw DegenerateRepresentationError("zero-norm representation for node " + std::to_string(id));
    }
    return Vector(row.transpose() / n);
  };
  GradientDecomposition out;
  out.anchor = anchor;
  out.tau = tau;
  const double anchor_norm = anchor_view.row(anchor).norm();
  out.s_anchor = unit(anchor_view.row(anchor), anchor);
  const Vector s_pos = unit(contrast_view.row(anchor), anchor);
  const double x_pos = out.s_anchor.dot(s_pos);

  std::vector<Vector> s_neg;
  for (Index v : negatives) {
    if (v == anchor) continue;
    out.negatives.push_back(v);
    s_neg.push_back(unit(contrast_view.row(v), v));
    out.similarity.push_back(out.s_anchor.dot(s_neg.back()));
  }

  // Likelihoods over {u} and the negatives, with the max logit subtracted.
  double mx = x_pos / tau;
  for (double x : out.similarity) mx = std::max(mx, x / tau);
  double denom = std::exp(x_pos / tau - mx);
  for (double x : out.similarity) denom += std::exp(x / tau - mx);
  out.positive_likelihood = std::exp(x_pos / tau - mx) / denom;
  for (double x : out.similarity) out.likelihood.push_back(std::exp(x / tau - mx) / denom);

  out.positive = (s_pos - x_pos * out.s_anchor) * (out.positive_likelihood - 1.0);
  Vector sum = out.positive;
  for (std::size_t k = 0; k < s_neg.size(); ++k) {
    out.negative_contributions.push_back((s_neg[k] - out.similarity[k] * out.s_anchor) *
                                         out.likelihood[k]);
    sum += out.negative_contributions.back();
  }
  out.gradient = sum / (tau * anchor_norm);
  return out;
}

std::vector<std::string> emit_curves(std::span<const double> taus, int resolution,
                                     const std::string& output_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(output_dir);
  std::vector<std::string> written;
  const std::string summary_path = (fs::path(output_dir) / "hard_negative_summary.csv").string();
  std::ofstream summary(summary_path);
  if (!summary) throw Error("cannot open " + summary_path + " for writing");
  summary << "tau,x_star,g_star,ln_g_star,sampled_max_x,sampled_max_g\n";
  for (double tau : taus) {
    const auto curve = hard_negative_curve(tau, resolution);
    const std::string path =
        (fs::path(output_dir) / ("g_curve_tau_" + tau_label(tau) + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "x,g,region\n";
    for (const auto& p : curve.samples) {
      const char* region = p.x > 0.0 ? "hard" : (p.x < 0.0 ? "easy" : "boundary");
      out << format_double(p.x) << ',' << format_double(p.g) << ',' << region << '\n';
    }
    if (!out) throw Error("failed writing " + path);
    written.push_back(path);
    const auto best = curve.sampled_max();
    summary << format_double(tau) << ',' << format_double(curve.x_star) << ','
            << format_double(curve.g_star) << ',' << format_double(curve.ln_g_star) << ','
            << format_double(best.x) << ',' << format_double(best.g) << '\n';
  }
  if (!summary) throw Error("failed writing " + summary_path);
  written.push_back(summary_path);
  return written;
}

}  // namespace sgl::analysis
