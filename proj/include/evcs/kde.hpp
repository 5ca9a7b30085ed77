#ifndef EVCS_KDE_HPP
#define EVCS_KDE_HPP

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace evcs {

/// Gaussian kernel density estimate
///   f(x) = 1/(n h) * sum_j K((x - x_j) / h).
/// When bounds are given, each kernel is reflected once at both ends and
/// renormalized so the density integrates to exactly one on [lower, upper].
class Kde1D {
 public:
  Kde1D() = default;

  /// Throws std::invalid_argument on an empty sample set or h <= 0.
  static Kde1D fit(std::span<const double> samples, double bandwidth);
  static Kde1D fit_reflected(std::span<const double> samples, double bandwidth, double lower, double upper);

  double density(double x) const;
  double cdf(double x) const;
  double mass(double a, double b) const { return cdf(b) - cdf(a); }
  /// Sample mean; the expectation of the unbounded estimate.
  double mean() const;

  double bandwidth() const { return h_; }
  std::size_t size() const { return static_cast<std::size_t>(samples_.size()); }
  std::vector<double> samples() const { return {samples_.data(), samples_.data() + samples_.size()}; }
  std::optional<std::pair<double, double>> bounds() const { return bounds_; }

 private:
  Eigen::ArrayXd samples_;
  Eigen::ArrayXd weights_;  // per-sample renormalization, ones when unbounded
  double h_ = 1.0;
  std::optional<std::pair<double, double>> bounds_;
};

/// Silverman's rule of thumb 0.9 * min(sd, IQR/1.34) * n^(-1/5), never below `floor`.
double silverman_bandwidth(std::span<const double> samples, double floor);

double normal_cdf(double z);

}  // namespace evcs

#endif  // EVCS_KDE_HPP
