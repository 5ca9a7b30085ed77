#include "evcs/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace evcs {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace {

Eigen::ArrayXd phi(const Eigen::ArrayXd& z) { return (-0.5 * z.square()).exp() / std::sqrt(2.0 * std::numbers::pi); }

Eigen::ArrayXd big_phi(const Eigen::ArrayXd& z) {
  return z.unaryExpr([](double v) { return normal_cdf(v); });
}

}  // namespace

Kde1D Kde1D::fit(std::span<const double> samples, double bandwidth) {
  if (samples.empty()) throw std::invalid_argument("kernel density needs at least one sample");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  Kde1D k;
  k.samples_ = Eigen::Map<const Eigen::ArrayXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  k.weights_ = Eigen::ArrayXd::Ones(k.samples_.size());
  k.h_ = bandwidth;
  return k;
}

Kde1D Kde1D::fit_reflected(std::span<const double> samples, double bandwidth, double lower, double upper) {
  if (!(upper > lower)) throw std::invalid_argument("empty support");
  Kde1D k = fit(samples, bandwidth);
  k.samples_ = k.samples_.cwiseMax(lower).cwiseMin(upper);
  k.bounds_ = std::make_pair(lower, upper);
  // Mass of the three images over [lower, upper] equals the mass of the
  // original kernel over [2 lower - upper, 2 upper - lower].
  const double h = bandwidth;
  k.weights_ = 1.0 / (big_phi((2.0 * upper - lower - k.samples_) / h) - big_phi((2.0 * lower - upper - k.samples_) / h));
  return k;
}

double Kde1D::density(double x) const {
  const double n = static_cast<double>(samples_.size());
  if (!bounds_) return (weights_ * phi((x - samples_) / h_)).sum() / (n * h_);
  const auto [lo, hi] = *bounds_;
  if (x < lo || x > hi) return 0.0;
  const Eigen::ArrayXd k = phi((x - samples_) / h_) + phi((x - (2.0 * lo - samples_)) / h_) +
                           phi((x - (2.0 * hi - samples_)) / h_);
  return (weights_ * k).sum() / (n * h_);
}

double Kde1D::cdf(double x) const {
  const double n = static_cast<double>(samples_.size());
  if (!bounds_) return (weights_ * big_phi((x - samples_) / h_)).sum() / n;
  const auto [lo, hi] = *bounds_;
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const auto image_mass = [&](const Eigen::ArrayXd& centre) -> Eigen::ArrayXd {
    return big_phi((x - centre) / h_) - big_phi((lo - centre) / h_);
  };
  const Eigen::ArrayXd m = image_mass(samples_) + image_mass(2.0 * lo - samples_) + image_mass(2.0 * hi - samples_);
  return std::clamp((weights_ * m).sum() / n, 0.0, 1.0);
}

double Kde1D::mean() const { return samples_.mean(); }

double silverman_bandwidth(std::span<const double> samples, double floor) {
  const std::size_t n = samples.size();
  if (n < 2) return floor;
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const Eigen::Map<const Eigen::ArrayXd> a(v.data(), static_cast<Eigen::Index>(n));
  const double sd = std::sqrt((a - a.mean()).square().sum() / static_cast<double>(n - 1));
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, n - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return std::max(h, floor);
}

}  // namespace evcs
