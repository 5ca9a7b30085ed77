// Random small instances paired with their brute-force formulation.
#ifndef EVCS_TESTS_INSTANCES_HPP
#define EVCS_TESTS_INSTANCES_HPP

#include <random>

#include "evcs/economic.hpp"
#include "oracles.hpp"

namespace testgen {

struct DpCase {
  evcs::EnergyEnvelope envelope;
  Eigen::VectorXd price;
  Eigen::VectorXi cap;
  Eigen::VectorXd departed;  // b(k), S2 only
  double w = 0.0;
  double e0 = 0.0;
  double step = 1.0;
  int k0 = 0;
};

/// Integer-valued envelopes and prices on a dyadic step so every cost is
/// exact in floating point.
inline DpCase random_dp_case(std::mt19937& rng, int max_ports = 4, int max_slots = 12) {
  std::uniform_int_distribution<int> slots(1, max_slots), ports(1, max_ports), price(0, 9), coin(0, 3);
  const double steps[] = {0.5, 1.0, 2.0};
  DpCase c;
  const int H = slots(rng);
  const int n = ports(rng);
  c.step = steps[std::uniform_int_distribution<int>(0, 2)(rng)];
  c.k0 = std::uniform_int_distribution<int>(0, H - 1)(rng);
  c.e0 = c.step * std::uniform_int_distribution<int>(0, 3)(rng);
  c.price.resize(H);
  c.cap.resize(H);
  for (int j = 0; j < H; ++j) {
    c.price(j) = price(rng);
    c.cap(j) = std::uniform_int_distribution<int>(coin(rng) == 0 ? 0 : 1, n)(rng);
  }
  // Envelope in whole steps around the start; occasionally infeasible.
  c.envelope = evcs::EnergyEnvelope::zero(H);
  // A negative start puts the measured state above the upper bound for a while.
  long hi = -std::uniform_int_distribution<long>(0, 1)(rng) * std::uniform_int_distribution<long>(0, 2)(rng);
  long lo = hi;
  for (int j = 0; j <= H; ++j) {
    if (j > 0) {
      hi += std::uniform_int_distribution<long>(0, n)(rng);
      lo += std::uniform_int_distribution<long>(0, std::max(n - 1, 1))(rng);
      lo = std::min(lo, hi);
    }
    c.envelope.e_max(j) = std::max(c.e0 + c.step * static_cast<double>(hi), 0.0);
    c.envelope.e_min(j) = std::max(c.e0 + c.step * static_cast<double>(lo), 0.0);
  }
  c.departed.resize(H + 1);
  int b = 0;
  for (int j = 0; j <= H; ++j) {
    b += coin(rng) == 0 ? 1 : 0;
    c.departed(j) = b;
  }
  c.w = 0.25 * std::uniform_int_distribution<int>(0, 4)(rng);
  return c;
}

inline long steps_from(double energy, double e0, double step) { return std::lround((energy - e0) / step); }

inline oracle::GridProblem grid_s1(const DpCase& c) {
  const int H = static_cast<int>(c.price.size());
  oracle::GridProblem g;
  g.k0 = c.k0;
  for (int j = 0; j <= H; ++j) {
    g.upper.push_back(steps_from(c.envelope.e_max(j), c.e0, c.step));
    g.lower.push_back(std::max(steps_from(c.envelope.e_min(j), c.e0, c.step), 0L));
  }
  for (int j = 0; j < H; ++j) {
    g.price.push_back(c.step * c.price(j));
    g.cap.push_back(c.cap(j));
  }
  return g;
}

inline oracle::GridProblem grid_s2(const DpCase& c) {
  oracle::GridProblem g = grid_s1(c);
  g.lower.clear();
  for (Eigen::Index j = 0; j < c.departed.size(); ++j) g.weight.push_back(c.w * c.departed(j));
  return g;
}

}  // namespace testgen

#endif  // EVCS_TESTS_INSTANCES_HPP
