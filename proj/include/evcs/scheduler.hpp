#ifndef EVCS_SCHEDULER_HPP
#define EVCS_SCHEDULER_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "evcs/battery.hpp"

namespace evcs {

struct PriorityEntry {
  int session = -1;  // owner; a different EV on the port resets the entry
  int arrival_step = 0;
  double priority = 0.0;
  double remaining_kwh = 0.0;
  bool eligible = false;  // connected and unfinished
};

/// Cumulative time-energy priority of the EV on each port.
class PriorityLedger {
 public:
  explicit PriorityLedger(int port_count = 0, int m1 = 1, int m2 = 1);

  int port_count() const { return static_cast<int>(entries_.size()); }
  int m1() const { return m1_; }
  int m2() const { return m2_; }
  const std::optional<PriorityEntry>& entry(int port) const { return entries_.at(static_cast<std::size_t>(port)); }
  double priority(int port) const { return entry(port) ? entry(port)->priority : 0.0; }

  /// Adds (k - k_a)^m1 * (E* (1 - E_bar))^m2 for every plugged EV, drops
  /// entries of departed EVs and restarts entries whose port changed hands.
  void accumulate(const StationState& station, int k);

 private:
  int m1_;
  int m2_;
  std::vector<std::optional<PriorityEntry>> entries_;
};

PriorityLedger accumulate_priority(PriorityLedger ledger, const StationState& station, int k);

struct ScheduleDecision {
  std::vector<bool> on;  // per port
  std::uint64_t mode = 0;  // sigma: bit i set when port i is ON (first 64 ports)

  int on_count() const;
};

/// Switches ON the cap_count eligible EVs with the highest priority, ties to
/// the earlier arrival and then the lower port.
ScheduleDecision select(const PriorityLedger& ledger, int cap_count);

/// Uncontrolled baseline: every plugged, unfinished EV is ON.
ScheduleDecision fcfs_select(const StationState& station);

}  // namespace evcs

#endif  // EVCS_SCHEDULER_HPP
