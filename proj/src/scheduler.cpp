#include "evcs/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace evcs {

namespace {

double int_pow(double base, int exp) {
  double r = 1.0;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

ScheduleDecision from_flags(std::vector<bool> on) {
  ScheduleDecision d;
  for (std::size_t i = 0; i < on.size() && i < 64; ++i) {
    if (on[i]) d.mode |= std::uint64_t{1} << i;
  }
  d.on = std::move(on);
  return d;
}

}  // namespace

PriorityLedger::PriorityLedger(int port_count, int m1, int m2)
    : m1_(m1), m2_(m2), entries_(static_cast<std::size_t>(std::max(port_count, 0))) {
  if (m1 < 0 || m2 < 0) throw std::invalid_argument("priority exponents must be non-negative");
}

void PriorityLedger::accumulate(const StationState& station, int k) {
  if (station.port_count() != port_count()) throw std::invalid_argument("ledger and station port counts differ");
  for (int i = 0; i < port_count(); ++i) {
    auto& slot = entries_[static_cast<std::size_t>(i)];
    const auto& ev = station.port(i);
    if (!ev) {
      slot.reset();
      continue;
    }
    if (!slot || slot->session != ev->session) {
      slot = PriorityEntry{ev->session, ev->arrival_step, 0.0, 0.0, false};
    }
    slot->remaining_kwh = ev->remaining_kwh();
    slot->eligible = !ev->finished();
    if (slot->eligible) {
      slot->priority += int_pow(std::max(k - ev->arrival_step, 0), m1_) * int_pow(slot->remaining_kwh, m2_);
    }
  }
}

PriorityLedger accumulate_priority(PriorityLedger ledger, const StationState& station, int k) {
  ledger.accumulate(station, k);
  return ledger;
}

int ScheduleDecision::on_count() const { return static_cast<int>(std::count(on.begin(), on.end(), true)); }

ScheduleDecision select(const PriorityLedger& ledger, int cap_count) {
  if (cap_count < 0) throw std::invalid_argument("cap count must be non-negative");
  std::vector<int> candidates;
  for (int i = 0; i < ledger.port_count(); ++i) {
    if (ledger.entry(i) && ledger.entry(i)->eligible) candidates.push_back(i);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(cap_count), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                    [&](int a, int b) {
                      const auto& ea = *ledger.entry(a);
                      const auto& eb = *ledger.entry(b);
                      if (ea.priority != eb.priority) return ea.priority > eb.priority;
                      if (ea.arrival_step != eb.arrival_step) return ea.arrival_step < eb.arrival_step;
                      return a < b;
                    });
  std::vector<bool> on(static_cast<std::size_t>(ledger.port_count()), false);
  for (std::size_t i = 0; i < take; ++i) on[static_cast<std::size_t>(candidates[i])] = true;
  return from_flags(std::move(on));
}

ScheduleDecision fcfs_select(const StationState& station) {
  std::vector<bool> on(static_cast<std::size_t>(station.port_count()), false);
  for (int i = 0; i < station.port_count(); ++i) {
    const auto& ev = station.port(i);
    on[static_cast<std::size_t>(i)] = ev && !ev->finished();
  }
  return from_flags(std::move(on));
}

}  // namespace evcs
