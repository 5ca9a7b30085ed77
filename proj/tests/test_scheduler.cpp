#include <doctest.h>

#include <random>

#include "evcs/scheduler.hpp"
#include "support/oracles.hpp"

using namespace evcs;

namespace {

EvChargeState ev(int port, int session, int k_a, double requested, double fraction = 0.0) {
  EvChargeState s;
  s.port = port;
  s.session = session;
  s.arrival_step = k_a;
  s.requested_kwh = requested;
  s.fraction_delivered = fraction;
  return s;
}

// Ledger whose entries carry the given priorities directly: one cycle at
// k = k_a + 1 with m2 = 1 adds exactly the remaining energy.
PriorityLedger ledger_with(const std::vector<double>& priority, const std::vector<bool>& eligible) {
  const int n = static_cast<int>(priority.size());
  StationState st(n);
  for (int i = 0; i < n; ++i) {
    st.plug(ev(i, i, 0, eligible[static_cast<std::size_t>(i)] ? priority[static_cast<std::size_t>(i)] : 1.0,
               eligible[static_cast<std::size_t>(i)] ? 0.0 : 1.0));
  }
  PriorityLedger l(n);
  l.accumulate(st, 1);
  return l;
}

}  // namespace

TEST_CASE("priority accumulates waiting time times remaining energy") {
  StationState st(1);
  st.plug(ev(0, 7, 10, 5.0));
  PriorityLedger l(1);
  for (int k = 10; k <= 12; ++k) l.accumulate(st, k);
  CHECK(l.priority(0) == 15.0);
}

TEST_CASE("finished EVs add nothing and are not eligible") {
  StationState st(1);
  st.plug(ev(0, 1, 0, 5.0, 1.0));
  PriorityLedger l(1);
  l.accumulate(st, 4);
  CHECK(l.priority(0) == 0.0);
  REQUIRE(l.entry(0));
  CHECK_FALSE(l.entry(0)->eligible);
  CHECK(select(l, 1).on_count() == 0);
}

TEST_CASE("m2 = 0 ranks by seniority only") {
  StationState st(2);
  st.plug(ev(0, 0, 5, 30.0));
  st.plug(ev(1, 1, 2, 1.0));
  PriorityLedger l(2, 1, 0);
  for (int k = 5; k <= 9; ++k) l.accumulate(st, k);
  CHECK(l.priority(0) == 0 + 1 + 2 + 3 + 4);
  CHECK(l.priority(1) == 3 + 4 + 5 + 6 + 7);
  CHECK(select(l, 1).on[1]);
}

TEST_CASE("a new EV on a port starts from zero") {
  StationState st(1);
  st.plug(ev(0, 1, 0, 5.0));
  PriorityLedger l(1);
  for (int k = 0; k < 5; ++k) l.accumulate(st, k);
  CHECK(l.priority(0) > 0.0);
  st.unplug(0);
  l.accumulate(st, 5);
  CHECK_FALSE(l.entry(0));
  st.plug(ev(0, 2, 6, 5.0));
  l.accumulate(st, 6);
  CHECK(l.priority(0) == 0.0);
  // Same port swapped between two accumulations.
  st.unplug(0);
  st.plug(ev(0, 3, 6, 5.0));
  l.accumulate(st, 7);
  CHECK(l.priority(0) == 5.0);
}

TEST_CASE("unfinished EVs gain priority every cycle after their first") {
  StationState st(1);
  st.plug(ev(0, 0, 3, 8.0));
  PriorityLedger l(1);
  l.accumulate(st, 3);
  double prev = l.priority(0);
  for (int k = 4; k < 40; ++k) {
    l.accumulate(st, k);
    CHECK(l.priority(0) > prev);
    prev = l.priority(0);
  }
}

TEST_CASE("select example and edge caps") {
  const auto l = ledger_with({3, 9, 1}, {true, true, true});
  const auto d = select(l, 2);
  CHECK(d.on == std::vector<bool>{true, true, false});
  CHECK(d.mode == 0b011);
  CHECK(select(l, 0).on_count() == 0);
  CHECK(select(l, 3).on_count() == 3);
  CHECK(select(l, 10).on_count() == 3);
  CHECK_THROWS(select(l, -1));
}

TEST_CASE("ties go to the earlier arrival then the lower port") {
  StationState st(3);
  st.plug(ev(0, 0, 4, 2.0));
  st.plug(ev(1, 1, 2, 2.0));
  st.plug(ev(2, 2, 2, 2.0));
  PriorityLedger l(3, 0, 1);  // waiting time ignored, equal remaining energy
  l.accumulate(st, 5);
  CHECK(select(l, 1).on == std::vector<bool>{false, true, false});
  CHECK(select(l, 2).on == std::vector<bool>{false, true, true});
}

TEST_CASE("select attains the enumeration optimum") {
  std::mt19937 rng(2024);
  for (int t = 0; t < 300; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 10)(rng);
    std::vector<double> f;
    std::vector<bool> eligible;
    for (int i = 0; i < n; ++i) {
      f.push_back(std::uniform_int_distribution<int>(1, 20)(rng));
      eligible.push_back(std::uniform_int_distribution<int>(0, 4)(rng) != 0);
    }
    const int cap = std::uniform_int_distribution<int>(0, n + 1)(rng);
    const auto d = select(ledger_with(f, eligible), cap);
    double value = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (!d.on[static_cast<std::size_t>(i)]) continue;
      CHECK(eligible[static_cast<std::size_t>(i)]);
      value += f[static_cast<std::size_t>(i)];
      ++count;
    }
    CHECK(count <= cap);
    CHECK(value == oracle::best_selection_value(f, eligible, cap));
  }
}

TEST_CASE("uncontrolled baseline switches on every unfinished EV") {
  StationState empty(4);
  CHECK(fcfs_select(empty).on_count() == 0);
  StationState st(4);
  st.plug(ev(0, 0, 0, 5.0));
  st.plug(ev(2, 1, 0, 5.0));
  st.plug(ev(3, 2, 0, 5.0, 1.0));
  const auto d = fcfs_select(st);
  CHECK(d.on == std::vector<bool>{true, false, true, false});
  const BmsParams bms{6.0, 0.8, 0.95, 1.0};
  const double grid = st.advance(d.on, 10.0, bms);
  CHECK(grid == doctest::Approx(2 * bms_power(0.0, bms) / 6.0));
}
