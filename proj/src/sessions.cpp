#include "evcs/sessions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "evcs/io.hpp"

namespace evcs {

using namespace std::chrono;

SlotClock::SlotClock(int cycle_minutes) : cycle_minutes_(cycle_minutes) {
  if (cycle_minutes <= 0 || 1440 % cycle_minutes != 0) {
    throw ConfigError("cycle length must divide 1440 minutes, got " + std::to_string(cycle_minutes));
  }
}

std::string_view to_string(DayType t) { return t == DayType::Weekend ? "weekend" : "weekday"; }

DayType day_type_of(Day d) {
  const weekday wd{d};
  return (wd == Saturday || wd == Sunday) ? DayType::Weekend : DayType::Weekday;
}

Day day_of(Timestamp t) { return floor<days>(t); }

std::int64_t seconds_of_day(Timestamp t) { return (t - day_of(t)).count(); }

double minute_of_day(Timestamp t) { return static_cast<double>(seconds_of_day(t)) / 60.0; }

int slot_of_minute(double minute, const SlotClock& clock) {
  const int np = clock.slots_per_day();
  const int s = static_cast<int>(std::floor(minute / clock.cycle_minutes())) + 1;
  return std::clamp(s, 1, np);
}

int slot_of(Timestamp t, const SlotClock& clock) {
  return static_cast<int>(seconds_of_day(t) / (clock.cycle_minutes() * 60)) + 1;
}

int step_of(Timestamp t, const SlotClock& clock) { return slot_of(t, clock) - 1; }

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* first = s.data() + pos;
  for (std::size_t i = 0; i < len; ++i) {
    if (first[i] < '0' || first[i] > '9') return false;
  }
  return std::from_chars(first, first + len, out).ec == std::errc{};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

Day parse_date(std::string_view text) {
  text = trim(text);
  int y = 0, m = 0, d = 0;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-' || !read_int(text, 0, 4, y) ||
      !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
    throw ParseError("invalid date '" + std::string(text) + "'");
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ParseError("invalid date '" + std::string(text) + "'");
  return Day{ymd};
}

Timestamp parse_timestamp(std::string_view text) {
  text = trim(text);
  const Day date = parse_date(text);
  const auto fail = [&] { return ParseError("invalid timestamp '" + std::string(text) + "'"); };
  if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') throw fail();
  int hh = 0, mm = 0, ss = 0;
  if (!read_int(text, 11, 2, hh) || !read_int(text, 14, 2, mm)) throw fail();
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (!read_int(text, pos + 1, 2, ss)) throw fail();
    pos += 3;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
  }
  // Zone designator: accepted and ignored, the wall-clock time is kept.
  if (pos < text.size()) {
    const std::string_view zone = text.substr(pos);
    const bool utc = zone == "Z";
    const bool offset = (zone[0] == '+' || zone[0] == '-') && (zone.size() == 6 || zone.size() == 5 || zone.size() == 3);
    if (!utc && !offset) throw fail();
  }
  if (hh > 23 || mm > 59 || ss > 60) throw fail();
  return Timestamp{date} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_date(Day d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const auto secs = seconds_of_day(t);
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return format_date(day_of(t)) + buf;
}

int ChargingSession::arrival_step(const SlotClock& clock) const { return step_of(arrival, clock); }

int ChargingSession::departure_step(const SlotClock& clock) const {
  const auto elapsed = (departure - Timestamp{day()}).count();
  const auto k = elapsed / (clock.cycle_minutes() * 60);
  return static_cast<int>(std::min<std::int64_t>(k, clock.slots_per_day()));
}

int ChargingSession::stated_departure_step(const SlotClock& clock) const {
  if (!user_stated_departure) return departure_step(clock);
  const auto elapsed = (*user_stated_departure - Timestamp{day()}).count();
  const auto k = elapsed / (clock.cycle_minutes() * 60);
  return static_cast<int>(std::clamp<std::int64_t>(k, arrival_step(clock), clock.slots_per_day()));
}

bool ChargingSession::spans_midnight() const { return day_of(departure) > day() && departure != Timestamp{day() + days{1}}; }

namespace {

void validate_session(const ChargingSession& s) {
  if (s.departure <= s.arrival) throw ParseError("departure must be after arrival");
  if (!(s.requested_kwh >= 0.0) || !std::isfinite(s.requested_kwh)) {
    throw ParseError("requested energy must be a non-negative number");
  }
}

void sort_sessions(std::vector<ChargingSession>& v) {
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.id < b.id;
  });
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("invalid number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct CsvColumns {
  int id = 0, arrival = 1, departure = 2, energy = 3, stated = 4;
};

std::optional<CsvColumns> header_columns(const std::vector<std::string_view>& cells) {
  CsvColumns cols{-1, -1, -1, -1, -1};
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const auto name = trim(cells[i]);
    if (name == "session_id" || name == "sessionID") cols.id = i;
    else if (name == "arrival" || name == "connectionTime") cols.arrival = i;
    else if (name == "departure" || name == "disconnectTime") cols.departure = i;
    else if (name == "requested_kwh" || name == "kWhDelivered" || name == "kWhRequested") cols.energy = i;
    else if (name == "user_stated_departure" || name == "requestedDeparture") cols.stated = i;
  }
  if (cols.arrival < 0 && cols.departure < 0 && cols.energy < 0) return std::nullopt;
  if (cols.arrival < 0 || cols.departure < 0 || cols.energy < 0) {
    throw ParseError("header must name arrival, departure and requested_kwh columns");
  }
  return cols;
}

}  // namespace

ParseResult parse_sessions_csv(std::istream& in) {
  ParseResult result;
  CsvColumns cols;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto cells = split_csv(line);
    if (first) {
      first = false;
      try {
        if (auto h = header_columns(cells)) {
          cols = *h;
          continue;
        }
      } catch (const ParseError& e) {
        result.issues.push_back({lineno, e.what()});
        return result;
      }
    }
    try {
      const auto cell = [&](int idx) -> std::string_view {
        if (idx < 0 || idx >= static_cast<int>(cells.size())) throw ParseError("missing column " + std::to_string(idx + 1));
        return trim(cells[idx]);
      };
      ChargingSession s;
      s.id = cols.id >= 0 && cols.id < static_cast<int>(cells.size()) ? std::string(trim(cells[cols.id]))
                                                                     : "row-" + std::to_string(lineno);
      s.arrival = parse_timestamp(cell(cols.arrival));
      s.departure = parse_timestamp(cell(cols.departure));
      s.requested_kwh = parse_double(cell(cols.energy));
      if (cols.stated >= 0 && cols.stated < static_cast<int>(cells.size()) && !trim(cells[cols.stated]).empty()) {
        s.user_stated_departure = parse_timestamp(trim(cells[cols.stated]));
      }
      validate_session(s);
      result.sessions.push_back(std::move(s));
    } catch (const ParseError& e) {
      result.issues.push_back({lineno, e.what()});
    }
  }
  sort_sessions(result.sessions);
  return result;
}

ParseResult parse_sessions_json(std::istream& in) {
  ParseResult result;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    result.issues.push_back({0, std::string("malformed JSON: ") + e.what()});
    return result;
  }
  if (doc.is_null()) return result;
  const nlohmann::json* items = &doc;
  if (doc.is_object() && doc.contains("_items")) items = &doc["_items"];
  if (!items->is_array()) {
    result.issues.push_back({0, "expected an array of session objects"});
    return result;
  }
  const auto text_of = [](const nlohmann::json& obj, std::initializer_list<const char*> keys) -> std::optional<std::string> {
    for (const char* k : keys) {
      if (obj.contains(k) && obj[k].is_string()) return obj[k].get<std::string>();
    }
    return std::nullopt;
  };
  std::size_t index = 0;
  for (const auto& obj : *items) {
    ++index;
    try {
      if (!obj.is_object()) throw ParseError("record is not an object");
      ChargingSession s;
      if (auto id = text_of(obj, {"session_id", "sessionID"})) s.id = *id;
      else s.id = "record-" + std::to_string(index);
      const auto arr = text_of(obj, {"arrival", "connectionTime"});
      const auto dep = text_of(obj, {"departure", "disconnectTime"});
      if (!arr || !dep) throw ParseError("missing arrival or departure");
      s.arrival = parse_timestamp(*arr);
      s.departure = parse_timestamp(*dep);
      const nlohmann::json* user = nullptr;
      if (obj.contains("userInputs") && obj["userInputs"].is_array() && !obj["userInputs"].empty()) {
        user = &obj["userInputs"][0];
      }
      if (obj.contains("requested_kwh") && obj["requested_kwh"].is_number()) s.requested_kwh = obj["requested_kwh"].get<double>();
      else if (obj.contains("kWhDelivered") && obj["kWhDelivered"].is_number()) s.requested_kwh = obj["kWhDelivered"].get<double>();
      else if (user && user->contains("kWhRequested") && (*user)["kWhRequested"].is_number()) s.requested_kwh = (*user)["kWhRequested"].get<double>();
      else throw ParseError("missing requested energy");
      if (auto st = text_of(obj, {"user_stated_departure"})) s.user_stated_departure = parse_timestamp(*st);
      else if (user) {
        if (auto rd = text_of(*user, {"requestedDeparture"})) s.user_stated_departure = parse_timestamp(*rd);
      }
      validate_session(s);
      result.sessions.push_back(std::move(s));
    } catch (const ParseError& e) {
      result.issues.push_back({index, e.what()});
    } catch (const nlohmann::json::exception& e) {
      result.issues.push_back({index, e.what()});
    }
  }
  sort_sessions(result.sessions);
  return result;
}

ParseResult load_sessions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sessions file '" + path + "'");
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return parse_sessions_json(in);
  return parse_sessions_csv(in);
}

void write_sessions_csv(std::ostream& out, std::span<const ChargingSession> sessions) {
  out << "session_id,arrival,departure,requested_kwh,user_stated_departure\n";
  for (const auto& s : sessions) {
    out << s.id << ',' << format_timestamp(s.arrival) << ',' << format_timestamp(s.departure) << ','
        << format_number(s.requested_kwh) << ',';
    if (s.user_stated_departure) out << format_timestamp(*s.user_stated_departure);
    out << '\n';
  }
}

std::vector<DayGroup> group_by_day(std::span<const ChargingSession> sessions) {
  std::vector<DayGroup> groups;
  if (sessions.empty()) return groups;
  std::map<Day, std::vector<ChargingSession>> by_day;
  for (const auto& s : sessions) by_day[s.day()].push_back(s);
  for (Day d = by_day.begin()->first; d <= by_day.rbegin()->first; d += days{1}) {
    auto it = by_day.find(d);
    groups.push_back({d, it == by_day.end() ? std::vector<ChargingSession>{} : std::move(it->second)});
  }
  return groups;
}

void SessionHistory::observe_day(Day day, std::span<const ChargingSession> sessions) {
  day_counts_[day] += static_cast<int>(sessions.size());
  sessions_.insert(sessions_.end(), sessions.begin(), sessions.end());
}

void SessionHistory::add(std::span<const ChargingSession> sessions) {
  for (const auto& s : sessions) {
    ++day_counts_[s.day()];
    sessions_.push_back(s);
  }
}

std::span<const ChargingSession> SessionHistory::training_window() const {
  const std::size_t n = std::min(window_size_, sessions_.size());
  return std::span<const ChargingSession>(sessions_).last(n);
}

std::vector<DayCount> SessionHistory::daily_counts() const {
  std::vector<DayCount> out;
  out.reserve(day_counts_.size());
  for (const auto& [d, c] : day_counts_) out.push_back({d, c});
  return out;
}

SyntheticProfile SyntheticProfile::workplace() {
  SyntheticProfile p;
  // Morning peak around 08:00-09:00 with a small lunchtime bump.
  p.hourly_rate = {0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.4, 3.0, 9.0, 10.0, 4.5, 2.0,
                   2.0, 2.0, 1.0, 0.8, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0};
  return p;
}

void SyntheticProfile::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    double v = 0.0;
    try {
      v = parse_double(value);
    } catch (const ParseError&) {
      if (key != "first_day") throw ConfigError("invalid value for '" + key + "': " + value);
    }
    if (key.rfind("rate_", 0) == 0 && key.size() == 7) {
      int h = -1;
      if (!read_int(key, 5, 2, h) || h > 23) throw ConfigError("unknown profile key '" + key + "'");
      hourly_rate[static_cast<std::size_t>(h)] = v;
    } else if (key == "weekend_scale") weekend_scale = v;
    else if (key == "energy_mean") energy_mean_kwh = v;
    else if (key == "energy_sd") energy_sd_kwh = v;
    else if (key == "energy_min") energy_min_kwh = v;
    else if (key == "energy_max") energy_max_kwh = v;
    else if (key == "stay_mean") stay_mean_hours = v;
    else if (key == "stay_sd") stay_sd_hours = v;
    else if (key == "stay_min") stay_min_hours = v;
    else if (key == "stated_bias") stated_bias_hours = v;
    else if (key == "stated_sd") stated_sd_hours = v;
    else if (key == "days") days = static_cast<int>(v);
    else if (key == "first_day") first_day = parse_date(value);
    else throw ConfigError("unknown profile key '" + key + "'");
  }
  validate();
}

void SyntheticProfile::validate() const {
  for (double r : hourly_rate) {
    if (!(r >= 0.0)) throw ConfigError("arrival rates must be non-negative");
  }
  if (!(weekend_scale >= 0.0)) throw ConfigError("weekend_scale must be non-negative");
  if (!(energy_sd_kwh >= 0.0) || !(stay_sd_hours >= 0.0) || !(stated_sd_hours >= 0.0)) {
    throw ConfigError("standard deviations must be non-negative");
  }
  if (!(energy_min_kwh >= 0.0) || energy_max_kwh < energy_min_kwh) throw ConfigError("invalid energy bounds");
  if (!(stay_min_hours > 0.0)) throw ConfigError("stay_min must be positive");
  if (days < 0) throw ConfigError("days must be non-negative");
}

std::vector<ChargingSession> generate_synthetic(std::uint64_t seed, const SyntheticProfile& profile) {
  profile.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ChargingSession> out;
  for (int d = 0; d < profile.days; ++d) {
    const Day day = profile.first_day + days{d};
    const double scale = day_type_of(day) == DayType::Weekend ? profile.weekend_scale : 1.0;
    const Timestamp midnight{day};
    const Timestamp last_minute = midnight + minutes{1439};
    int serial = 0;
    for (int h = 0; h < 24; ++h) {
      const double rate = profile.hourly_rate[static_cast<std::size_t>(h)] * scale;
      if (rate <= 0.0) continue;
      std::poisson_distribution<int> count(rate);
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        ChargingSession s;
        const auto offset = static_cast<std::int64_t>(std::floor(unit(rng) * 3600.0));
        s.arrival = midnight + hours{h} + seconds{offset};
        const double stay_h = std::max(profile.stay_min_hours, profile.stay_mean_hours + profile.stay_sd_hours * normal(rng));
        s.departure = std::min(last_minute, s.arrival + seconds{static_cast<std::int64_t>(stay_h * 3600.0)});
        if (s.departure <= s.arrival) s.departure = s.arrival + minutes{1};
        const double e = std::clamp(profile.energy_mean_kwh + profile.energy_sd_kwh * normal(rng), profile.energy_min_kwh,
                                    profile.energy_max_kwh);
        s.requested_kwh = std::round(e * 100.0) / 100.0;
        const double stated_h = stay_h + profile.stated_bias_hours + profile.stated_sd_hours * normal(rng);
        const auto stated = s.arrival + seconds{static_cast<std::int64_t>(std::max(stated_h, 1.0 / 6.0) * 3600.0)};
        s.user_stated_departure = std::min(last_minute, stated);
        char id[48];
        std::snprintf(id, sizeof id, "syn-%s-%03d", format_date(day).c_str(), serial++);
        s.id = id;
        out.push_back(std::move(s));
      }
    }
  }
  sort_sessions(out);
  return out;
}

}  // namespace evcs
