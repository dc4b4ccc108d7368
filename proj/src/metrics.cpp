#include "threetank/scenario.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace threetank::harness {

const char* const kCsvHeader =
    "t,h1,h2,h3,y1,y2,y3,yr1,yr2,u1,u2,zeta1,zeta2,xhat1,xhat2,xhat3,z1,z2,sat1,sat2";

namespace {

constexpr std::size_t kColumns = 20;

void put(std::ostream& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

template <typename V>
void put_all(std::ostream& out, const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << ',';
    put(out, v[i]);
  }
}

template <typename V>
void put_optional(std::ostream& out, const std::optional<V>& v, int size) {
  if (v) {
    put_all(out, *v);
  } else {
    for (int i = 0; i < size; ++i) out << ',';
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

double parse_number(const std::string& text, std::size_t row) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("CSV row " + std::to_string(row) + ": cannot parse '" + text + "'");
  }
  return v;
}

template <int N>
std::optional<Eigen::Matrix<double, N, 1>> parse_group(const std::vector<std::string>& f,
                                                       std::size_t first, std::size_t row) {
  std::size_t empty = 0;
  for (std::size_t i = first; i < first + N; ++i) empty += f[i].empty() ? 1 : 0;
  if (empty == N) return std::nullopt;
  if (empty != 0) throw ConfigError("CSV row " + std::to_string(row) + ": partially empty column group");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = parse_number(f[first + static_cast<std::size_t>(i)], row);
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> require_group(const std::vector<std::string>& f, std::size_t first,
                                          std::size_t row, const char* name) {
  auto v = parse_group<N>(f, first, row);
  if (!v) throw ConfigError("CSV row " + std::to_string(row) + ": missing " + name);
  return *v;
}

double rms(double sum_sq, std::size_t count) {
  return std::sqrt(sum_sq / static_cast<double>(count));
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<SimRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    put(out, r.t);
    put_all(out, r.h);
    put_all(out, r.y);
    put_optional(out, r.y_r, 2);
    put_all(out, r.u);
    put_optional(out, r.zeta, 2);
    put_optional(out, r.x_hat, 3);
    put_optional(out, r.z, 2);
    out << ',' << (r.sat[0] ? 1 : 0) << ',' << (r.sat[1] ? 1 : 0) << '\n';
  }
}

std::vector<SimRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("CSV header does not match the expected columns");
  std::vector<SimRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != kColumns) {
      throw ConfigError("CSV row " + std::to_string(row) + ": expected 20 fields, got " +
                        std::to_string(f.size()));
    }
    SimRecord r;
    r.t = parse_number(f[0], row);
    r.h = require_group<3>(f, 1, row, "h");
    r.y = require_group<3>(f, 4, row, "y");
    r.y_r = parse_group<2>(f, 7, row);
    r.u = require_group<2>(f, 9, row, "u");
    r.zeta = parse_group<2>(f, 11, row);
    r.x_hat = parse_group<3>(f, 13, row);
    r.z = parse_group<2>(f, 16, row);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& s = f[18 + i];
      if (s != "0" && s != "1") throw ConfigError("CSV row " + std::to_string(row) + ": sat flag must be 0 or 1");
      r.sat[i] = s == "1";
    }
    records.push_back(std::move(r));
  }
  return records;
}

MetricsReport compute_metrics(const std::vector<SimRecord>& records, const MetricsOptions& opts) {
  MetricsReport report;
  report.samples = records.size();

  std::array<double, 2> track_sq{0.0, 0.0};
  std::size_t track_n = 0;
  std::array<double, 3> est_sq{0.0, 0.0, 0.0};
  std::size_t est_n = 0;
  for (const auto& r : records) {
    if (r.sat[0] || r.sat[1]) ++report.saturated_samples;
    if (r.y_r) {
      ++track_n;
      for (int i = 0; i < 2; ++i) {
        const double e = (*r.y_r)[i] - r.h[i];
        track_sq[static_cast<std::size_t>(i)] += e * e;
      }
    }
    if (r.x_hat && r.t >= opts.burn_in) {
      ++est_n;
      for (int i = 0; i < 3; ++i) {
        const double e = (*r.x_hat)[i] - r.h[i];
        est_sq[static_cast<std::size_t>(i)] += e * e;
      }
    }
  }
  if (track_n > 0) {
    for (std::size_t i = 0; i < 2; ++i) report.tracking_rmse[i] = rms(track_sq[i], track_n);
  }
  if (est_n > 0) {
    for (std::size_t i = 0; i < 3; ++i) report.estimation_rmse[i] = rms(est_sq[i], est_n);
  }

  // Constant-reference segments; a new one starts whenever either reference changes.
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (!records[k].y_r) continue;
    if (starts.empty() || !records[k - 1].y_r || *records[k].y_r != *records[k - 1].y_r) starts.push_back(k);
  }
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const std::size_t begin = starts[s];
    std::size_t end = s + 1 < starts.size() ? starts[s + 1] : records.size();
    while (end > begin && !records[end - 1].y_r) --end;
    for (int c = 0; c < 2; ++c) {
      SettlingEvent ev;
      ev.channel = c;
      ev.t_event = records[begin].t;
      ev.t_end = records[end - 1].t;
      ev.step = begin > 0 && records[begin - 1].y_r ? (*records[begin].y_r)[c] - (*records[begin - 1].y_r)[c] : 0.0;
      auto error = [&](std::size_t k) { return std::abs((*records[k].y_r)[c] - records[k].h[c]); };
      ev.final_error = error(end - 1);
      std::size_t last_violation = end;  // none
      for (std::size_t k = end; k-- > begin;) {
        if (error(k) > opts.settle_band) {
          last_violation = k;
          break;
        }
      }
      if (last_violation == end) ev.settling_time = 0.0;
      else if (last_violation + 1 < end) ev.settling_time = records[last_violation + 1].t - ev.t_event;
      report.settling.push_back(ev);
    }
  }
  return report;
}

std::string metrics_to_json(const MetricsReport& report) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["samples"] = report.samples;
  j["saturated_samples"] = report.saturated_samples;
  j["tracking_rmse"] = json::array({opt(report.tracking_rmse[0]), opt(report.tracking_rmse[1])});
  j["estimation_rmse"] = json::array(
      {opt(report.estimation_rmse[0]), opt(report.estimation_rmse[1]), opt(report.estimation_rmse[2])});
  json events = json::array();
  for (const auto& ev : report.settling) {
    events.push_back({{"channel", ev.channel + 1},
                      {"t_event", ev.t_event},
                      {"t_end", ev.t_end},
                      {"step", ev.step},
                      {"settling_time", opt(ev.settling_time)},
                      {"final_error", ev.final_error}});
  }
  j["settling"] = events;
  return j.dump(2);
}

}  // namespace threetank::harness
