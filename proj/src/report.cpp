#include "evmpc/report.hpp"

#include "evmpc/error.hpp"
#include "evmpc/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace evmpc::report {

std::string num(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", value == 0.0 ? 0.0 : value);
  return buf;
}

namespace {

std::string row(std::initializer_list<std::string> fields) {
  std::string out;
  for (const auto& f : fields) {
    if (!out.empty()) out += ',';
    out += f;
  }
  return out + '\n';
}

std::pair<double, double> magnitude_range(const Eigen::VectorXcd& v) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    lo = std::min(lo, std::abs(v(k)));
    hi = std::max(hi, std::abs(v(k)));
  }
  return {lo, hi};
}

std::string kv(const std::string& key, const std::string& value) { return key + ',' + value + '\n'; }

constexpr const char* kTraceHeader =
    "slot,gen_cost,charge_cost,total_cost,aggregate_charge_kw,min_v_pu,max_v_pu,sdr_rank,"
    "noa_iters,rank_gap";

}  // namespace

std::string online_trace_csv(const MpcResult& result, bool timing) {
  std::string out = std::string(kTraceHeader) + ",solve_ms\n";
  for (const auto& r : result.records) {
    const auto [lo, hi] = magnitude_range(r.v);
    out += row({std::to_string(r.t), num(r.gen_cost), num(r.charge_cost),
                num(r.gen_cost + r.charge_cost), num(r.aggregate_charge_kw()), num(lo), num(hi),
                std::to_string(r.sdr_rank), std::to_string(r.noa_iterations), num(r.rank_gap),
                timing ? num(r.solve_ms) : std::string()});
  }
  return out;
}

std::string online_voltage_csv(const MpcResult& result, const Network& net) {
  std::string out = "slot";
  for (const auto& b : net.buses()) out += ",v_" + std::to_string(b.id);
  out += '\n';
  for (const auto& r : result.records) {
    out += std::to_string(r.t);
    for (Eigen::Index k = 0; k < r.v.size(); ++k) out += ',' + num(std::abs(r.v(k)));
    out += '\n';
  }
  return out;
}

std::string online_power_csv(const MpcResult& result, const Network& net) {
  std::string out = "slot";
  for (const auto& g : net.generators()) out += ",pg_" + std::to_string(g.bus) + "_mw";
  out += '\n';
  for (const auto& r : result.records) {
    out += std::to_string(r.t);
    for (double p : r.pg) out += ',' + num(p * net.base_mva());
    out += '\n';
  }
  return out;
}

std::string online_summary_csv(const MpcResult& r) {
  std::string out = "key,value\n";
  out += kv("scenario", r.scenario);
  out += kv("complete", r.complete ? "1" : "0");
  out += kv("slots", std::to_string(r.records.size()));
  out += kv("generation_cost", num(r.generation_cost));
  out += kv("charging_cost", num(r.charging_cost));
  out += kv("total", num(r.total));
  out += kv("admitted", std::to_string(r.delivered_kwh.size()));
  double delivered = 0.0;
  for (const auto& [id, e] : r.delivered_kwh) delivered += e;
  out += kv("delivered_kwh", num(delivered));
  out += kv("rejected", std::to_string(r.rejected.size()));
  out += kv("evicted", std::to_string(r.evicted.size()));
  int repaired = 0;
  for (const auto& rec : r.records) repaired += rec.repaired ? 1 : 0;
  out += kv("repaired_slots", std::to_string(repaired));
  return out;
}

std::string offline_trace_csv(const OfflineResult& result) {
  std::string out = std::string(kTraceHeader) + ",converged\n";
  for (const auto& s : result.slots) {
    const RecoveredSlot& r = s.slot;
    double kw = 0.0;
    for (double p : r.charge_kw) kw += p;
    const Eigen::VectorXcd v = r.w.diagonal().real().cwiseMax(0.0).cwiseSqrt().cast<Complex>();
    const auto [lo, hi] = magnitude_range(v);
    out += row({std::to_string(r.t), num(r.gen_cost), num(r.charge_cost),
                num(r.gen_cost + r.charge_cost), num(kw), num(lo), num(hi),
                std::to_string(s.sdr_rank), std::to_string(s.noa_iterations), num(r.rank_gap),
                s.converged ? "1" : "0"});
  }
  out += row({"lower_bound", "", "", num(result.lower_bound), "", "", "", "", "", "", ""});
  return out;
}

std::string offline_summary_csv(const OfflineResult& r) {
  std::string out = "key,value\n";
  out += kv("scenario", r.scenario);
  out += kv("method", to_string(r.method));
  out += kv("lower_bound", num(r.lower_bound));
  out += kv("value", num(r.value));
  out += kv("generation_cost", num(r.generation_cost));
  out += kv("charging_cost", num(r.charging_cost));
  out += kv("all_rank_one", r.all_rank_one ? "1" : "0");
  out += kv("converged", r.converged ? "1" : "0");
  out += kv("admitted", std::to_string(r.delivered_kwh.size()));
  out += kv("rejected", std::to_string(r.rejected.size()));
  return out;
}

std::string compare_csv(const CompareReport& r) {
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.6f", r.ratio);
  std::string out = "key,value\n";
  out += kv("online_total", num(r.online_total));
  out += kv("offline_value", num(r.offline_value));
  out += kv("lower_bound", num(r.lower_bound));
  out += kv("ratio", ratio);
  out += kv("ordering_holds", r.ordering_holds ? "1" : "0");
  std::string flags;
  for (const auto& f : r.flags) flags += (flags.empty() ? "" : "; ") + f;
  out += kv("flags", flags);
  return out;
}

std::string compare_load_csv(const CompareReport& r) {
  std::string out = "slot,online_kw,offline_kw\n";
  const std::size_t n = std::max(r.online_charge_kw.size(), r.offline_charge_kw.size());
  for (std::size_t i = 0; i < n; ++i)
    out += row({std::to_string(i + 1),
                i < r.online_charge_kw.size() ? num(r.online_charge_kw[i]) : "",
                i < r.offline_charge_kw.size() ? num(r.offline_charge_kw[i]) : ""});
  return out;
}

const std::vector<double>& Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return columns[i];
  throw InputError("table has no column " + std::string(name));
}

Table read_table(std::string_view csv) {
  Table t;
  bool first = true;
  for (const auto& raw : text::split_lines(csv)) {
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    const auto fields = text::split_csv_line(line);
    if (first) {
      t.header = fields;
      t.columns.resize(fields.size());
      first = false;
      continue;
    }
    if (fields.size() != t.header.size()) throw InputError("ragged table row: " + line);
    double lead = 0.0;
    try {
      lead = text::parse_double(fields[0], 0);
    } catch (const ParseError&) {
      continue;
    }
    t.columns[0].push_back(lead);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::string f = text::trim(fields[i]);
      t.columns[i].push_back(f.empty() || f == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                                     : text::parse_double(f, 0));
    }
  }
  if (first) throw InputError("table is empty");
  return t;
}

std::vector<std::pair<std::string, std::string>> read_key_values(std::string_view csv) {
  std::vector<std::pair<std::string, std::string>> out;
  bool header = true;
  for (const auto& raw : text::split_lines(csv)) {
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    if (header) {
      if (line != "key,value") throw InputError("expected a key,value header");
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError("malformed key,value row: " + line);
    out.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return out;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<double>& x,
                          const std::vector<Series>& series) {
  constexpr double W = 720, H = 420, L = 80, R = 160, T = 40, B = 50;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (double v : x) {
    x0 = std::min(x0, v);
    x1 = std::max(x1, v);
  }
  for (const auto& s : series)
    for (double v : s.y)
      if (std::isfinite(v)) {
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
      }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  const double pad = y1 - y0 < 1e-12 ? std::max(1e-3, std::abs(y0) * 0.05) : (y1 - y0) * 0.05;
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(title) << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    const double xv = x0 + (x1 - x0) * i / 4.0;
    os << "<line x1=\"" << L - 4 << "\" y1=\"" << py(yv) << "\" x2=\"" << L << "\" y2=\"" << py(yv)
       << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << tick(yv)
       << "</text>\n"
       << "<line x1=\"" << px(xv) << "\" y1=\"" << H - B << "\" x2=\"" << px(xv) << "\" y2=\""
       << H - B + 4 << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 17 << "\" text-anchor=\"middle\">"
       << tick(xv) << "</text>\n";
  }
  os << "<text x=\"" << L + (W - L - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << T + (H - T - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << T + (H - T - B) / 2 << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = palette[s % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    bool any = false;
    for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      os << (any ? " " : "") << px(x[i]) << ',' << py(series[s].y[i]);
      any = true;
    }
    os << "\"/>\n";
    const double ly = T + 14 + 18.0 * s;
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 32
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - R + 38 << "\" y=\"" << ly << "\">" << escape(series[s].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string plot_table(const Table& table, const std::string& title, const std::string& y_label) {
  std::vector<Series> series;
  for (std::size_t i = 1; i < table.header.size(); ++i)
    series.push_back({table.header[i], table.columns[i]});
  return line_plot_svg(title, table.header.front(), y_label, table.columns.front(), series);
}

}  // namespace evmpc::report
