#pragma once

#include "evmpc/offline.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace evmpc::report {

// slot,gen_cost,charge_cost,total_cost,aggregate_charge_kw,min_v_pu,max_v_pu,
// sdr_rank,noa_iters,rank_gap,solve_ms. solve_ms stays empty unless `timing`
// is set, so repeated runs produce identical bytes.
std::string online_trace_csv(const MpcResult& result, bool timing = false);
// slot,v_<bus>... voltage magnitudes in p.u.
std::string online_voltage_csv(const MpcResult& result, const Network& network);
// slot,pg_<bus>_mw... real generation per generator.
std::string online_power_csv(const MpcResult& result, const Network& network);
std::string online_summary_csv(const MpcResult& result);

// One row per slot plus a final `lower_bound` row carrying the bound in
// total_cost.
std::string offline_trace_csv(const OfflineResult& result);
std::string offline_summary_csv(const OfflineResult& result);

std::string compare_csv(const CompareReport& report);
// slot,online_kw,offline_kw
std::string compare_load_csv(const CompareReport& report);

// "%.10g"
std::string num(double value);

// Numeric columns of a CSV written by this module; rows whose first field is
// not a number (the bound row) are skipped and empty cells read as NaN.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
  const std::vector<double>& column(std::string_view name) const;
};
Table read_table(std::string_view csv);

// key,value rows.
std::vector<std::pair<std::string, std::string>> read_key_values(std::string_view csv);

struct Series {
  std::string name;
  std::vector<double> y;
};

// Polylines over shared x values, axes scaled to the data.
std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<double>& x,
                          const std::vector<Series>& series);

// Every column after the first of `table` as a series against the first.
std::string plot_table(const Table& table, const std::string& title, const std::string& y_label);

}  // namespace evmpc::report
