#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wqed {

// A sampled observable with the grid, the producing config and the solver
// settings it was computed with.
struct CurveSeries {
  std::string axis_name;
  std::vector<double> axis;
  std::vector<std::pair<std::string, std::vector<double>>> columns;
  // One entry per axis point; empty means the point was computed normally.
  std::vector<std::string> point_flags;
  std::string config_hash;
  std::string source = "numerical";
  std::map<std::string, double> tolerances;

  std::size_t size() const noexcept { return axis.size(); }
  void add_column(std::string name, std::vector<double> values);
  const std::vector<double>& column(std::string_view name) const;
  bool has_flags() const;
};

struct CsvOptions {
  std::string manifest_hash;
  bool normalize_max = false; // scale every value column by its maximum
};

// Writes `# key=value` metadata lines followed by a header row and the data.
// Values are printed with 17 significant digits so reruns are byte-identical.
void write_csv(std::ostream& out, const CurveSeries& series, const CsvOptions& options = {});

std::string format_double(double v);

} // namespace wqed
