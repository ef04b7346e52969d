#include "wqed/curve.hpp"
#include "wqed/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace wqed {

void CurveSeries::add_column(std::string name, std::vector<double> values) {
  if (values.size() != axis.size())
    throw Error(ErrorCode::InvalidParameter, "column " + name + " does not match the axis length");
  columns.emplace_back(std::move(name), std::move(values));
}

const std::vector<double>& CurveSeries::column(std::string_view name) const {
  for (const auto& [n, v] : columns)
    if (n == name)
      return v;
  throw Error(ErrorCode::InvalidParameter, "no column named " + std::string(name));
}

bool CurveSeries::has_flags() const {
  return std::any_of(point_flags.begin(), point_flags.end(),
                     [](const std::string& f) { return !f.empty(); });
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const CurveSeries& series, const CsvOptions& options) {
  out << "# config_hash=" << series.config_hash << '\n';
  if (!options.manifest_hash.empty())
    out << "# manifest_hash=" << options.manifest_hash << '\n';
  out << "# source=" << series.source << '\n';
  for (const auto& [k, v] : series.tolerances)
    out << "# " << k << '=' << format_double(v) << '\n';
  if (options.normalize_max)
    out << "# normalized=max\n";

  std::vector<double> scale(series.columns.size(), 1.0);
  if (options.normalize_max) {
    for (std::size_t c = 0; c < series.columns.size(); ++c) {
      double m = 0.0;
      for (double v : series.columns[c].second)
        if (std::isfinite(v))
          m = std::max(m, std::abs(v));
      if (m > 0.0)
        scale[c] = 1.0 / m;
    }
  }

  out << series.axis_name;
  for (const auto& col : series.columns)
    out << ',' << col.first;
  const bool flags = series.has_flags();
  if (flags)
    out << ",flag";
  out << '\n';
  for (std::size_t i = 0; i < series.axis.size(); ++i) {
    out << format_double(series.axis[i]);
    for (std::size_t c = 0; c < series.columns.size(); ++c)
      out << ',' << format_double(series.columns[c].second[i] * scale[c]);
    if (flags)
      out << ',' << (i < series.point_flags.size() ? series.point_flags[i] : std::string());
    out << '\n';
  }
}

} // namespace wqed
