#ifndef BROWNFLOW_IO_HPP
#define BROWNFLOW_IO_HPP

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "brownflow/measure.hpp"
#include "brownflow/transport.hpp"

namespace brownflow {

/// Shortest round-trip decimal representation; locale independent, so file
/// output is byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Writes content to a temporary file in the target directory, then renames
/// it over the destination. Failed runs leave no partial output behind.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("rename failed for " + path.string() + ": " + ec.message());
  }
}

// ---- measures: CSV columns weight, coord_1..coord_d ----

inline std::string measure_to_csv(const EmpiricalMeasure& mu) {
  std::string out = "weight";
  for (std::size_t c = 1; c <= mu.dimension(); ++c) out += ",coord_" + std::to_string(c);
  out += "\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out += format_double(mu.weight(i));
    for (double x : mu.atom(i)) {
      out += ",";
      out += format_double(x);
    }
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{})
    throw std::runtime_error("CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline EmpiricalMeasure measure_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("measure CSV: empty input");
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "weight")
    throw std::runtime_error("measure CSV: header must start with 'weight'");
  const std::size_t d = header.size() - 1;
  if (d == 0) throw std::runtime_error("measure CSV: no coordinate columns");
  std::vector<double> atoms;
  std::vector<double> weights;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != d + 1)
      throw std::runtime_error("measure CSV line " + std::to_string(line_no) +
                               ": expected " + std::to_string(d + 1) + " fields");
    weights.push_back(detail::parse_double(fields[0], line_no));
    for (std::size_t c = 1; c <= d; ++c)
      atoms.push_back(detail::parse_double(fields[c], line_no));
  }
  return EmpiricalMeasure(std::move(atoms), d, std::move(weights));
}

inline EmpiricalMeasure read_measure_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open measure CSV: " + path.string());
  return measure_from_csv(in);
}

// ---- transport plans: CSV columns i, j, mass, cost ----

inline std::string plan_to_csv(const TransportPlan& plan) {
  std::string out = "i,j,mass,cost\n";
  for (const auto& e : plan.entries) {
    out += std::to_string(e.i);
    out += ",";
    out += std::to_string(e.j);
    out += ",";
    out += format_double(e.mass);
    out += ",";
    out += format_double(e.cost);
    out += "\n";
  }
  return out;
}

// ---- trajectories: CSV columns replica, tag, step, time, position ----

template <class PathRange>
std::string paths_to_csv(const PathRange& paths) {
  std::string out = "replica,tag,step,time,position\n";
  std::size_t replica = 0;
  for (const auto& path : paths) {
    const std::size_t n = path.positions.empty() ? 0 : path.positions.front().size();
    for (std::size_t tag = 0; tag < n; ++tag)
      for (std::size_t k = 0; k < path.times.size(); ++k) {
        out += std::to_string(replica);
        out += ",";
        out += std::to_string(tag);
        out += ",";
        out += std::to_string(k);
        out += ",";
        out += format_double(path.times[k]);
        out += ",";
        out += format_double(path.positions[k][tag]);
        out += "\n";
      }
    ++replica;
  }
  return out;
}

}  // namespace brownflow

#endif  // BROWNFLOW_IO_HPP
