#pragma once

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <variant>
#include <vector>

namespace afd::cli {

using Cell = std::variant<double, long long, std::string, bool>;

/// Rectangular report with a fixed column order.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != header.size()) throw std::logic_error("Table::add: row width differs from header");
    rows.push_back(std::move(row));
  }
};

/// 10 significant digits, '.' decimal point, no grouping.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  struct {
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(long long v) const { return std::to_string(v); }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string out = "\"";
      for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
      }
      return out + "\"";
    }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  } visit;
  return std::visit(visit, c);
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += "\n";
  }
  return out;
}

inline nlohmann::json to_json(const Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) {
              obj[t.header[i]] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_number(v));
            } else {
              obj[t.header[i]] = v;
            }
          },
          row[i]);
    }
    rows.push_back(std::move(obj));
  }
  return {{"columns", t.header}, {"rows", rows}};
}

inline Table from_json(const nlohmann::json& j) {
  Table t;
  t.header = j.at("columns").get<std::vector<std::string>>();
  for (const auto& obj : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& name : t.header) {
      const auto& v = obj.at(name);
      if (v.is_boolean()) {
        row.emplace_back(v.get<bool>());
      } else if (v.is_number_integer()) {
        row.emplace_back(v.get<long long>());
      } else if (v.is_number()) {
        row.emplace_back(v.get<double>());
      } else {
        const std::string s = v.get<std::string>();
        if (s == "nan") row.emplace_back(std::nan(""));
        else if (s == "inf") row.emplace_back(HUGE_VAL);
        else if (s == "-inf") row.emplace_back(-HUGE_VAL);
        else row.emplace_back(s);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Writes via a temporary file in the same directory and renames it into place.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  const auto tmp = dir / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

enum class Format { csv, json };

inline void emit_table(const Table& t, Format format, const std::filesystem::path& path) {
  atomic_write(path, format == Format::csv ? to_csv(t) : to_json(t).dump(2) + "\n");
}

}  // namespace afd::cli
