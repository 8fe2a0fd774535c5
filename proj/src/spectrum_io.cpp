#include "kramers/spectrum_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace kramers {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw io_error(fmt::format("missing column '{}'", name));
  }
  return static_cast<std::size_t>(it - columns.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    out.push_back(row[k]);
  }
  return out;
}

std::string format_number(double value) { return fmt::format("{}", value); }

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw io_error(fmt::format("cannot write '{}'", path.string()));
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << table.columns[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << format_number(row[i]);
    }
    out << '\n';
  }
  if (!out) {
    throw io_error(fmt::format("write failed for '{}'", path.string()));
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error(fmt::format("cannot open '{}'", path.string()));
  }
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    if (table.columns.empty()) {
      table.columns = split(t);
      continue;
    }
    const auto cells = split(t);
    if (cells.size() != table.columns.size()) {
      throw io_error(fmt::format("{}:{}: expected {} fields, found {}", path.string(), line_no,
                                 table.columns.size(), cells.size()));
    }
    std::vector<double> row;
    for (const auto& cell : cells) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw io_error(fmt::format("{}:{}: not a number: '{}'", path.string(), line_no, cell));
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) {
    throw io_error(fmt::format("'{}' has no header row", path.string()));
  }
  return table;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw io_error(fmt::format("cannot write '{}'", path.string()));
  }
  out << doc.dump(2) << '\n';
}

nlohmann::ordered_json to_json(const SpectrumMetadata& metadata) {
  nlohmann::ordered_json j;
  j["magnitude_tesla"] = metadata.magnitude_tesla;
  j["theta_deg"] = metadata.theta_deg;
  j["phi_deg"] = metadata.phi_deg;
  return j;
}

void write_spectrum(const std::filesystem::path& csv_path, const AbsorptionSpectrum& spectrum) {
  CsvTable table{{"frequency_ghz", "depth"}, {}};
  for (std::size_t i = 0; i < spectrum.frequency_ghz.size(); ++i) {
    table.rows.push_back({spectrum.frequency_ghz[i], spectrum.depth[i]});
  }
  write_csv(csv_path, table);
  write_json(sidecar_path(csv_path), to_json(spectrum.metadata));
}

AbsorptionSpectrum read_spectrum(const std::filesystem::path& csv_path) {
  const CsvTable table = read_csv(csv_path);
  AbsorptionSpectrum s;
  s.frequency_ghz = table.column("frequency_ghz");
  s.depth = table.column("depth");
  const auto meta = sidecar_path(csv_path);
  if (std::filesystem::exists(meta)) {
    std::ifstream in(meta);
    try {
      const auto j = nlohmann::json::parse(in);
      s.metadata.magnitude_tesla = j.value("magnitude_tesla", 0.0);
      s.metadata.theta_deg = j.value("theta_deg", 0.0);
      s.metadata.phi_deg = j.value("phi_deg", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw io_error(fmt::format("{}: {}", meta.string(), e.what()));
    }
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(fmt::format("{}: {}", csv_path.string(), e.what()));
  }
  return s;
}

}  // namespace kramers
