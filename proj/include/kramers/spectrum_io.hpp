#ifndef KRAMERS_SPECTRUM_IO_HPP
#define KRAMERS_SPECTRUM_IO_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kramers/spectrum.hpp"

namespace kramers {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numeric table with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

/// Shortest round-trip formatting, identical across runs.
std::string format_number(double value);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Throws io_error on a missing file, ragged rows or non-numeric cells.
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);

nlohmann::ordered_json to_json(const SpectrumMetadata& metadata);

/// Writes <path> with columns frequency_ghz,depth and <path>.json holding the metadata.
void write_spectrum(const std::filesystem::path& csv_path, const AbsorptionSpectrum& spectrum);
AbsorptionSpectrum read_spectrum(const std::filesystem::path& csv_path);

}  // namespace kramers

#endif
