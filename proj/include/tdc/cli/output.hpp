#ifndef TDC_CLI_OUTPUT_HPP
#define TDC_CLI_OUTPUT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace tdc::cli {

/// Shortest representation that parses back to the same double.
std::string format_double(double x);

/// Accumulates a CSV table in memory; cells are written in full precision.
class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& cell(double x);
  CsvTable& cell(long x);
  CsvTable& cell(bool x);
  CsvTable& cell(const std::string& s);
  CsvTable& empty();
  /// Throws if the row width differs from the header.
  void end_row();

  std::string str() const;
  std::size_t rows() const { return n_rows_; }
  const std::vector<std::string>& header() const { return header_; }

private:
  std::vector<std::string> header_;
  std::vector<std::string> row_;
  std::string body_;
  std::size_t n_rows_ = 0;
};

std::string sha256_hex(const std::string& bytes);

/// Writes to a sibling temporary and renames it over `path`.
void write_atomic(const std::string& path, const std::string& bytes);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::string version;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  long n_diverged = 0;
  bool valid = true;
  std::vector<std::pair<std::string, std::string>> checksums; // file, sha256

  nlohmann::json to_json() const;
};

/// `path` with ".manifest.json" appended.
std::string manifest_path(const std::string& data_path);

const char* code_version();

} // namespace tdc::cli

#endif // TDC_CLI_OUTPUT_HPP
