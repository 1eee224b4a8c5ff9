#include "tdc/cli/output.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <openssl/evp.h>

#include "tdc/types.hpp"

#ifndef TDC_VERSION
#define TDC_VERSION "0.0.0"
#endif

namespace tdc::cli {

const char* code_version() { return TDC_VERSION; }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), r.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) body_ += ',';
    body_ += header_[i];
  }
  body_ += '\n';
}

CsvTable& CsvTable::cell(double x) {
  row_.push_back(format_double(x));
  return *this;
}

CsvTable& CsvTable::cell(long x) {
  row_.push_back(std::to_string(x));
  return *this;
}

CsvTable& CsvTable::cell(bool x) {
  row_.push_back(x ? "true" : "false");
  return *this;
}

CsvTable& CsvTable::cell(const std::string& s) {
  if (s.find_first_of(",\"\n") != std::string::npos)
    throw Error("CSV cell needs quoting: " + s);
  row_.push_back(s);
  return *this;
}

CsvTable& CsvTable::empty() {
  row_.emplace_back();
  return *this;
}

void CsvTable::end_row() {
  if (row_.size() != header_.size())
    throw Error("CSV row has " + std::to_string(row_.size()) + " cells, header has " +
                std::to_string(header_.size()));
  for (std::size_t i = 0; i < row_.size(); ++i) {
    if (i) body_ += ',';
    body_ += row_[i];
  }
  body_ += '\n';
  row_.clear();
  ++n_rows_;
}

std::string CsvTable::str() const { return body_; }

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

void write_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename onto " + path + ": " + ec.message());
  }
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [f, h] : checksums) files.push_back({{"file", f}, {"sha256", h}});
  return {{"command", command},  {"config", config},         {"version", version},
          {"master_seed", seed}, {"wall_time_s", wall_time_s}, {"n_diverged", n_diverged},
          {"valid", valid},      {"outputs", files}};
}

std::string manifest_path(const std::string& data_path) { return data_path + ".manifest.json"; }

} // namespace tdc::cli
