#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmfd/grid.hpp"

namespace qmfd {

// Shortest round-trip decimal form, identical on every run.
std::string format_number(double x);

// A CSV table built row by row; cells are strings so that integer and label
// columns keep their natural form.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(const std::vector<std::string>& cells);
  CsvTable& row(const std::vector<double>& cells);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Binary array dump: "QMFD", u16 version, u16 rank, u32 dims[rank], then
// little-endian complex float64 pairs in row-major order.
struct ComplexArray {
  std::vector<std::uint32_t> dims;
  std::vector<cplx> data;
};

inline constexpr std::uint16_t kArrayFormatVersion = 1;

void write_array(const std::filesystem::path& path, const ComplexArray& a);
void write_array(const std::filesystem::path& path, const Eigen::MatrixXcd& m);
void write_array(const std::filesystem::path& path, const CVec& v);
ComplexArray read_array(const std::filesystem::path& path);

}  // namespace qmfd
