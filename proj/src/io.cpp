#include "qmfd/io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qmfd/error.hpp"

namespace qmfd {

namespace {

static_assert(std::endian::native == std::endian::little, "array dumps assume a little-endian host");

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated array file");
  return v;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw std::logic_error("CSV row width does not match the header");
  rows_.push_back(cells);
  return *this;
}

CsvTable& CsvTable::row(const std::vector<double>& cells) {
  std::vector<std::string> s;
  s.reserve(cells.size());
  for (double x : cells) s.push_back(format_number(x));
  return row(s);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return os.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_array(const std::filesystem::path& path, const ComplexArray& a) {
  std::size_t n = 1;
  for (auto d : a.dims) n *= d;
  if (n != a.data.size()) throw std::logic_error("array dims do not match the data size");
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f.write("QMFD", 4);
  put<std::uint16_t>(f, kArrayFormatVersion);
  put<std::uint16_t>(f, static_cast<std::uint16_t>(a.dims.size()));
  for (auto d : a.dims) put<std::uint32_t>(f, d);
  for (const cplx& z : a.data) {
    put<double>(f, z.real());
    put<double>(f, z.imag());
  }
}

void write_array(const std::filesystem::path& path, const Eigen::MatrixXcd& m) {
  ComplexArray a;
  a.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  a.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.data.push_back(m(i, j));
  write_array(path, a);
}

void write_array(const std::filesystem::path& path, const CVec& v) {
  ComplexArray a;
  a.dims = {static_cast<std::uint32_t>(v.size())};
  a.data.assign(v.data(), v.data() + v.size());
  write_array(path, a);
}

ComplexArray read_array(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "QMFD") throw std::runtime_error("not a QMFD array file");
  if (get<std::uint16_t>(f) != kArrayFormatVersion) throw std::runtime_error("unsupported array version");
  const auto rank = get<std::uint16_t>(f);
  ComplexArray a;
  std::size_t n = 1;
  for (int i = 0; i < rank; ++i) {
    a.dims.push_back(get<std::uint32_t>(f));
    n *= a.dims.back();
  }
  a.data.resize(n);
  for (auto& z : a.data) {
    const double re = get<double>(f);
    z = cplx(re, get<double>(f));
  }
  return a;
}

}  // namespace qmfd
