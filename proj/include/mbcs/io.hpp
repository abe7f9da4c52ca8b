#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mbcs/sensing.hpp"
#include "mbcs/types.hpp"

namespace mbcs {

// Binary container for packets, measurements, and coefficient matrices:
// little-endian magic "MBCS", u32 row count, u32 column count, then the
// samples as f64 row-major. CSV files carry one row per time sample with
// comma-separated channels and no header unless the caller skips one.

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("binary matrix: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64le(std::ostream& os, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("binary matrix: truncated payload");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace detail

inline void write_matrix_binary(std::ostream& os, const Matrix& m) {
  os.write("MBCS", 4);
  detail::put_u32le(os, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32le(os, static_cast<std::uint32_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) detail::put_f64le(os, m(r, c));
  if (!os) throw std::runtime_error("binary matrix: write failed");
}

inline Matrix read_matrix_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string_view(magic, 4) != "MBCS")
    throw std::runtime_error("binary matrix: bad magic, not an MBCS file");
  const auto rows = static_cast<Index>(detail::get_u32le(is));
  const auto cols = static_cast<Index>(detail::get_u32le(is));
  if (rows < 1 || cols < 1) throw std::runtime_error("binary matrix: degenerate dimensions");
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = detail::get_f64le(is);
  return m;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  char buf[64];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) os << ',';
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("csv matrix: write failed");
}

inline Matrix read_matrix_csv(std::istream& is, bool skip_header = false) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("csv matrix: non-numeric cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("csv matrix: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty())
    throw std::runtime_error("csv matrix: no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

enum class MatrixFileFormat { Binary, Csv };

inline void save_matrix(const std::string& path, const Matrix& m,
                        MatrixFileFormat format = MatrixFileFormat::Binary) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  if (format == MatrixFileFormat::Binary)
    write_matrix_binary(os, m);
  else
    write_matrix_csv(os, m);
}

/// Reads either container, sniffing the 4-byte magic.
inline Matrix load_matrix(const std::string& path, bool csv_header = false) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  const bool is_binary = is.gcount() == 4 && std::string_view(magic, 4) == "MBCS";
  is.clear();
  is.seekg(0);
  if (is_binary) return read_matrix_binary(is);
  return read_matrix_csv(is, csv_header);
}

inline void save_packet(const std::string& path, const Packet& p,
                        MatrixFileFormat format = MatrixFileFormat::Binary) {
  save_matrix(path, p.samples, format);
}

inline Packet load_packet(const std::string& path, bool csv_header = false) {
  return Packet(load_matrix(path, csv_header));
}

inline void save_measurements(const std::string& path, const Measurements& y,
                              MatrixFileFormat format = MatrixFileFormat::Binary) {
  save_matrix(path, y.values, format);
}

inline Measurements load_measurements(const std::string& path, bool csv_header = false) {
  return Measurements(load_matrix(path, csv_header));
}

// Sensing matrices serialize as (kind, rows, cols, seed) plus the explicit
// content so a dump can be audited without rerunning the generator.

inline nlohmann::json sensing_to_json(const SensingMatrix& phi) {
  nlohmann::json j;
  j["kind"] = phi.kind == SensingKind::BernoulliTwoOnes ? "bernoulli-two-ones" : "gaussian";
  j["rows"] = phi.rows;
  j["cols"] = phi.cols;
  j["seed"] = phi.seed;
  if (phi.kind == SensingKind::BernoulliTwoOnes) {
    auto ones = nlohmann::json::array();
    for (const auto& pr : phi.ones) ones.push_back({pr[0], pr[1]});
    j["ones"] = std::move(ones);
  } else {
    auto entries = nlohmann::json::array();
    for (Index r = 0; r < phi.rows; ++r)
      for (Index c = 0; c < phi.cols; ++c) entries.push_back(phi.entries(r, c));
    j["entries"] = std::move(entries);
  }
  return j;
}

inline SensingMatrix sensing_from_json(const nlohmann::json& j) {
  SensingMatrix phi;
  const std::string kind = j.at("kind").get<std::string>();
  phi.rows = j.at("rows").get<Index>();
  phi.cols = j.at("cols").get<Index>();
  phi.seed = j.at("seed").get<std::uint64_t>();
  if (phi.rows < 1 || phi.cols < 1)
    throw std::runtime_error("sensing json: degenerate dimensions");
  if (kind == "bernoulli-two-ones") {
    phi.kind = SensingKind::BernoulliTwoOnes;
    const auto& ones = j.at("ones");
    if (static_cast<Index>(ones.size()) != phi.cols)
      throw std::runtime_error("sensing json: ones list does not match column count");
    phi.ones.reserve(ones.size());
    for (const auto& pr : ones) {
      const auto a = pr.at(0).get<Index>();
      const auto b = pr.at(1).get<Index>();
      if (a == b || a < 0 || b < 0 || a >= phi.rows || b >= phi.rows)
        throw std::runtime_error("sensing json: invalid index pair");
      phi.ones.push_back({a, b});
    }
  } else if (kind == "gaussian") {
    phi.kind = SensingKind::Gaussian;
    const auto& entries = j.at("entries");
    if (static_cast<Index>(entries.size()) != phi.rows * phi.cols)
      throw std::runtime_error("sensing json: entry count does not match dimensions");
    phi.entries.resize(phi.rows, phi.cols);
    std::size_t at = 0;
    for (Index r = 0; r < phi.rows; ++r)
      for (Index c = 0; c < phi.cols; ++c) phi.entries(r, c) = entries.at(at++).get<double>();
  } else {
    throw std::runtime_error("sensing json: unknown kind '" + kind + "'");
  }
  return phi;
}

inline void save_sensing(const std::string& path, const SensingMatrix& phi) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << sensing_to_json(phi).dump(2) << '\n';
}

inline SensingMatrix load_sensing(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  is >> j;
  return sensing_from_json(j);
}

inline nlohmann::json result_to_json(const RecoveryResult& res,
                                     std::optional<double> nmse_vs_truth = std::nullopt) {
  nlohmann::json j;
  j["gamma"] = std::vector<double>(res.gamma.data(), res.gamma.data() + res.gamma.size());
  j["cost_trace"] = res.cost_trace;
  j["iterations"] = res.iterations;
  j["wall_time_s"] = res.wall_time_s;
  j["converged"] = res.converged;
  j["skipped_blocks"] = res.skipped_blocks;
  if (nmse_vs_truth) j["nmse"] = *nmse_vs_truth;
  return j;
}

inline void save_result(const std::string& path, const RecoveryResult& res,
                        std::optional<double> nmse_vs_truth = std::nullopt) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << result_to_json(res, nmse_vs_truth).dump(2) << '\n';
}

}  // namespace mbcs
