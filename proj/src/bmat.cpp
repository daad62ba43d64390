#include "synenc/bmat.hpp"

#include <bit>
#include <cmath>

namespace synenc::bmat {

namespace {

constexpr std::string_view kMagic = "BMAT";
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode(const Matrix& m) {
  if (!m.allFinite()) fail(ErrorCode::MalformedMatrix, "refusing to write non-finite values");
  std::string out(kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
    }
  }
  return out;
}

Matrix decode(std::string_view bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 8 + 8;
  if (bytes.size() < kHeader || bytes.substr(0, 4) != kMagic) {
    fail(ErrorCode::MalformedMatrix, "missing BMAT header");
  }
  if (const auto v = get_le<std::uint32_t>(bytes, 4); v != kVersion) {
    fail(ErrorCode::MalformedMatrix, "unsupported BMAT version " + std::to_string(v));
  }
  const auto rows = get_le<std::uint64_t>(bytes, 8);
  const auto cols = get_le<std::uint64_t>(bytes, 16);
  if (cols != 0 && rows > (bytes.size() - kHeader) / 4 / cols + 1) {
    fail(ErrorCode::MalformedMatrix, "BMAT dimensions exceed the payload");
  }
  if (bytes.size() != kHeader + rows * cols * 4) {
    fail(ErrorCode::MalformedMatrix, fmt::format("BMAT payload is {} bytes; {}x{} needs {}", bytes.size() - kHeader,
                                                 rows, cols, rows * cols * 4));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t pos = kHeader;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c, pos += 4) {
      m(r, c) = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
    }
  }
  if (!m.allFinite()) fail(ErrorCode::MalformedMatrix, "BMAT contains non-finite values");
  return m;
}

Matrix parse_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    std::vector<double> row;
    try {
      for (const auto& c : cells) row.push_back(parse_double(c, "CSV line " + std::to_string(line_no)));
    } catch (const Error& e) {
      if (rows.empty() && line_no == 1) continue;
      fail(ErrorCode::MalformedMatrix, e.what());
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorCode::MalformedMatrix, fmt::format("CSV line {} has {} values, expected {}", line_no, row.size(),
                                                   rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  if (!m.allFinite()) fail(ErrorCode::MalformedMatrix, "CSV contains non-finite values");
  return m;
}

void write(const std::string& path, const Matrix& m) { write_file(path, encode(m)); }

Matrix read(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    if (bytes.starts_with(kMagic)) return decode(bytes);
    return parse_csv(bytes);
  } catch (const Error& e) {
    fail(ErrorCode::MalformedMatrix, path + ": " + e.what());
  }
}

Matrix round_to_f32(const Matrix& m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace synenc::bmat
