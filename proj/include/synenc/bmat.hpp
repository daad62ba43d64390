#pragma once

#include <string>
#include <string_view>

#include "synenc/common.hpp"

namespace synenc::bmat {

// "BMAT", u32 version = 1, u64 rows, u64 cols, rows*cols little-endian f32
// in row-major order.
std::string encode(const Matrix& m);
Matrix decode(std::string_view bytes);

// Comma-separated rows; a first row that does not parse as numbers is a header.
Matrix parse_csv(std::string_view text);

void write(const std::string& path, const Matrix& m);
// BMAT if the file starts with the magic, CSV otherwise. Throws MalformedMatrix.
Matrix read(const std::string& path);

// Values as they come back from a BMAT round trip.
Matrix round_to_f32(const Matrix& m);

}  // namespace synenc::bmat
