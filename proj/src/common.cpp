#include "synenc/common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace synenc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedParens: return "UnbalancedParens";
    case ErrorCode::EmptyNode: return "EmptyNode";
    case ErrorCode::NoTokens: return "NoTokens";
    case ErrorCode::MalformedTree: return "MalformedTree";
    case ErrorCode::MalformedConllu: return "MalformedConllu";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::DanglingHead: return "DanglingHead";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonMonotonicTiming: return "NonMonotonicTiming";
    case ErrorCode::SurfaceMismatch: return "SurfaceMismatch";
    case ErrorCode::MalformedTiming: return "MalformedTiming";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyTreebank: return "EmptyTreebank";
    case ErrorCode::BeamExhausted: return "BeamExhausted";
    case ErrorCode::InvalidGrammar: return "InvalidGrammar";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::MalformedCheckpoint: return "MalformedCheckpoint";
    case ErrorCode::NoTimings: return "NoTimings";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
    case ErrorCode::FoldShorterThanBlock: return "FoldShorterThanBlock";
    case ErrorCode::DuplicateVoxel: return "DuplicateVoxel";
    case ErrorCode::IndexGap: return "IndexGap";
    case ErrorCode::UnknownRoi: return "UnknownRoi";
    case ErrorCode::UnknownParcel: return "UnknownParcel";
    case ErrorCode::MalformedLabels: return "MalformedLabels";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TrMismatch: return "TrMismatch";
    case ErrorCode::MissingEncoding: return "MissingEncoding";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::MalformedMatrix: return "MalformedMatrix";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

namespace log {

namespace {
std::atomic<std::size_t> g_warnings{0};
}

std::size_t warning_count() { return g_warnings.load(); }
void note_warning() { g_warnings.fetch_add(1); }

void set_verbose(bool verbose) {
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
}

}  // namespace log

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, end);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::IoError, "short write to '" + path + "'");
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

double parse_double(std::string_view text, const std::string& context) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorCode::InvalidArgument, context + ": not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& context) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorCode::InvalidArgument, context + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace synenc
