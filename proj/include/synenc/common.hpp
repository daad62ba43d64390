#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <spdlog/spdlog.h>

namespace synenc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  // treebank
  UnbalancedParens,
  EmptyNode,
  NoTokens,
  MalformedTree,
  MalformedConllu,
  MultipleRoots,
  DanglingHead,
  CycleDetected,
  CountMismatch,
  NonMonotonicTiming,
  SurfaceMismatch,
  MalformedTiming,
  // features
  InvalidArgument,
  DegenerateInput,
  // incremental parser
  EmptyTreebank,
  BeamExhausted,
  InvalidGrammar,
  // gcn
  ShapeMismatch,
  DivergenceDetected,
  MalformedCheckpoint,
  // signal / encoder / stats
  NoTimings,
  SingularSystem,
  FoldTooSmall,
  FoldShorterThanBlock,
  // atlas
  DuplicateVoxel,
  IndexGap,
  UnknownRoi,
  UnknownParcel,
  MalformedLabels,
  // pipeline
  ConfigError,
  TrMismatch,
  MissingEncoding,
  HashMismatch,
  MalformedMatrix,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Stable 64-bit string hash (FNV-1a core, splitmix64 finalizer). Identical
// across platforms and runs; used for feature hashing and seed derivation.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = 0);
std::uint64_t mix64(std::uint64_t x);
std::string hex64(std::uint64_t value);

// Combines a master seed with a sequence of tags into an independent stream seed.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t master, const Tags&... tags) {
  std::uint64_t h = mix64(master ^ 0x5ce7e5eedULL);
  ((h = mix64(h ^ hash64(std::string_view(tags), h))), ...);
  return h;
}

// Deterministic RNG. Distribution transforms are written out here rather
// than taken from <random> so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                            // [0, 1)
  std::size_t uniform_index(std::size_t n);    // [0, n)
  double normal();                             // standard normal
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

namespace log {

// Warnings are routed to spdlog and counted so tests can assert on them.
std::size_t warning_count();

void note_warning();

template <typename... Args>
void warn(fmt::format_string<Args...> format, Args&&... args) {
  note_warning();
  spdlog::warn(format, std::forward<Args>(args)...);
}

template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
  spdlog::info(format, std::forward<Args>(args)...);
}

void set_verbose(bool verbose);

}  // namespace log

// Shortest round-trip decimal representation; used wherever a number is
// written in more than one output so the copies match exactly.
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

}  // namespace synenc
