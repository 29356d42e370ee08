#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace entrosim {

enum class FillPolicy : std::uint8_t {
  Resample = 0,     // linear interpolation of the stream onto H*W cells
  PadTruncate = 1,  // row-major copy, truncated or zero-padded
};

std::string to_string(FillPolicy policy);
FillPolicy parse_fill_policy(const std::string& text);

struct ExtractConfig {
  std::size_t segment_len = 200;
  std::size_t graph_h = 224;
  std::size_t graph_w = 224;
  FillPolicy fill_policy = FillPolicy::Resample;

  /// Throws ConfigError when a length or dimension is zero.
  void validate() const;
};

/// A window of at most `segment_len` bytes; a view into the file buffer.
using Segment = std::span<const std::uint8_t>;

struct EntropyStream {
  std::vector<double> values;  // bits per byte, one per segment
  std::uint64_t source_len = 0;
  std::size_t segment_len = 0;
};

/// Fixed-size matrix of per-segment entropies, row-major.
struct EntropyGraph {
  std::size_t height = 0;
  std::size_t width = 0;
  FillPolicy fill_policy = FillPolicy::Resample;
  std::vector<double> cells;
  std::string sample_id;
  std::vector<std::string> warnings;

  double at(std::size_t row, std::size_t col) const { return cells[row * width + col]; }
};

/// Splits `bytes` into consecutive windows of `segment_len` bytes; the last
/// one keeps the remainder. Empty input gives no segments.
std::vector<Segment> segment_bytes(std::span<const std::uint8_t> bytes, std::size_t segment_len);

/// Shannon entropy (base 2) of the byte histogram of `segment`.
/// Throws ConfigError for an empty segment.
double segment_entropy(Segment segment);

EntropyStream entropy_stream(std::span<const std::uint8_t> bytes, const ExtractConfig& config);

/// Reads the file at `path` fully and computes its stream; IoError on failure.
EntropyStream entropy_stream_file(const std::filesystem::path& path, const ExtractConfig& config);

/// Maps a stream of any length to a graph_h x graph_w matrix using
/// `config.fill_policy`. An empty stream yields an all-zero graph flagged
/// with the "empty_stream" warning.
EntropyGraph build_entropy_graph(const EntropyStream& stream, const ExtractConfig& config);

/// Linear interpolation of `values` onto `target_len` evenly spaced points,
/// first and last points aligned with the endpoints.
std::vector<double> resample_linear(std::span<const double> values, std::size_t target_len);

struct ExtractedFile {
  EntropyGraph graph;
  std::uint64_t source_len = 0;
  std::size_t n_segments = 0;
};

/// Reads, segments and maps one file. A zero-length file gives a
/// warning-flagged all-zero graph; a directory or unreadable path throws IoError.
ExtractedFile extract_file(const std::filesystem::path& path, const ExtractConfig& config);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace entrosim
