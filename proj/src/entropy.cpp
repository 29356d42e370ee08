#include "entrosim/entropy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "entrosim/errors.hpp"

namespace entrosim {

std::string to_string(FillPolicy policy) {
  return policy == FillPolicy::Resample ? "resample" : "pad";
}

FillPolicy parse_fill_policy(const std::string& text) {
  if (text == "resample") return FillPolicy::Resample;
  if (text == "pad" || text == "pad_truncate") return FillPolicy::PadTruncate;
  throw ConfigError("unknown fill policy '" + text + "' (expected resample|pad)");
}

void ExtractConfig::validate() const {
  if (segment_len == 0) throw ConfigError("segment_len must be >= 1");
  if (graph_h == 0 || graph_w == 0) throw ConfigError("graph dimensions must be >= 1");
}

std::vector<Segment> segment_bytes(std::span<const std::uint8_t> bytes, std::size_t segment_len) {
  if (segment_len == 0) throw ConfigError("segment_len must be >= 1");
  std::vector<Segment> segments;
  segments.reserve((bytes.size() + segment_len - 1) / segment_len);
  for (std::size_t pos = 0; pos < bytes.size(); pos += segment_len) {
    segments.push_back(bytes.subspan(pos, std::min(segment_len, bytes.size() - pos)));
  }
  return segments;
}

namespace {

// H = log2(n) - (1/n) * sum_i c_i log2 c_i, which equals -sum p_i log2 p_i
// and keeps the all-distinct case exact (every c_i log2 c_i is zero).
double entropy_from_histogram(const std::array<std::uint32_t, 256>& counts, std::size_t n) {
  double weighted = 0.0;
  std::size_t distinct = 0;
  for (std::uint32_t c : counts) {
    if (c == 0) continue;
    ++distinct;
    if (c > 1) weighted += static_cast<double>(c) * std::log2(static_cast<double>(c));
  }
  if (distinct <= 1) return 0.0;
  const double dn = static_cast<double>(n);
  const double h = std::log2(dn) - weighted / dn;
  return std::clamp(h, 0.0, 8.0);
}

}  // namespace

double segment_entropy(Segment segment) {
  if (segment.empty()) throw ConfigError("segment_entropy: empty segment");
  std::array<std::uint32_t, 256> counts{};
  for (std::uint8_t b : segment) ++counts[b];
  return entropy_from_histogram(counts, segment.size());
}

EntropyStream entropy_stream(std::span<const std::uint8_t> bytes, const ExtractConfig& config) {
  config.validate();
  EntropyStream stream;
  stream.source_len = bytes.size();
  stream.segment_len = config.segment_len;
  const std::size_t l = config.segment_len;
  stream.values.reserve((bytes.size() + l - 1) / l);

  std::array<std::uint32_t, 256> counts{};
  for (std::size_t pos = 0; pos < bytes.size(); pos += l) {
    const std::size_t len = std::min(l, bytes.size() - pos);
    counts.fill(0);
    const std::uint8_t* p = bytes.data() + pos;
    for (std::size_t i = 0; i < len; ++i) ++counts[p[i]];
    stream.values.push_back(entropy_from_histogram(counts, len));
  }
  return stream;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) throw IoError(path, "is a directory, expected a file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  if (size < 0) throw IoError(path, "cannot determine file size");
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw IoError(path, "read failed");
  }
  return bytes;
}

EntropyStream entropy_stream_file(const std::filesystem::path& path, const ExtractConfig& config) {
  return entropy_stream(read_file_bytes(path), config);
}

std::vector<double> resample_linear(std::span<const double> values, std::size_t target_len) {
  std::vector<double> out(target_len, 0.0);
  if (values.empty() || target_len == 0) return out;
  const std::size_t n = values.size();
  if (n == 1 || target_len == 1) {
    std::fill(out.begin(), out.end(), values[0]);
    return out;
  }
  const double scale = static_cast<double>(n - 1) / static_cast<double>(target_len - 1);
  for (std::size_t k = 0; k < target_len; ++k) {
    const double pos = static_cast<double>(k) * scale;
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo >= n - 1) {
      out[k] = values[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    // a + f*(b-a) keeps constant runs exact.
    out[k] = values[lo] + frac * (values[lo + 1] - values[lo]);
  }
  return out;
}

EntropyGraph build_entropy_graph(const EntropyStream& stream, const ExtractConfig& config) {
  config.validate();
  EntropyGraph graph;
  graph.height = config.graph_h;
  graph.width = config.graph_w;
  graph.fill_policy = config.fill_policy;
  const std::size_t cells = config.graph_h * config.graph_w;

  if (stream.values.empty()) {
    graph.cells.assign(cells, 0.0);
    graph.warnings.push_back("empty_stream");
    return graph;
  }
  if (config.fill_policy == FillPolicy::Resample) {
    graph.cells = resample_linear(stream.values, cells);
  } else {
    graph.cells.assign(cells, 0.0);
    const std::size_t n = std::min(cells, stream.values.size());
    std::copy_n(stream.values.begin(), n, graph.cells.begin());
  }
  for (double& v : graph.cells) v = std::clamp(v, 0.0, 8.0);
  return graph;
}

ExtractedFile extract_file(const std::filesystem::path& path, const ExtractConfig& config) {
  const auto stream = entropy_stream_file(path, config);
  ExtractedFile result;
  result.graph = build_entropy_graph(stream, config);
  result.source_len = stream.source_len;
  result.n_segments = stream.values.size();
  if (stream.source_len == 0) {
    result.graph.warnings.insert(result.graph.warnings.begin(), "empty_file");
  }
  return result;
}

}  // namespace entrosim
