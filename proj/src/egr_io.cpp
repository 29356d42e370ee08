#include "entrosim/egr_io.hpp"

#include <fstream>

#include "entrosim/bytes.hpp"
#include "entrosim/errors.hpp"

namespace entrosim {

std::vector<std::uint8_t> encode_egr(const EntropyGraph& graph) {
  if (graph.cells.size() != graph.height * graph.width) {
    throw ShapeError("encode_egr: cell count does not match H*W");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kEgrHeaderSize + 4 * graph.cells.size());
  out.insert(out.end(), {'E', 'G', 'R', '1'});
  bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(graph.height));
  bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(graph.width));
  out.push_back(static_cast<std::uint8_t>(graph.fill_policy));
  out.insert(out.end(), {0, 0, 0});
  for (double v : graph.cells) bytes::put_le<float>(out, static_cast<float>(v));
  return out;
}

EntropyGraph decode_egr(std::span<const std::uint8_t> data) {
  if (data.size() < kEgrHeaderSize) throw FormatError("egr: truncated header");
  if (data[0] != 'E' || data[1] != 'G' || data[2] != 'R' || data[3] != '1') {
    throw FormatError("egr: bad magic (expected EGR1)");
  }
  EntropyGraph graph;
  graph.height = bytes::get_le<std::uint32_t>(data, 4);
  graph.width = bytes::get_le<std::uint32_t>(data, 8);
  const std::uint8_t policy = data[12];
  if (policy > 1) throw FormatError("egr: unknown fill policy " + std::to_string(policy));
  if (data[13] != 0 || data[14] != 0 || data[15] != 0) throw FormatError("egr: reserved bytes not zero");
  graph.fill_policy = static_cast<FillPolicy>(policy);
  const std::size_t n = graph.height * graph.width;
  if (graph.height == 0 || graph.width == 0) throw FormatError("egr: zero dimension");
  if (data.size() != kEgrHeaderSize + 4 * n) {
    throw FormatError("egr: payload is " + std::to_string(data.size() - kEgrHeaderSize) +
                      " bytes, expected " + std::to_string(4 * n));
  }
  graph.cells.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    graph.cells[i] = bytes::get_le<float>(data, kEgrHeaderSize + 4 * i);
  }
  return graph;
}

void write_egr(const std::filesystem::path& path, const EntropyGraph& graph) {
  const auto encoded = encode_egr(graph);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(encoded.size()));
  if (!out) throw IoError(path, "write failed");
}

EntropyGraph read_egr(const std::filesystem::path& path) {
  const auto data = read_file_bytes(path);
  try {
    auto graph = decode_egr(data);
    graph.sample_id = path.stem().string();
    return graph;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace entrosim
