#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "entrosim/nn/encoder.hpp"
#include "entrosim/nn/losses.hpp"
#include "entrosim/nn/params.hpp"

namespace entrosim::nn {

// .ntc layout:
//   "NTC1" | u32 LE header_len | UTF-8 JSON header | tensor blobs (f32 LE)
// The header lists {name, dtype:"f32", shape, offset, byte_len} per tensor,
// offsets relative to the first byte after the header.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  EncoderConfig encoder;
  double alpha = 0.3;
  std::vector<std::string> family_names;
  ParamSet<float> params;
  CenterBank bank;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Strict: every tensor implied by the stored encoder config must be present
/// with the right shape, otherwise FormatError lists the offending names.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Every tensor stored in a checkpoint file, by name, without interpreting
/// the encoder config.
std::map<std::string, Tensor<float>> read_checkpoint_tensors(const std::filesystem::path& path);

enum class ImportMode {
  Strict,   // every selected target tensor must be in the file
  Partial,  // import whatever matches; leave the rest untouched
};

struct ImportSummary {
  std::vector<std::string> imported;
  std::vector<std::string> not_found;  // target names absent from the file (Partial only)
};

/// Copies tensors from a checkpoint file into `target` by name. Shapes must
/// match exactly in both modes (ShapeError otherwise). `select`, when set,
/// restricts which target names are considered.
ImportSummary import_tensors(const std::filesystem::path& path, ParamSet<float>& target, ImportMode mode,
                             const std::function<bool(const std::string&)>& select = {});

}  // namespace entrosim::nn
