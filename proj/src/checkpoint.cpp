#include "entrosim/nn/checkpoint.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "entrosim/bytes.hpp"
#include "entrosim/entropy.hpp"
#include "entrosim/errors.hpp"

namespace entrosim::nn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson encoder_to_json(const EncoderConfig& c) {
  ojson j;
  j["input_h"] = c.input_h;
  j["input_w"] = c.input_w;
  j["blocks"] = ojson::array();
  for (const auto& b : c.blocks) j["blocks"].push_back({{"n_conv", b.n_conv}, {"filters", b.filters}});
  j["fc1_units"] = c.fc1_units;
  j["embed_units"] = c.embed_units;
  j["n_classes"] = c.n_classes;
  j["input_scale"] = c.input_scale;
  return j;
}

EncoderConfig encoder_from_json(const ojson& j) {
  EncoderConfig c;
  c.input_h = j.at("input_h").get<std::size_t>();
  c.input_w = j.at("input_w").get<std::size_t>();
  c.blocks.clear();
  for (const auto& b : j.at("blocks")) c.blocks.push_back({b.at("n_conv").get<std::size_t>(), b.at("filters").get<std::size_t>()});
  c.fc1_units = j.at("fc1_units").get<std::size_t>();
  c.embed_units = j.at("embed_units").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.input_scale = j.value("input_scale", 0.125);
  return c;
}

struct NamedBlob {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct ParsedFile {
  ojson header;
  std::map<std::string, Tensor<float>> tensors;
};

ParsedFile parse(std::span<const std::uint8_t> data) {
  if (data.size() < 8) throw FormatError("ntc: truncated file");
  if (data[0] != 'N' || data[1] != 'T' || data[2] != 'C' || data[3] != '1') {
    throw FormatError("ntc: bad magic (expected NTC1)");
  }
  const auto header_len = bytes::get_le<std::uint32_t>(data, 4);
  if (data.size() < 8 + std::size_t{header_len}) throw FormatError("ntc: header runs past end of file");
  ParsedFile out;
  try {
    out.header = ojson::parse(data.begin() + 8, data.begin() + 8 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ntc: bad JSON header: ") + e.what());
  }
  const std::size_t blob_start = 8 + header_len;
  const std::size_t blob_size = data.size() - blob_start;
  try {
    if (out.header.at("format_version").get<std::uint32_t>() != kCheckpointFormatVersion) {
      throw FormatError("ntc: unsupported format_version " + out.header.at("format_version").dump());
    }
    for (const auto& t : out.header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      if (t.at("dtype").get<std::string>() != "f32") throw FormatError("ntc: tensor '" + name + "' is not f32");
      const Shape shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto byte_len = t.at("byte_len").get<std::size_t>();
      if (byte_len != 4 * shape_size(shape)) {
        throw FormatError("ntc: tensor '" + name + "' byte_len does not match shape " + shape_string(shape));
      }
      if (offset + byte_len > blob_size) throw FormatError("ntc: tensor '" + name + "' runs past end of file");
      std::vector<float> values(shape_size(shape));
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = bytes::get_le<float>(data, blob_start + offset + 4 * i);
      if (!out.tensors.emplace(name, Tensor<float>(shape, std::move(values))).second) {
        throw FormatError("ntc: duplicate tensor '" + name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ntc: malformed header: ") + e.what());
  }
  return out;
}

std::string join(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  std::vector<NamedBlob> blobs;
  for (const auto& e : ck.params.entries()) blobs.push_back({e.name, e.value.shape(), e.value.storage()});
  blobs.push_back({"centers", {ck.bank.n_classes, ck.bank.dim},
                   std::vector<float>(ck.bank.centers.begin(), ck.bank.centers.end())});
  blobs.push_back({"class_weights", {ck.bank.n_classes},
                   std::vector<float>(ck.bank.class_weights.begin(), ck.bank.class_weights.end())});

  ojson header;
  header["format_version"] = kCheckpointFormatVersion;
  header["encoder_config"] = encoder_to_json(ck.encoder);
  header["alpha"] = ck.alpha;
  header["tensors"] = ojson::array();
  std::size_t offset = 0;
  for (const auto& b : blobs) {
    const std::size_t len = 4 * b.values.size();
    header["tensors"].push_back(
        {{"name", b.name}, {"dtype", "f32"}, {"shape", b.shape}, {"offset", offset}, {"byte_len", len}});
    offset += len;
  }
  header["family_names"] = ck.family_names;
  header["center_counts"] = ck.bank.counts;

  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + offset);
  out.insert(out.end(), {'N', 'T', 'C', '1'});
  bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& b : blobs) {
    for (float v : b.values) bytes::put_le<float>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  auto parsed = parse(data);
  Checkpoint ck;
  try {
    ck.encoder = encoder_from_json(parsed.header.at("encoder_config"));
    ck.alpha = parsed.header.at("alpha").get<double>();
    ck.family_names = parsed.header.value("family_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ntc: malformed header: ") + e.what());
  }
  try {
    ck.encoder.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("ntc: invalid encoder_config: ") + e.what());
  }

  std::vector<std::string> missing;
  std::vector<std::string> bad_shape;
  auto take = [&](const std::string& name, const Shape& shape) -> Tensor<float> {
    const auto it = parsed.tensors.find(name);
    if (it == parsed.tensors.end()) {
      missing.push_back(name);
      return Tensor<float>(shape);
    }
    if (it->second.shape() != shape) {
      bad_shape.push_back(name + " " + shape_string(it->second.shape()) + " (expected " + shape_string(shape) + ")");
      return Tensor<float>(shape);
    }
    return it->second;
  };
  for (const auto& spec : parameter_layout(ck.encoder)) ck.params.add(spec.name, take(spec.name, spec.shape));
  const std::size_t k = ck.encoder.n_classes, d = ck.encoder.embed_units;
  const auto centers = take("centers", {k, d});
  const auto weights = take("class_weights", {k});
  if (!missing.empty()) throw FormatError("ntc: missing tensors: " + join(missing));
  if (!bad_shape.empty()) throw FormatError("ntc: shape mismatch: " + join(bad_shape));

  ck.bank = CenterBank(k, d);
  ck.bank.centers.assign(centers.storage().begin(), centers.storage().end());
  ck.bank.class_weights.assign(weights.storage().begin(), weights.storage().end());
  const auto counts = parsed.header.value("center_counts", std::vector<std::int64_t>(k, 0));
  if (counts.size() != k) throw FormatError("ntc: center_counts has wrong length");
  ck.bank.counts = counts;
  if (!ck.family_names.empty() && ck.family_names.size() != k) {
    throw FormatError("ntc: family_names has " + std::to_string(ck.family_names.size()) + " entries, expected " +
                      std::to_string(k));
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  const auto data = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError(path, "write failed");
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto data = read_file_bytes(path);
  try {
    return decode_checkpoint(data);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::map<std::string, Tensor<float>> read_checkpoint_tensors(const fs::path& path) {
  const auto data = read_file_bytes(path);
  try {
    return parse(data).tensors;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ImportSummary import_tensors(const fs::path& path, ParamSet<float>& target, ImportMode mode,
                             const std::function<bool(const std::string&)>& select) {
  const auto tensors = read_checkpoint_tensors(path);
  ImportSummary summary;
  std::vector<std::string> missing;
  for (auto& entry : target.entries()) {
    if (select && !select(entry.name)) continue;
    const auto it = tensors.find(entry.name);
    if (it == tensors.end()) {
      (mode == ImportMode::Strict ? missing : summary.not_found).push_back(entry.name);
      continue;
    }
    if (it->second.shape() != entry.value.shape()) {
      throw ShapeError(path.string() + ": tensor '" + entry.name + "' has shape " + shape_string(it->second.shape()) +
                       ", target expects " + shape_string(entry.value.shape()));
    }
  }
  if (!missing.empty()) throw FormatError(path.string() + ": missing tensors: " + join(missing));
  for (auto& entry : target.entries()) {
    if (select && !select(entry.name)) continue;
    const auto it = tensors.find(entry.name);
    if (it == tensors.end()) continue;
    entry.value = it->second;
    summary.imported.push_back(entry.name);
  }
  return summary;
}

}  // namespace entrosim::nn
