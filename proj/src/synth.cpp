#include "entrosim/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "entrosim/corpus.hpp"
#include "entrosim/errors.hpp"

namespace entrosim::synth {

namespace fs = std::filesystem;

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::Constant: return "CONSTANT";
    case RegionKind::TextLike: return "TEXT_LIKE";
    case RegionKind::CompressedLike: return "COMPRESSED_LIKE";
    case RegionKind::EncryptedLike: return "ENCRYPTED_LIKE";
  }
  return "?";
}

RegionKind parse_region_kind(const std::string& text) {
  if (text == "CONSTANT") return RegionKind::Constant;
  if (text == "TEXT_LIKE") return RegionKind::TextLike;
  if (text == "COMPRESSED_LIKE") return RegionKind::CompressedLike;
  if (text == "ENCRYPTED_LIKE") return RegionKind::EncryptedLike;
  throw ConfigError("unknown region kind '" + text + "'");
}

void FamilySpec::validate() const {
  if (name.empty()) throw ConfigError("family spec: empty name");
  if (layout.size() < 2) throw ConfigError("family spec '" + name + "': need at least 2 regions");
  for (const auto& r : layout) {
    if (r.mean_len == 0) throw ConfigError("family spec '" + name + "': region with zero mean_len");
    if (r.len_jitter < 0.0 || r.len_jitter >= 1.0) {
      throw ConfigError("family spec '" + name + "': len_jitter must be in [0, 1)");
    }
  }
}

void SynthCorpusConfig::validate() const {
  if (families.size() < 2) throw ConfigError("synth: need at least 2 families");
  if (samples_per_family.size() != families.size()) {
    throw ConfigError("synth: samples_per_family must have one entry per family");
  }
  for (std::size_t i = 0; i < families.size(); ++i) {
    families[i].validate();
    if (samples_per_family[i] == 0) throw ConfigError("synth: family '" + families[i].name + "' has 0 samples");
    for (std::size_t j = 0; j < i; ++j) {
      if (families[j].name == families[i].name) throw ConfigError("synth: duplicate family '" + families[i].name + "'");
    }
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::size_t kAlphabet = 64;
constexpr double kTextSkew = 0.9;
constexpr double kRunFraction = 0.10;

struct FamilyTraits {
  std::uint8_t constant_byte;
  std::array<std::uint8_t, kAlphabet> alphabet;
};

FamilyTraits traits_for(const FamilySpec& spec) {
  std::mt19937_64 rng(mix_seed(spec.seed, 0xFA11));
  FamilyTraits t{};
  t.constant_byte = static_cast<std::uint8_t>(rng() & 0xFF);
  std::array<std::uint8_t, 95> printable{};
  std::iota(printable.begin(), printable.end(), std::uint8_t{0x20});
  std::shuffle(printable.begin(), printable.end(), rng);
  std::copy_n(printable.begin(), kAlphabet, t.alphabet.begin());
  return t;
}

void emit_text(std::vector<std::uint8_t>& out, std::size_t len, const FamilyTraits& traits, std::mt19937_64& rng) {
  std::array<double, kAlphabet> weights{};
  double w = 1.0;
  for (auto& x : weights) {
    x = w;
    w *= kTextSkew;
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  for (std::size_t i = 0; i < len; ++i) out.push_back(traits.alphabet[pick(rng)]);
}

void emit_compressed(std::vector<std::uint8_t>& out, std::size_t len, std::mt19937_64& rng) {
  // Runs average 8 bytes, so starting one with probability f/8 per byte puts
  // roughly a fraction f of the region inside runs.
  std::bernoulli_distribution start_run(kRunFraction / 8.0);
  std::uniform_int_distribution<std::size_t> run_len(4, 12);
  const std::size_t end = out.size() + len;
  while (out.size() < end) {
    const auto b = static_cast<std::uint8_t>(rng() & 0xFF);
    out.push_back(b);
    if (start_run(rng)) {
      const std::size_t n = std::min(run_len(rng), end - out.size());
      out.insert(out.end(), n, b);
    }
  }
}

void emit_encrypted(std::vector<std::uint8_t>& out, std::size_t len, std::mt19937_64& rng) {
  std::array<std::uint8_t, 256> deck{};
  std::iota(deck.begin(), deck.end(), std::uint8_t{0});
  // random phase so deck boundaries do not line up with region starts
  std::size_t pos = static_cast<std::size_t>(rng() % 256);
  std::shuffle(deck.begin(), deck.end(), rng);
  for (std::size_t i = 0; i < len; ++i) {
    if (pos == 256) {
      std::shuffle(deck.begin(), deck.end(), rng);
      pos = 0;
    }
    out.push_back(deck[pos++]);
  }
}

}  // namespace

std::vector<std::uint8_t> generate_sample(const FamilySpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const auto traits = traits_for(spec);
  std::vector<std::uint8_t> out;
  std::size_t expected = 0;
  for (const auto& r : spec.layout) expected += r.mean_len;
  out.reserve(expected + expected / 4);
  for (const auto& region : spec.layout) {
    std::uniform_real_distribution<double> jitter(-region.len_jitter, region.len_jitter);
    const double scaled = static_cast<double>(region.mean_len) * (1.0 + jitter(rng));
    const std::size_t len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
    switch (region.kind) {
      case RegionKind::Constant: out.insert(out.end(), len, traits.constant_byte); break;
      case RegionKind::TextLike: emit_text(out, len, traits, rng); break;
      case RegionKind::CompressedLike: emit_compressed(out, len, rng); break;
      case RegionKind::EncryptedLike: emit_encrypted(out, len, rng); break;
    }
  }
  return out;
}

CorpusSummary generate_corpus(const SynthCorpusConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir, "cannot create corpus directory: " + ec.message());
  CorpusSummary summary;
  for (std::size_t f = 0; f < config.families.size(); ++f) {
    const auto& family = config.families[f];
    const fs::path dir = out_dir / family.name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create family directory: " + ec.message());
    for (std::size_t i = 0; i < config.samples_per_family[f]; ++i) {
      std::mt19937_64 rng(mix_seed(mix_seed(config.seed, f), i));
      const auto bytes = generate_sample(family, rng);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04zu.bin", family.name.c_str(), i);
      const fs::path path = dir / name;
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError(path, "cannot open for writing");
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw IoError(path, "write failed");
      summary.labels[family.name + "/" + name] = family.name;
      ++summary.files;
      summary.total_bytes += bytes.size();
    }
  }
  write_labels_csv(out_dir / "labels.csv", summary.labels);
  return summary;
}

namespace {

using K = RegionKind;

FamilySpec family(std::string name, std::uint64_t seed, std::initializer_list<std::pair<RegionKind, std::size_t>> regions,
                  double jitter = 0.06) {
  FamilySpec spec;
  spec.name = std::move(name);
  spec.seed = seed;
  for (const auto& [kind, len] : regions) spec.layout.push_back({kind, len, jitter});
  return spec;
}

}  // namespace

SynthCorpusConfig preset(const std::string& name, std::uint64_t seed) {
  const bool hard_pair = name == "paper-shape";
  if (!hard_pair && name != "separated") {
    throw ConfigError("unknown synth preset '" + name + "' (expected paper-shape|separated)");
  }
  SynthCorpusConfig config;
  config.seed = seed;
  auto add = [&](FamilySpec spec, std::size_t count) {
    config.families.push_back(std::move(spec));
    config.samples_per_family.push_back(count);
  };
  add(family("bitman", 1, {{K::TextLike, 8000}, {K::EncryptedLike, 24000}, {K::Constant, 6000}, {K::CompressedLike, 10000}}), 40);
  add(family("cerber", 2, {{K::Constant, 4000}, {K::CompressedLike, 30000}, {K::TextLike, 8000}}), 40);
  add(family("dalexis", 3,
             {{K::TextLike, 5000}, {K::CompressedLike, 5000}, {K::TextLike, 5000}, {K::CompressedLike, 5000}, {K::EncryptedLike, 10000}}),
      9);
  add(family("gandcrab", 4, {{K::EncryptedLike, 12000}, {K::TextLike, 12000}, {K::EncryptedLike, 12000}, {K::Constant, 2000}}), 40);
  add(family("locky", 5, {{K::TextLike, 20000}, {K::Constant, 10000}, {K::TextLike, 10000}}), 40);
  add(family("petya", 6, {{K::Constant, 15000}, {K::EncryptedLike, 15000}}), 6);
  if (hard_pair) {
    // bitman's layout with lengths nudged well inside the length jitter
    add(family("teslacrypt", 7, {{K::TextLike, 8300}, {K::EncryptedLike, 23000}, {K::Constant, 6300}, {K::CompressedLike, 10300}}), 40);
  } else {
    add(family("teslacrypt", 7,
               {{K::CompressedLike, 20000}, {K::TextLike, 4000}, {K::EncryptedLike, 8000}, {K::TextLike, 4000}, {K::Constant, 6000}}),
        40);
  }
  add(family("upatre", 8,
             {{K::CompressedLike, 3000}, {K::TextLike, 3000}, {K::Constant, 3000}, {K::EncryptedLike, 3000}, {K::TextLike, 3000},
              {K::CompressedLike, 3000}}),
      18);
  add(family("virlock", 9,
             {{K::CompressedLike, 8000}, {K::Constant, 8000}, {K::CompressedLike, 8000}, {K::Constant, 8000}, {K::CompressedLike, 8000}}),
      40);
  add(family("wannacry", 10, {{K::Constant, 2000}, {K::TextLike, 3000}, {K::EncryptedLike, 45000}}), 40);
  add(family("zerber", 11, {{K::EncryptedLike, 5000}, {K::Constant, 20000}, {K::EncryptedLike, 5000}}), 40);
  return config;
}

std::vector<std::string> preset_names() { return {"paper-shape", "separated"}; }

}  // namespace entrosim::synth
