#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace entrosim::synth {

enum class RegionKind {
  Constant,        // one repeated byte, entropy 0
  TextLike,        // 64-symbol alphabet with geometric skew, ~4-5 bits
  CompressedLike,  // uniform bytes with ~10% of them in injected runs
  EncryptedLike,   // shuffled 256-byte decks: every value equally frequent
};

std::string to_string(RegionKind kind);
RegionKind parse_region_kind(const std::string& text);

struct Region {
  RegionKind kind = RegionKind::EncryptedLike;
  std::size_t mean_len = 4096;  // bytes
  double len_jitter = 0.15;     // length drawn from mean_len * (1 +- jitter)
};

struct FamilySpec {
  std::string name;
  std::vector<Region> layout;
  std::uint64_t seed = 0;  // fixes per-family traits (constant byte, alphabet order)

  /// Throws ConfigError for an empty name, fewer than 2 regions or a zero length.
  void validate() const;
};

struct SynthCorpusConfig {
  std::vector<FamilySpec> families;
  std::vector<std::size_t> samples_per_family;  // one entry per family
  std::uint64_t seed = 7;

  void validate() const;
};

/// Emits each region of `spec` in order.
std::vector<std::uint8_t> generate_sample(const FamilySpec& spec, std::mt19937_64& rng);

struct CorpusSummary {
  std::map<std::string, std::string> labels;  // relative path -> family
  std::size_t files = 0;
  std::uint64_t total_bytes = 0;
};

/// Writes `out_dir/<family>/<family>_<NNNN>.bin` plus `out_dir/labels.csv`.
/// Each sample has its own seed derived from (config.seed, family, index),
/// so the tree is a pure function of the config.
CorpusSummary generate_corpus(const SynthCorpusConfig& config, const std::filesystem::path& out_dir);

/// Presets:
///   "paper-shape" - 8 families x 40 plus petya/dalexis/upatre with 6/9/18,
///                   where bitman and teslacrypt share one layout.
///   "separated"   - same counts, every layout distinct.
SynthCorpusConfig preset(const std::string& name, std::uint64_t seed);

std::vector<std::string> preset_names();

/// Mixing function for deriving independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace entrosim::synth
