#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace clare {

using SampleId = std::uint32_t;
using ClassId = std::uint16_t;

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct EmbeddingRecord {
  SampleId sample_id = 0;
  Split split = Split::Train;
  ClassId label = 0;
  std::vector<float> vector;
};

/// Immutable table of frozen-encoder features.
///
/// The constructor enforces every invariant (label range, vector width,
/// unique ids, finite components) and throws DataError otherwise, so any
/// EmbeddingStore value in the program is valid.
class EmbeddingStore {
 public:
  static constexpr std::uint32_t kReferenceDim = 512;

  EmbeddingStore() = default;
  EmbeddingStore(std::uint32_t dim, std::vector<std::string> class_names,
                 std::vector<EmbeddingRecord> records);

  std::uint32_t dim() const { return dim_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<EmbeddingRecord>& records() const { return records_; }

  // nullptr when absent.
  const EmbeddingRecord* find(SampleId id) const;
  const EmbeddingRecord& at(SampleId id) const;  // throws DataError

  std::vector<SampleId> ids(Split split) const;  // ascending

  // Field-exact comparison; floats compare by bit pattern.
  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b);

 private:
  std::uint32_t dim_ = kReferenceDim;
  std::vector<std::string> class_names_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<SampleId, std::size_t> index_;
};

// CLEB-v1 codec. Little-endian throughout:
//   "CLEB" | u32 version=1 | u32 dim | u32 num_classes | u32 count
//   num_classes x (u16 byte-length, UTF-8 bytes)
//   count x (u32 sample_id, u8 split, u16 label, dim x f32)
inline constexpr std::uint32_t kClebVersion = 1;
inline constexpr std::size_t kClebHeaderBytes = 20;

std::size_t write_store(const EmbeddingStore& store, std::ostream& sink);
EmbeddingStore read_store(std::istream& source);

void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path);

// FNV-1a over the CLEB-v1 encoding.
std::uint64_t store_hash(const EmbeddingStore& store);

struct SynthSpec {
  std::uint32_t num_classes = 10;
  std::uint32_t dim = EmbeddingStore::kReferenceDim;
  std::uint32_t train_per_class = 100;
  std::uint32_t test_per_class = 20;
  double mean_radius = 10.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

/// Class means uniform on the sphere of radius mean_radius, samples are
/// mean + N(0, noise_sigma^2 I). Sample ids run 0..N-1: all train records
/// class by class, then all test records class by class.
EmbeddingStore generate_synthetic(const SynthSpec& spec);

}  // namespace clare
