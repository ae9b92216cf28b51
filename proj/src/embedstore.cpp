#include "clare/embedstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

#include "clare/binary_io.hpp"
#include "clare/errors.hpp"
#include "clare/hash.hpp"
#include "clare/random.hpp"

namespace clare {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'E', 'B'};

void decode_floats(const std::string& raw, std::vector<float>& out) {
  out.resize(raw.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data()) + 4 * i;
    const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                               (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
    out[i] = std::bit_cast<float>(bits);
  }
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::vector<std::string> class_names,
                               std::vector<EmbeddingRecord> records)
    : dim_(dim), class_names_(std::move(class_names)), records_(std::move(records)) {
  if (dim_ == 0) throw DataError("embedding dim must be positive");
  if (class_names_.size() > 65536) throw DataError("too many classes for a u16 label");
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.label >= class_names_.size()) {
      throw DataError("record " + std::to_string(r.sample_id) + " has label " +
                      std::to_string(r.label) + " >= num_classes");
    }
    if (r.vector.size() != dim_) {
      throw DataError("record " + std::to_string(r.sample_id) + " has vector length " +
                      std::to_string(r.vector.size()) + ", expected " + std::to_string(dim_));
    }
    if (r.split != Split::Train && r.split != Split::Test) {
      throw DataError("record " + std::to_string(r.sample_id) + " has an invalid split");
    }
    for (const float v : r.vector) {
      if (!std::isfinite(v)) {
        throw DataError("record " + std::to_string(r.sample_id) + " has a non-finite component");
      }
    }
    if (!index_.emplace(r.sample_id, i).second) {
      throw DataError("duplicate sample id " + std::to_string(r.sample_id));
    }
  }
}

const EmbeddingRecord* EmbeddingStore::find(SampleId id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

const EmbeddingRecord& EmbeddingStore::at(SampleId id) const {
  const auto* r = find(id);
  if (r == nullptr) throw DataError("sample id " + std::to_string(id) + " not in store");
  return *r;
}

std::vector<SampleId> EmbeddingStore::ids(Split split) const {
  std::vector<SampleId> out;
  for (const auto& r : records_) {
    if (r.split == split) out.push_back(r.sample_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
  if (a.dim_ != b.dim_ || a.class_names_ != b.class_names_ ||
      a.records_.size() != b.records_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.records_.size(); ++i) {
    const auto& x = a.records_[i];
    const auto& y = b.records_[i];
    if (x.sample_id != y.sample_id || x.split != y.split || x.label != y.label) return false;
    if (std::memcmp(x.vector.data(), y.vector.data(), x.vector.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

std::size_t write_store(const EmbeddingStore& store, std::ostream& sink) {
  using namespace binary_io;
  std::size_t bytes = 0;
  sink.write(kMagic, 4);
  put_uint<std::uint32_t>(sink, kClebVersion);
  put_uint<std::uint32_t>(sink, store.dim());
  put_uint<std::uint32_t>(sink, static_cast<std::uint32_t>(store.num_classes()));
  put_uint<std::uint32_t>(sink, static_cast<std::uint32_t>(store.records().size()));
  bytes += kClebHeaderBytes;
  for (const auto& name : store.class_names()) {
    if (name.size() > 0xffff) throw DataError("class name longer than 65535 bytes");
    put_uint<std::uint16_t>(sink, static_cast<std::uint16_t>(name.size()));
    sink.write(name.data(), static_cast<std::streamsize>(name.size()));
    bytes += 2 + name.size();
  }
  std::string block;
  for (const auto& r : store.records()) {
    put_uint<std::uint32_t>(sink, r.sample_id);
    put_uint<std::uint8_t>(sink, static_cast<std::uint8_t>(r.split));
    put_uint<std::uint16_t>(sink, r.label);
    block.resize(4 * r.vector.size());
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(r.vector[i]);
      for (int b = 0; b < 4; ++b) block[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    sink.write(block.data(), static_cast<std::streamsize>(block.size()));
    bytes += 7 + block.size();
  }
  if (!sink) throw IoError("failed writing embedding store");
  return bytes;
}

EmbeddingStore read_store(std::istream& source) {
  using namespace binary_io;
  char magic[4];
  if (!source.read(magic, 4)) throw FormatError("missing CLEB magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, not a CLEB file");
  const auto version = get_uint<std::uint32_t>(source);
  if (version != kClebVersion) {
    throw UnsupportedVersionError("unsupported CLEB version " + std::to_string(version));
  }
  const auto dim = get_uint<std::uint32_t>(source);
  const auto num_classes = get_uint<std::uint32_t>(source);
  const auto count = get_uint<std::uint32_t>(source);
  if (dim == 0) throw DataError("embedding dim must be positive");

  std::vector<std::string> names;
  names.reserve(std::min<std::uint32_t>(num_classes, 4096));
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    const auto len = get_uint<std::uint16_t>(source);
    names.push_back(get_bytes(source, len));
  }

  std::vector<EmbeddingRecord> records;
  records.reserve(std::min<std::uint32_t>(count, 1u << 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.sample_id = get_uint<std::uint32_t>(source);
    const auto split = get_uint<std::uint8_t>(source);
    if (split > 1) throw DataError("invalid split tag " + std::to_string(split));
    r.split = static_cast<Split>(split);
    r.label = get_uint<std::uint16_t>(source);
    decode_floats(get_bytes(source, std::size_t{4} * dim), r.vector);
    records.push_back(std::move(r));
  }
  return EmbeddingStore(dim, std::move(names), std::move(records));
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_store(store, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_store(in);
}

std::uint64_t store_hash(const EmbeddingStore& store) {
  std::ostringstream os(std::ios::binary);
  write_store(store, os);
  return fnv1a64(os.view());
}

EmbeddingStore generate_synthetic(const SynthSpec& spec) {
  if (spec.num_classes == 0 || spec.dim == 0 || spec.train_per_class == 0 ||
      spec.test_per_class == 0) {
    throw ConfigError("synthetic spec counts must be positive");
  }
  if (!(spec.mean_radius > 0.0) || !(spec.noise_sigma > 0.0)) {
    throw ConfigError("mean_radius and noise_sigma must be positive");
  }
  if (spec.num_classes > 65536) throw ConfigError("too many classes");

  Rng rng(spec.seed);
  std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.dim));
  for (auto& mean : means) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : mean) {
        v = rng.normal();
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double scale = spec.mean_radius / std::sqrt(norm2);
    for (auto& v : mean) v *= scale;
  }

  std::vector<std::string> names;
  for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
    std::string name = "class_" + std::to_string(c);
    names.push_back(std::move(name));
  }

  std::vector<EmbeddingRecord> records;
  records.reserve(std::size_t{spec.num_classes} * (spec.train_per_class + spec.test_per_class));
  SampleId next_id = 0;
  for (const Split split : {Split::Train, Split::Test}) {
    const auto per_class = split == Split::Train ? spec.train_per_class : spec.test_per_class;
    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
      for (std::uint32_t i = 0; i < per_class; ++i) {
        EmbeddingRecord r;
        r.sample_id = next_id++;
        r.split = split;
        r.label = static_cast<ClassId>(c);
        r.vector.resize(spec.dim);
        for (std::uint32_t d = 0; d < spec.dim; ++d) {
          r.vector[d] = static_cast<float>(means[c][d] + spec.noise_sigma * rng.normal());
        }
        records.push_back(std::move(r));
      }
    }
  }
  return EmbeddingStore(spec.dim, std::move(names), std::move(records));
}

}  // namespace clare
