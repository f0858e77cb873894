#include "embkit/vecstore.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_set>

#include "embkit/errors.hpp"

namespace embkit {

namespace {

constexpr std::uint32_t kMaxFeatureDim = 1u << 20;

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

// All integers and floats are little-endian on disk. The build targets
// little-endian hosts; refuse to compile elsewhere rather than silently
// writing swapped files.
static_assert(std::endian::native == std::endian::little,
              "vector store I/O assumes a little-endian host");

void write_vector_file(const VectorStore& store, const std::filesystem::path& path,
                       const char magic[4]) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for write: " + path.string());
  put_bytes(out, magic, 4);
  const std::uint32_t dim = store.dim;
  const std::uint64_t count = store.ids.size();
  put_bytes(out, &dim, 4);
  put_bytes(out, &count, 8);
  for (std::size_t i = 0; i < store.ids.size(); ++i) {
    put_bytes(out, &store.ids[i], 8);
    put_bytes(out, store.data.data() + i * store.dim,
              std::size_t{4} * store.dim);
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

VectorStore read_vector_file(const std::filesystem::path& path, const char magic[4],
                             std::uint32_t max_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());

  auto fail = [&](const std::string& what, std::uint64_t offset) {
    throw FormatError(path.string() + ": " + what + " at byte offset " +
                      std::to_string(offset));
  };

  std::array<char, 4> got{};
  in.read(got.data(), 4);
  if (in.gcount() != 4 || std::memcmp(got.data(), magic, 4) != 0)
    fail(std::string("bad magic (expected ") + std::string(magic, 4) + ")", 0);

  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (in.gcount() != 4) fail("truncated header", 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (in.gcount() != 8) fail("truncated header", 8);
  if (dim == 0 || dim > max_dim)
    fail("dim " + std::to_string(dim) + " out of range [1, " +
             std::to_string(max_dim) + "]",
         4);

  VectorStore store;
  store.dim = dim;
  store.ids.resize(count);
  store.data.resize(count * dim);
  std::uint64_t offset = 16;
  const std::size_t row_bytes = std::size_t{4} * dim;
  for (std::uint64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(&store.ids[i]), 8);
    if (in.gcount() != 8) fail("truncated record id", offset);
    offset += 8;
    in.read(reinterpret_cast<char*>(store.data.data() + i * dim),
            static_cast<std::streamsize>(row_bytes));
    if (static_cast<std::size_t>(in.gcount()) != row_bytes)
      fail("truncated record data", offset);
    offset += row_bytes;
  }
  // Trailing bytes mean the header lied about the count.
  char extra;
  if (in.read(&extra, 1)) fail("trailing bytes", offset);
  return store;
}

}  // namespace

void VectorStore::push(std::uint64_t id, std::span<const float> v) {
  if (v.size() != dim)
    throw ArgumentError("VectorStore::push: vector length " +
                        std::to_string(v.size()) + " != dim " + std::to_string(dim));
  ids.push_back(id);
  data.insert(data.end(), v.begin(), v.end());
}

std::unordered_map<std::uint64_t, std::size_t> VectorStore::id_index() const {
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  return index;
}

void validate_embedding_store(const VectorStore& store) {
  if (store.dim == 0 || store.dim > kMaxEmbedDim)
    throw ValidationError("embedding dim " + std::to_string(store.dim) +
                          " out of range [1, " + std::to_string(kMaxEmbedDim) + "]");
  if (store.data.size() != store.ids.size() * store.dim)
    throw ValidationError("embedding store data/id size mismatch");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(store.ids.size());
  for (std::size_t i = 0; i < store.ids.size(); ++i) {
    if (!seen.insert(store.ids[i]).second)
      throw ValidationError("duplicate embedding id " + std::to_string(store.ids[i]));
    double norm2 = 0.0;
    for (float x : store.vec(i)) norm2 += static_cast<double>(x) * x;
    if (std::fabs(std::sqrt(norm2) - 1.0) > 1e-5)
      throw ValidationError("embedding id " + std::to_string(store.ids[i]) +
                            " is not unit length");
  }
}

void write_store(const VectorStore& store, const std::filesystem::path& path) {
  validate_embedding_store(store);
  write_vector_file(store, path, "EMB1");
}

VectorStore read_store(const std::filesystem::path& path) {
  VectorStore store = read_vector_file(path, "EMB1", kMaxEmbedDim);
  validate_embedding_store(store);
  return store;
}

void write_features(const VectorStore& store, const std::filesystem::path& path) {
  if (store.dim == 0 || store.dim > kMaxFeatureDim)
    throw ValidationError("feature dim out of range");
  write_vector_file(store, path, "FTR1");
}

VectorStore read_features(const std::filesystem::path& path) {
  return read_vector_file(path, "FTR1", kMaxFeatureDim);
}

}  // namespace embkit
