#include "g2/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace g2 {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated integer");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated double");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointBlob>& blobs) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write("G2CK", 4);
  put_u32(os, kCheckpointVersion);
  for (const CheckpointBlob& b : blobs) {
    put_u32(os, static_cast<uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(os, static_cast<uint32_t>(b.tensor.rank()));
    for (int d = 0; d < b.tensor.rank(); ++d) {
      put_u32(os, static_cast<uint32_t>(b.tensor.extent(d)));
    }
    for (int64_t i = 0; i < b.tensor.numel(); ++i) put_f64(os, b.tensor[i]);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<CheckpointBlob> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "G2CK", 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<CheckpointBlob> blobs;
  while (true) {
    is.peek();
    if (is.eof()) break;
    CheckpointBlob b;
    const uint32_t name_len = get_u32(is);
    b.name.resize(name_len);
    is.read(b.name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated name");
    const uint32_t rank = get_u32(is);
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = get_u32(is);
    Tensor t(shape);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = get_f64(is);
    b.tensor = std::move(t);
    blobs.push_back(std::move(b));
  }
  return blobs;
}

const Tensor& checkpoint_get(const std::vector<CheckpointBlob>& blobs, const std::string& name) {
  for (const CheckpointBlob& b : blobs) {
    if (b.name == name) return b.tensor;
  }
  throw std::runtime_error("checkpoint: missing blob '" + name + "'");
}

bool checkpoint_has(const std::vector<CheckpointBlob>& blobs, const std::string& name) {
  for (const CheckpointBlob& b : blobs) {
    if (b.name == name) return true;
  }
  return false;
}

}  // namespace g2
