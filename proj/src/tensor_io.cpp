// SPDX-License-Identifier: Apache-2.0

#include "pcxd/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace pcxd {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'X', 'D'};

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
  if (!is) throw std::runtime_error("tensor dump: truncated header");
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
  if (!is) throw std::runtime_error("tensor dump: truncated payload");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put_u32(os, static_cast<uint32_t>(t.dim(i)));
  for (int64_t i = 0; i < t.size(); ++i) put_f64(os, static_cast<double>(t[i]));
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("tensor dump: bad magic");
  const uint32_t rank = get_u32(is);
  if (rank > 8) throw std::runtime_error("tensor dump: implausible rank");
  std::vector<int> shape;
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t d = get_u32(is);
    if (d == 0) throw std::runtime_error("tensor dump: zero extent");
    shape.push_back(static_cast<int>(d));
    n *= d;
  }
  std::vector<real> data(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) data[static_cast<size_t>(i)] = static_cast<real>(get_f64(is));
  return Tensor::from(std::move(shape), std::move(data));
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("tensor dump: cannot open " + path);
  write_tensor(os, t);
  if (!os) throw std::runtime_error("tensor dump: write failed on " + path);
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("tensor dump: cannot open " + path);
  return read_tensor(is);
}

}  // namespace pcxd
