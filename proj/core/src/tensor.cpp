#include "rootconv/tensor.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace rootconv {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << e[0] << "," << e[1] << "," << e[2] << "," << e[3] << ")";
  return os.str();
}

namespace {

constexpr char kMagic[4] = {'R', 'T', 'N', '1'};

void put_u32le(std::ostream& os, u32 v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

u32 get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("RTN1: truncated header");
  return static_cast<u32>(b[0]) | (static_cast<u32>(b[1]) << 8) |
         (static_cast<u32>(b[2]) << 16) | (static_cast<u32>(b[3]) << 24);
}

}  // namespace

void write_tensor(const Tensor& t, std::ostream& os) {
  os.write(kMagic, 4);
  for (i64 ext : t.shape().e) put_u32le(os, static_cast<u32>(ext));
  for (i64 i = 0; i < t.numel(); ++i) {
    u32 bits;
    float v = t.data()[i];
    std::memcpy(&bits, &v, 4);
    put_u32le(os, bits);
  }
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("RTN1: bad magic");
  }
  Shape s;
  for (auto& ext : s.e) ext = static_cast<i64>(get_u32le(is));
  Tensor t(s);
  for (i64 i = 0; i < t.numel(); ++i) {
    u32 bits = get_u32le(is);
    float v;
    std::memcpy(&v, &bits, 4);
    t.data()[i] = v;
  }
  is.peek();
  return t;
}

void save_tensor(const Tensor& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for write: " + path);
  write_tensor(t, os);
  if (!os) throw FormatError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  return read_tensor(is);
}

}  // namespace rootconv
