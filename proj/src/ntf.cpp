#include "swum/ntf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace swum::ntf {

static_assert(std::endian::native == std::endian::little, "NTF payloads are written as host little-endian bytes");

namespace {

constexpr char kMagic[4] = {'N', 'T', 'F', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view b, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::size_t encoded_size(const Shape& shape, DType dtype) {
  return 4 + 1 + 1 + 4 * shape.size() + static_cast<std::size_t>(numel_of(shape)) * dtype_size(dtype);
}

std::string encode(const Tensor& t) {
  const auto& shape = t.shape();
  if (shape.size() > 255) throw DimensionError("NTF supports at most 255 axes");
  std::string out;
  out.reserve(encoded_size(shape, t.dtype()));
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(t.dtype()));
  out.push_back(static_cast<char>(shape.size()));
  for (auto e : shape) {
    if (e > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("NTF extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(e));
  }
  std::visit(
      [&](const auto& v) {
        out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type));
      },
      t.impl()->data);
  return out;
}

void write(std::ostream& os, const Tensor& t) {
  const std::string bytes = encode(t);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void save(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write(os, t);
  if (!os) throw DataError("failed writing " + path.string());
}

Tensor decode(std::string_view b, std::size_t& pos) {
  if (b.size() < pos + 6 || std::memcmp(b.data() + pos, kMagic, 4) != 0)
    throw IntegrityError("NTF record at byte " + std::to_string(pos) + " has bad magic or is truncated");
  const auto code = static_cast<std::uint8_t>(b[pos + 4]);
  if (code > 2) throw IntegrityError("NTF record has unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = static_cast<unsigned char>(b[pos + 5]);
  std::size_t p = pos + 6;
  if (b.size() < p + 4 * ndim) throw IntegrityError("NTF header truncated");
  Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i, p += 4) shape[i] = get_u32(b, p);
  if (ndim == 0) throw IntegrityError("NTF record has zero axes");
  for (auto e : shape)
    if (e == 0) throw IntegrityError("NTF record has a zero extent");
  const std::size_t nbytes = static_cast<std::size_t>(numel_of(shape)) * dtype_size(dtype);
  if (b.size() < p + nbytes)
    throw IntegrityError("NTF payload truncated: need " + std::to_string(nbytes) + " bytes, have " +
                         std::to_string(b.size() - p));
  Tensor t = Tensor::zeros(shape, dtype);
  std::visit([&](auto& v) { std::memcpy(v.data(), b.data() + p, nbytes); }, t.impl()->data);
  pos = p + nbytes;
  return t;
}

Tensor decode(std::string_view bytes) {
  std::size_t pos = 0;
  return decode(bytes, pos);
}

Tensor load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace swum::ntf
