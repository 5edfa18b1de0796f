#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "swum/tensor.hpp"

// NTF tensor files: "NTF1", u8 dtype code {0:f32, 1:f64, 2:u8}, u8 ndim,
// ndim x u32 little-endian extents, then the row-major little-endian payload.

namespace swum::ntf {

std::string encode(const Tensor& t);
void write(std::ostream& os, const Tensor& t);
void save(const std::filesystem::path& path, const Tensor& t);

/// Decodes one record starting at `pos`; advances `pos` past it. Throws
/// IntegrityError on bad magic, unknown dtype or truncated payload.
Tensor decode(std::string_view bytes, std::size_t& pos);
Tensor decode(std::string_view bytes);
Tensor load(const std::filesystem::path& path);

/// Byte length of an encoded record for this shape and dtype.
std::size_t encoded_size(const Shape& shape, DType dtype);

}  // namespace swum::ntf
