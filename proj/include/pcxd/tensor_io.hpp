// SPDX-License-Identifier: Apache-2.0
//
// Golden tensor dump format: magic "PCXD", u32 rank, u32 dims[rank], then a
// little-endian f64 payload in row-major order. The on-disk payload is always
// f64 regardless of the compiled `real`.

#pragma once

#include <iosfwd>
#include <string>

#include "pcxd/tensor.hpp"

namespace pcxd {

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace pcxd
