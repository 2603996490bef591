#pragma once

// Binary tensor files.
//
//   TNSR v1: "TNSR", u32 version = 1, u32 order N, N x u64 dims,
//            prod(dims) little-endian f64 values in canonical order.
//   MASK v1: identical layout with magic "MASK" and u8 values in {0, 1}.

#include "tenips/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

namespace tenips {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensor(std::ostream& os, const TensorXd& t);
TensorXd read_tensor(std::istream& is);
void write_mask(std::ostream& os, const Mask& m);
Mask read_mask(std::istream& is);

void save_tensor(const std::filesystem::path& path, const TensorXd& t);
TensorXd load_tensor(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const Mask& m);
Mask load_mask(const std::filesystem::path& path);

}  // namespace tenips
