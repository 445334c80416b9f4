#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ademi/tensor.hpp"

namespace ademi {

// Binary tensor container. Layout:
//   magic "AMIT" | version u8 (=1) | dtype u8 (1=f64, 2=c128, 3=i64) |
//   ndim u8 | ndim x i64 dims (little-endian) | row-major payload (LE).
// Complex values are stored as (re, im) f64 pairs.

void save_tensor(const std::string& path, const Tensor& t);
void save_tensor(const std::string& path, const CTensor& t);
void save_tensor(const std::string& path, const ITensor& t);

Tensor load_tensor_f64(const std::string& path);
CTensor load_tensor_c128(const std::string& path);
ITensor load_tensor_i64(const std::string& path);

/// Named-tensor container: AMIT records concatenated in manifest order.
/// The companion "<stem>.manifest" lists `tensor.<i>=<name>` entries plus any
/// extra metadata the caller provides.
struct NamedTensors {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::map<std::string, std::string> meta;
};

void save_named_tensors(const std::string& stem, const NamedTensors& bundle);
NamedTensors load_named_tensors(const std::string& stem);

/// Flat key=value text files ('#' starts a comment line).
void save_manifest(const std::string& path, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> load_manifest(const std::string& path);

/// FNV-1a 64-bit hash of a file's bytes, as a hex string.
std::string file_checksum(const std::string& path);

bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

}  // namespace ademi
