#include "ademi/tensor_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ademi/errors.hpp"

namespace ademi {
namespace {

constexpr char kMagic[4] = {'A', 'M', 'I', 'T'};
constexpr std::uint8_t kVersion = 1;

enum Dtype : std::uint8_t { kF64 = 1, kC128 = 2, kI64 = 3 };

void write_u64_le(std::ostream& os, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

void write_f64_le(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64_le(os, bits);
}

double read_f64_le(std::istream& is) {
  std::uint64_t bits = read_u64_le(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void write_header(std::ostream& os, Dtype dtype, const std::vector<std::int64_t>& shape) {
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(dtype));
  os.put(static_cast<char>(shape.size()));
  for (std::int64_t d : shape) write_u64_le(os, static_cast<std::uint64_t>(d));
}

std::vector<std::int64_t> read_header(std::istream& is, Dtype expected, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("not a tensor file: " + path);
  int version = is.get();
  if (version != kVersion) throw ConfigError("unsupported tensor version in " + path);
  int dtype = is.get();
  if (dtype != expected)
    throw ConfigError("tensor dtype mismatch in " + path + " (found code " +
                      std::to_string(dtype) + ")");
  int ndim = is.get();
  std::vector<std::int64_t> shape(static_cast<std::size_t>(ndim));
  for (auto& d : shape) d = static_cast<std::int64_t>(read_u64_le(is));
  if (!is) throw ConfigError("truncated tensor header in " + path);
  return shape;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  return is;
}

void write_f64_tensor(std::ostream& os, const Tensor& t) {
  write_header(os, kF64, t.shape);
  for (double d : t.v) write_f64_le(os, d);
}

void write_c128_tensor(std::ostream& os, const CTensor& t) {
  write_header(os, kC128, t.shape);
  for (const auto& z : t.v) {
    write_f64_le(os, z.real());
    write_f64_le(os, z.imag());
  }
}

void write_i64_tensor(std::ostream& os, const ITensor& t) {
  write_header(os, kI64, t.shape);
  for (std::int64_t d : t.v) write_u64_le(os, static_cast<std::uint64_t>(d));
}

Tensor read_f64_tensor(std::istream& is, const std::string& path) {
  Tensor t(read_header(is, kF64, path));
  for (auto& d : t.v) d = read_f64_le(is);
  if (!is) throw ConfigError("truncated tensor payload in " + path);
  return t;
}

CTensor read_c128_tensor(std::istream& is, const std::string& path) {
  CTensor t(read_header(is, kC128, path));
  for (auto& z : t.v) {
    double re = read_f64_le(is);
    double im = read_f64_le(is);
    z = {re, im};
  }
  if (!is) throw ConfigError("truncated tensor payload in " + path);
  return t;
}

ITensor read_i64_tensor(std::istream& is, const std::string& path) {
  ITensor t(read_header(is, kI64, path));
  for (auto& d : t.v) d = static_cast<std::int64_t>(read_u64_le(is));
  if (!is) throw ConfigError("truncated tensor payload in " + path);
  return t;
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
  auto os = open_out(path);
  write_f64_tensor(os, t);
}

void save_tensor(const std::string& path, const CTensor& t) {
  auto os = open_out(path);
  write_c128_tensor(os, t);
}

void save_tensor(const std::string& path, const ITensor& t) {
  auto os = open_out(path);
  write_i64_tensor(os, t);
}

Tensor load_tensor_f64(const std::string& path) {
  auto is = open_in(path);
  return read_f64_tensor(is, path);
}

CTensor load_tensor_c128(const std::string& path) {
  auto is = open_in(path);
  return read_c128_tensor(is, path);
}

ITensor load_tensor_i64(const std::string& path) {
  auto is = open_in(path);
  return read_i64_tensor(is, path);
}

void save_named_tensors(const std::string& stem, const NamedTensors& bundle) {
  auto os = open_out(stem + ".bin");
  std::map<std::string, std::string> manifest = bundle.meta;
  manifest["tensor.count"] = std::to_string(bundle.tensors.size());
  for (std::size_t i = 0; i < bundle.tensors.size(); ++i) {
    manifest["tensor." + std::to_string(i)] = bundle.tensors[i].first;
    write_f64_tensor(os, bundle.tensors[i].second);
  }
  save_manifest(stem + ".manifest", manifest);
}

NamedTensors load_named_tensors(const std::string& stem) {
  NamedTensors out;
  out.meta = load_manifest(stem + ".manifest");
  auto count_it = out.meta.find("tensor.count");
  if (count_it == out.meta.end())
    throw ConfigError("manifest missing tensor.count: " + stem + ".manifest");
  std::size_t count = std::stoul(count_it->second);
  out.meta.erase(count_it);

  auto is = open_in(stem + ".bin");
  for (std::size_t i = 0; i < count; ++i) {
    std::string key = "tensor." + std::to_string(i);
    auto it = out.meta.find(key);
    if (it == out.meta.end()) throw ConfigError("manifest missing " + key);
    out.tensors.emplace_back(it->second, read_f64_tensor(is, stem + ".bin"));
    out.meta.erase(it);
  }
  return out;
}

void save_manifest(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

std::map<std::string, std::string> load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string file_checksum(const std::string& path) {
  auto is = open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof buf);
    std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream ss;
  ss << std::hex << h;
  return ss.str();
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void ensure_directory(const std::string& path) {
  std::filesystem::create_directories(path);
}

}  // namespace ademi
