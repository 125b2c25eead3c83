#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cgnn/tensor.hpp"

namespace cgnn {

// Binary tensor record, little-endian throughout:
//   u64 name length, name bytes, u64 rank, rank x u64 dims,
//   product(dims) x f32 row-major values.
// Values are narrowed to float32 on write.
void WriteTensorRecord(std::ostream& out, const std::string& name, const Tensor& t);
// Returns false on clean end-of-stream before a record starts.
bool ReadTensorRecord(std::istream& in, std::string& name, Tensor& t);

void WriteU64(std::ostream& out, std::uint64_t v);
std::uint64_t ReadU64(std::istream& in);
void WriteU32(std::ostream& out, std::uint32_t v);
std::uint32_t ReadU32(std::istream& in);
void WriteString(std::ostream& out, const std::string& s);
std::string ReadString(std::istream& in);

// A standalone file of tensor records preceded by a u64 record count.
void SaveTensorFile(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> LoadTensorFile(const std::string& path);

// Text matrix: first line the row count, then one whitespace-separated row
// per line (17 significant digits).
void SaveTextMatrix(const std::string& path, const Tensor& m);
Tensor LoadTextMatrix(const std::string& path);

// 64-bit FNV-1a, used for dataset fingerprints.
std::uint64_t Fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace cgnn
