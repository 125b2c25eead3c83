#include "cgnn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cgnn {

static_assert(std::endian::native == std::endian::little,
              "tensor records assume a little-endian host");

namespace {

void RequireStream(std::ios& s, const char* what) {
  if (!s) throw IngestionError(std::string("tensor stream error while ") + what);
}

}  // namespace

void WriteU64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t ReadU64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  RequireStream(in, "reading u64");
  return v;
}

void WriteU32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t ReadU32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  RequireStream(in, "reading u32");
  return v;
}

void WriteString(std::ostream& out, const std::string& s) {
  WriteU64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string ReadString(std::istream& in) {
  const std::uint64_t n = ReadU64(in);
  if (n > (1ULL << 32)) throw IngestionError("implausible string length in tensor stream");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  RequireStream(in, "reading string");
  return s;
}

void WriteTensorRecord(std::ostream& out, const std::string& name, const Tensor& t) {
  WriteString(out, name);
  WriteU64(out, t.rank());
  for (auto d : t.shape()) WriteU64(out, d);
  std::vector<float> buf(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  RequireStream(out, "writing tensor");
}

bool ReadTensorRecord(std::istream& in, std::string& name, Tensor& t) {
  if (in.peek() == std::char_traits<char>::eof()) return false;
  name = ReadString(in);
  const std::uint64_t rank = ReadU64(in);
  if (rank == 0 || rank > 8) throw IngestionError("bad tensor rank for '" + name + "'");
  Shape shape(rank);
  for (auto& d : shape) d = ReadU64(in);
  const std::size_t n = ShapeNumel(shape);
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
  RequireStream(in, "reading tensor payload");
  std::vector<double> data(buf.begin(), buf.end());
  t = Tensor(std::move(shape), std::move(data));
  return true;
}

void SaveTensorFile(const std::string& path, const std::map<std::string, Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path);
  WriteU64(out, tensors.size());
  for (const auto& [name, t] : tensors) WriteTensorRecord(out, name, t);
}

std::map<std::string, Tensor> LoadTensorFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read " + path);
  const std::uint64_t n = ReadU64(in);
  std::map<std::string, Tensor> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name;
    Tensor t;
    if (!ReadTensorRecord(in, name, t)) throw IngestionError("truncated tensor file " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

void SaveTextMatrix(const std::string& path, const Tensor& m) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << m.rows() << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m.at(i, j);
    }
    out << '\n';
  }
}

Tensor LoadTextMatrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read " + path);
  std::size_t rows = 0;
  if (!(in >> rows) || rows == 0) throw IngestionError(path + ": missing row-count header");
  std::string line;
  std::getline(in, line);
  std::vector<double> data;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw IngestionError(path + ": expected " + std::to_string(rows) + " rows");
    std::istringstream ls(line);
    std::size_t c = 0;
    double v;
    while (ls >> v) {
      data.push_back(v);
      ++c;
    }
    if (r == 0) cols = c;
    if (c == 0 || c != cols) {
      throw IngestionError(path + ": line " + std::to_string(r + 2) + " has " + std::to_string(c) +
                           " values, expected " + std::to_string(cols));
    }
  }
  return Tensor({rows, cols}, std::move(data));
}

std::uint64_t Fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cgnn
