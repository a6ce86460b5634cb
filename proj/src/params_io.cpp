#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "hydg/error.hpp"
#include "hydg/trainer.hpp"

namespace hydg {
namespace {

constexpr std::array<char, 8> kMagic = {'H', 'Y', 'D', 'G', 'P', 'R', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

// Little-endian fixed-width encoding.
void put(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf, bytes);
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::uint64_t get(int bytes) {
    unsigned char buf[8];
    if (!in_.read(reinterpret_cast<char*>(buf), bytes)) {
      throw SchemaError(path_ + ": truncated parameter file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

 private:
  std::istream& in_;
  std::string path_;
};

void write_group(std::ostream& out, const std::vector<DenseMatrix>& ms) {
  put(out, ms.size(), 4);
  for (const auto& m : ms) {
    put(out, m.rows(), 8);
    put(out, m.cols(), 8);
  }
}

std::vector<DenseMatrix> read_group(Reader& r) {
  const std::uint64_t count = r.get(4);
  if (count > 1024) throw SchemaError("parameter manifest lists " + std::to_string(count) +
                                      " tensors");
  std::vector<DenseMatrix> ms;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t rows = r.get(8);
    const std::uint64_t cols = r.get(8);
    if (rows > (1u << 24) || cols > (1u << 24)) throw SchemaError("implausible tensor shape");
    ms.emplace_back(rows, cols);
  }
  return ms;
}

}  // namespace

void save_params(const ModelParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion, 4);
  put(out, p.backbone.kind == BackboneKind::gcn ? 0 : 1, 4);
  write_group(out, p.backbone.weights);
  write_group(out, p.individual.theta);
  write_group(out, p.group.theta);
  write_group(out, {p.head, p.head_bias});
  for (const auto& m : p.flatten()) {
    for (double v : m.data()) put(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw SchemaError(path.string() + ": not a parameter file (bad magic)");
  }
  Reader r(in, path.string());
  const auto version = r.get(4);
  if (version != kVersion) {
    throw SchemaError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  const auto kind = r.get(4);
  if (kind > 1) throw SchemaError(path.string() + ": unknown backbone id " + std::to_string(kind));
  ModelParams p;
  p.backbone.kind = kind == 0 ? BackboneKind::gcn : BackboneKind::sage;
  p.backbone.weights = read_group(r);
  p.individual.theta = read_group(r);
  p.group.theta = read_group(r);
  auto head = read_group(r);
  if (head.size() != 2) throw SchemaError(path.string() + ": head section must hold 2 tensors");
  p.head = std::move(head[0]);
  p.head_bias = std::move(head[1]);
  auto fill = [&](DenseMatrix& m) {
    for (double& v : m.data()) v = std::bit_cast<double>(r.get(8));
  };
  for (auto& m : p.backbone.weights) fill(m);
  for (auto& m : p.individual.theta) fill(m);
  for (auto& m : p.group.theta) fill(m);
  fill(p.head);
  fill(p.head_bias);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw SchemaError(path.string() + ": trailing bytes after parameters");
  }
  return p;
}

void check_same_shapes(const ModelParams& params, const ModelParams& expected) {
  if (params.backbone.kind != expected.backbone.kind) {
    throw SchemaError("parameters use backbone '" + std::string(name(params.backbone.kind)) +
                      "', expected '" + std::string(name(expected.backbone.kind)) + "'");
  }
  auto check = [](const std::vector<DenseMatrix>& a, const std::vector<DenseMatrix>& b,
                  const char* what) {
    if (a.size() != b.size()) {
      throw SchemaError(std::string(what) + ": " + std::to_string(a.size()) + " tensors, expected " +
                        std::to_string(b.size()));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) {
        throw SchemaError(std::string(what) + "[" + std::to_string(i) + "]: shape " +
                          std::to_string(a[i].rows()) + "x" + std::to_string(a[i].cols()) +
                          ", expected " + std::to_string(b[i].rows()) + "x" +
                          std::to_string(b[i].cols()));
      }
    }
  };
  check(params.backbone.weights, expected.backbone.weights, "backbone");
  check(params.individual.theta, expected.individual.theta, "individual kernels");
  check(params.group.theta, expected.group.theta, "group kernels");
  check({params.head, params.head_bias}, {expected.head, expected.head_bias}, "head");
}

}  // namespace hydg
