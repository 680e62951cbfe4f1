#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sra/error.hpp"
#include "sra/gradcore.hpp"

namespace sra {
namespace {

constexpr char kMagic[8] = {'S', 'R', 'A', 'T', 'E', 'N', 'S', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.good(), ErrorKind::Parse, "archive: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  write_u64(out, v);
}

double read_f64(std::istream& in) {
  const std::uint64_t v = read_u64(in);
  double d;
  std::memcpy(&d, &v, sizeof d);
  return d;
}

}  // namespace

void TensorArchive::put(const std::string& name, std::size_t rows, std::size_t cols,
                        std::span<const double> data) {
  require(rows * cols == data.size(), ErrorKind::InvalidInput,
          "archive: tensor shape does not match data length for " + name);
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data.begin());
  entries_[name] = std::move(m);
}

const Matrix& TensorArchive::get(const std::string& name) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), ErrorKind::InvalidInput, "archive: missing entry " + name);
  return it->second;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  if (path.extension() == ".json") {
    nlohmann::json j;
    for (const auto& [name, m] : entries_) {
      j[name] = {{"shape", {m.rows, m.cols}}, {"data", m.data}};
    }
    std::ofstream out(path);
    require(out.good(), ErrorKind::InvalidInput, "archive: cannot write " + path.string());
    out << j.dump() << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::InvalidInput, "archive: cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_u64(out, entries_.size());
  for (const auto& [name, m] : entries_) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, m.rows);
    write_u64(out, m.cols);
    for (double d : m.data) write_f64(out, d);
  }
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  TensorArchive a;
  if (path.extension() == ".json") {
    std::ifstream in(path);
    require(in.good(), ErrorKind::InvalidInput, "archive: cannot read " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("archive: ") + e.what());
    }
    for (const auto& [name, e] : j.items()) {
      const auto shape = e.at("shape").get<std::vector<std::size_t>>();
      require(shape.size() == 2, ErrorKind::Parse, "archive: tensors must be 2-D");
      a.put(name, shape[0], shape[1], e.at("data").get<std::vector<double>>());
    }
    return a;
  }
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::InvalidInput, "archive: cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  require(in.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrorKind::Parse,
          "archive: bad magic");
  const auto count = read_u64(in);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto len = read_u64(in);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = read_u64(in);
    const auto cols = read_u64(in);
    Matrix m(rows, cols);
    for (auto& d : m.data) d = read_f64(in);
    a.entries_[name] = std::move(m);
  }
  return a;
}

void store_stack(TensorArchive& archive, const std::string& prefix, const DenseStack& stack) {
  const auto& layers = stack.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    archive.put(base + ".weight", layers[l].weight);
    archive.put(base + ".bias", layers[l].bias.size(), 1, layers[l].bias);
  }
}

DenseStack load_stack(const TensorArchive& archive, const std::string& prefix) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0;; ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    if (!archive.contains(base + ".weight")) break;
    DenseLayer L;
    L.weight = archive.get(base + ".weight");
    L.bias = archive.get(base + ".bias").data;
    L.activation = Activation::Relu;
    layers.push_back(std::move(L));
  }
  require(!layers.empty(), ErrorKind::InvalidInput, "archive: no layers under " + prefix);
  layers.back().activation = Activation::Identity;
  return DenseStack(std::move(layers));
}

}  // namespace sra
