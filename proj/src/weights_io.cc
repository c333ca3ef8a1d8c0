#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "panoptrack/error.h"
#include "panoptrack/motion.h"

namespace panoptrack {

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'T', 'L', 'S', 'T', 'M', '\0', '\0'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InputError("weights: truncated file");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InputError("weights: truncated file");
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

// Layout (little endian):
//   magic[8] "PTLSTM\0\0", u32 version, u32 hidden, u32 tensor_count,
//   per tensor: u32 name_len, name bytes, u32 rows, u32 cols,
//               rows*cols float64 in row-major order.
void save_weights(const LstmWeights& weights, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(weights.hidden));
  uint32_t count = 0;
  weights.for_each_tensor([&](const std::string&, Eigen::Map<const Eigen::MatrixXd>) { ++count; });
  write_u32(out, count);
  weights.for_each_tensor([&](const std::string& name, Eigen::Map<const Eigen::MatrixXd> m) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(m.rows()));
    write_u32(out, static_cast<uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
    }
  });
}

LstmWeights load_weights(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InputError("weights: bad magic, not a panoptrack LSTM weight file");
  }
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw InputError("weights: unsupported version " + std::to_string(version));
  }
  const uint32_t hidden = read_u32(in);
  if (hidden == 0 || hidden > (1u << 16)) throw InputError("weights: implausible hidden size");
  const uint32_t count = read_u32(in);

  struct Tensor {
    uint32_t rows, cols;
    std::vector<double> data;
  };
  std::map<std::string, Tensor> tensors;
  for (uint32_t t = 0; t < count; ++t) {
    const uint32_t len = read_u32(in);
    if (len > 256) throw InputError("weights: tensor name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw InputError("weights: truncated file");
    Tensor tensor;
    tensor.rows = read_u32(in);
    tensor.cols = read_u32(in);
    const uint64_t n = uint64_t(tensor.rows) * tensor.cols;
    if (n > (uint64_t(1) << 28)) throw InputError("weights: tensor too large");
    tensor.data.resize(n);
    for (auto& v : tensor.data) v = read_f64(in);
    tensors.emplace(std::move(name), std::move(tensor));
  }

  LstmWeights w = LstmWeights::zeros(static_cast<int>(hidden));
  w.for_each_tensor([&](const std::string& name, Eigen::Map<Eigen::MatrixXd> m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InputError("weights: missing tensor " + name);
    const Tensor& t = it->second;
    if (t.rows != m.rows() || t.cols != m.cols()) {
      throw InputError("weights: tensor " + name + " has shape " + std::to_string(t.rows) +
                       "x" + std::to_string(t.cols) + ", expected " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[r * t.cols + c];
    }
  });
  if (tensors.size() != count || count != 18) {
    throw InputError("weights: unexpected tensor count " + std::to_string(count));
  }
  return w;
}

void save_weights(const LstmWeights& weights, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  save_weights(weights, out);
}

LstmWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return load_weights(in);
}

std::string weights_manifest(const LstmWeights& weights) {
  std::ostringstream os;
  os << "# panoptrack lstm weights v" << kVersion << " hidden=" << weights.hidden << "\n";
  weights.for_each_tensor([&](const std::string& name, Eigen::Map<const Eigen::MatrixXd> m) {
    os << name << " " << m.rows() << " " << m.cols() << "\n";
  });
  return os.str();
}

}  // namespace panoptrack
