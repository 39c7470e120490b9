#include "tsalign/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace tsalign {

namespace {

constexpr const char* kMagic = "TSALIGN-CHECKPOINT 1";

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void put_f32(std::ostream& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  out.write(b, 4);
}

float get_f32(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string format_shape(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
  os << ']';
  return os.str();
}

void TensorCheckpoint::add(std::string name, const Matrix& value, std::vector<std::int64_t> shape) {
  if (shape.empty()) shape = {value.rows(), value.cols()};
  if (element_count(shape) != value.size()) {
    throw ValidationError("checkpoint tensor '" + name + "': shape does not match element count");
  }
  tensors.push_back({std::move(name), std::move(shape), value});
}

const NamedTensor* TensorCheckpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& TensorCheckpoint::at(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (t == nullptr) throw ValidationError("checkpoint is missing tensor '" + name + "'");
  return *t;
}

void save_checkpoint(const TensorCheckpoint& ckpt, const std::filesystem::path& path) {
  std::set<std::string> seen;
  for (const auto& t : ckpt.tensors) {
    if (!seen.insert(t.name).second) {
      throw ValidationError("duplicate checkpoint tensor name '" + t.name + "'");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << kMagic << '\n';
  for (const auto& [k, v] : ckpt.metadata) out << '@' << k << ' ' << v << '\n';
  for (const auto& t : ckpt.tensors) {
    out << t.name;
    for (auto d : t.shape) out << ' ' << d;
    out << '\n';
  }
  out << "END\n";
  for (const auto& t : ckpt.tensors) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      put_f32(out, static_cast<float>(t.value.data()[i]));
    }
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

TensorCheckpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw ValidationError(path.string() + ": not a tensor checkpoint (bad header)");
  }
  TensorCheckpoint ckpt;
  std::set<std::string> names;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "END") {
      ended = true;
      break;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '@') {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls >> std::ws, value);
      ckpt.metadata[key.substr(1)] = value;
      continue;
    }
    NamedTensor t;
    ls >> t.name;
    std::int64_t d;
    while (ls >> d) {
      if (d < 0) throw ValidationError(path.string() + ": negative dimension for '" + t.name + "'");
      t.shape.push_back(d);
    }
    if (t.shape.empty()) throw ValidationError(path.string() + ": tensor '" + t.name + "' has no shape");
    if (!names.insert(t.name).second) {
      throw ValidationError(path.string() + ": duplicate tensor '" + t.name + "'");
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (!ended) throw ValidationError(path.string() + ": manifest is not terminated by END");

  for (auto& t : ckpt.tensors) {
    const std::int64_t n = element_count(t.shape);
    std::vector<unsigned char> buf(static_cast<std::size_t>(n) * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw ValidationError(path.string() + ": payload truncated in tensor '" + t.name + "'");
    }
    const std::int64_t rows = t.shape.size() == 1 ? 1 : t.shape[0];
    t.value.resize(rows, n / std::max<std::int64_t>(rows, 1));
    if (rows == 0) t.value.resize(0, 0);
    for (std::int64_t i = 0; i < n; ++i) t.value.data()[i] = get_f32(&buf[static_cast<std::size_t>(4 * i)]);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path.string() + ": trailing bytes after payload");
  }
  return ckpt;
}

void check_manifest(const TensorCheckpoint& ckpt, const ShapeManifest& expected) {
  for (const auto& [name, shape] : expected) {
    const NamedTensor* t = ckpt.find(name);
    if (t == nullptr) throw ValidationError("checkpoint is missing tensor '" + name + "'");
    if (t->shape != shape) {
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + format_shape(t->shape) +
                            ", expected " + format_shape(shape));
    }
  }
}

}  // namespace tsalign
