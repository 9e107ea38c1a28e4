#include "mmlda/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mmlda {

namespace {

constexpr char kModelMagic[8] = {'M', 'M', 'L', 'D', 'A', 'C', 'K', 'P'};
constexpr char kTensorMagic[8] = {'M', 'M', 'L', 'D', 'A', 'T', 'N', 'S'};
// Guards allocation from a corrupted length field.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

class Writer {
 public:
  void magic(const char (&m)[8]) { out_.append(m, 8); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  void magic(const char (&m)[8], const char* what) {
    need(8);
    if (std::memcmp(in_.data() + pos_, m, 8) != 0)
      throw CheckpointError(std::string("bad magic for ") + what);
    pos_ += 8;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint64_t count() {
    std::uint64_t v = u64();
    if (v > kMaxElements) throw CheckpointError("implausible element count");
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::uint64_t n) {
    need(n * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  void finish() const {
    if (pos_ != in_.size()) throw CheckpointError("trailing bytes in checkpoint");
  }

 private:
  void need(std::uint64_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::string encode_model(const Model& model) {
  Writer w;
  w.magic(kModelMagic);
  w.u32(kCheckpointVersion);
  w.u32(model.kind() == HeadKind::sr ? 0 : 1);
  const auto& layers = model.network().layers();
  w.u64(layers.size());
  for (const auto& layer : layers) {
    w.u64(layer.in_dim());
    w.u64(layer.out_dim());
    w.u32(layer.activation == Activation::relu ? 1 : 0);
    w.f64s(layer.weight.values());
    w.f64s(layer.bias);
  }
  if (const auto* sr = std::get_if<SRHead>(&model.head())) {
    w.u64(sr->classes());
    w.u64(sr->latent_dim());
    w.f64s(sr->weight.values());
    w.f64s(sr->bias);
  } else {
    const auto& mm = std::get<MMLDAHead>(model.head());
    w.u64(mm.classes());
    w.u64(mm.latent_dim());
    w.f64(mm.means.C);
    for (const auto& m : mm.means.means) w.f64s(m);
    w.f64s(mm.priors);
  }
  return w.take();
}

Model decode_model(const std::string& bytes) {
  Reader r(bytes);
  r.magic(kModelMagic, "model checkpoint");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto kind = r.u32();
  if (kind > 1) throw CheckpointError("unknown head kind");
  const auto n_layers = r.count();
  std::vector<DenseLayer> layers;
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    DenseLayer layer;
    const auto in = r.count(), out = r.count();
    const auto act = r.u32();
    if (act > 1) throw CheckpointError("unknown activation");
    layer.activation = act == 1 ? Activation::relu : Activation::identity;
    layer.weight = Tensor(out, in, r.f64s(out * in));
    layer.bias = r.f64s(out);
    layers.push_back(std::move(layer));
  }
  Network net;
  try {
    net = Network(std::move(layers));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid architecture: ") + e.what());
  }
  const auto L = r.count(), p = r.count();
  Head head;
  if (kind == 0) {
    SRHead sr;
    sr.weight = Tensor(L, p, r.f64s(L * p));
    sr.bias = r.f64s(L);
    head = std::move(sr);
  } else {
    MeanSet ms;
    ms.C = r.f64();
    for (std::uint64_t k = 0; k < L; ++k) ms.means.push_back(r.f64s(p));
    auto priors = r.f64s(L);
    try {
      head = MMLDAHead::make(std::move(ms), std::move(priors));
    } catch (const std::exception& e) {
      throw CheckpointError(std::string("invalid MM-LDA head: ") + e.what());
    }
  }
  r.finish();
  try {
    return Model(std::move(net), std::move(head));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("network and head do not fit: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

std::string encode_tensor(const Tensor& t) {
  Writer w;
  w.magic(kTensorMagic);
  w.u32(kCheckpointVersion);
  w.u64(t.rows());
  w.u64(t.cols());
  w.f64s(t.values());
  return w.take();
}

Tensor decode_tensor(const std::string& bytes) {
  Reader r(bytes);
  r.magic(kTensorMagic, "tensor file");
  if (r.u32() != kCheckpointVersion) throw CheckpointError("unsupported tensor version");
  const auto rows = r.count(), cols = r.count();
  if (rows * cols > kMaxElements) throw CheckpointError("implausible tensor size");
  Tensor t(rows, cols, r.f64s(rows * cols));
  r.finish();
  return t;
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file(path, encode_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace mmlda
