#include "eyedrive/nn/weights_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace eyedrive::nn {

namespace {

constexpr char kMagic[4] = {'G', 'Z', 'N', 'N'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint16_t u16() {
    auto b = need(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = need(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw IoError("weight file truncated at byte " + std::to_string(pos_));
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v) {
  if (v > UINT32_MAX) throw ShapeError("extent too large for weight file");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize_network(const Network& net) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kWeightFormatVersion);
  if (net.specs().size() > UINT16_MAX) throw ShapeError("too many layers for weight file");
  w.u16(static_cast<std::uint16_t>(net.specs().size()));
  w.u8(static_cast<std::uint8_t>(net.input_shape().size()));
  for (std::size_t e : net.input_shape()) w.u32(checked_u32(e));

  auto params = net.parameters();
  std::size_t next_param = 0;
  for (const LayerSpec& spec : net.specs()) {
    w.u8(static_cast<std::uint8_t>(spec.kind));
    switch (spec.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kDense: {
        const Tensor& weights = params[next_param]->value;
        const Tensor& bias = params[next_param + 1]->value;
        next_param += 2;
        w.u8(static_cast<std::uint8_t>(weights.rank()));
        for (std::size_t e : weights.shape()) w.u32(checked_u32(e));
        w.u32(checked_u32(weights.size() + bias.size()));
        for (float v : weights.values()) w.f32(v);
        for (float v : bias.values()) w.f32(v);
        break;
      }
      case LayerKind::kDropout:
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(std::llround(spec.rate * 1e6)));
        w.u32(0);
        break;
      default:
        w.u8(0);
        w.u32(0);
        break;
    }
  }
  return w.take();
}

Network deserialize_network(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw IoError("not a weight file (bad magic)");
  }
  const std::uint16_t version = r.u16();
  if (version != kWeightFormatVersion) {
    throw IoError("unsupported weight file version " + std::to_string(version));
  }
  const std::uint16_t layer_count = r.u16();
  Shape input(r.u8());
  for (auto& e : input) e = r.u32();

  struct Pending {
    Shape extents;
    std::vector<float> values;
  };
  std::vector<LayerSpec> specs;
  std::vector<Pending> pending;
  for (std::uint16_t i = 0; i < layer_count; ++i) {
    const auto kind = static_cast<LayerKind>(r.u8());
    Pending p;
    p.extents.resize(r.u8());
    for (auto& e : p.extents) e = r.u32();
    p.values.resize(r.u32());
    for (float& v : p.values) v = r.f32();
    switch (kind) {
      case LayerKind::kConv2D:
        if (p.extents.size() != 4) throw IoError("conv layer needs 4 extents");
        specs.push_back(LayerSpec::conv2d(p.extents[3]));
        break;
      case LayerKind::kDense:
        if (p.extents.size() != 2) throw IoError("dense layer needs 2 extents");
        specs.push_back(LayerSpec::dense(p.extents[1]));
        break;
      case LayerKind::kDropout:
        if (p.extents.size() != 1) throw IoError("dropout layer needs its rate");
        specs.push_back(LayerSpec::dropout(static_cast<double>(p.extents[0]) / 1e6));
        break;
      case LayerKind::kReLU:
      case LayerKind::kMaxPool2x2:
      case LayerKind::kFlatten:
      case LayerKind::kSoftmax:
        specs.push_back(LayerSpec{kind, 0, 0.0});
        break;
      default:
        throw IoError("unknown layer kind tag " + std::to_string(static_cast<int>(kind)));
    }
    if (kind == LayerKind::kConv2D || kind == LayerKind::kDense) pending.push_back(std::move(p));
  }
  if (!r.done()) throw IoError("trailing bytes after last layer");

  Network net(input, specs, 0);
  auto params = net.parameters();
  for (std::size_t i = 0; i < pending.size(); ++i) {
    Tensor& weights = params[2 * i]->value;
    Tensor& bias = params[2 * i + 1]->value;
    if (weights.shape() != pending[i].extents) {
      throw IoError("stored weight shape " + shape_to_string(pending[i].extents) +
                    " disagrees with the rebuilt layer " + shape_to_string(weights.shape()));
    }
    if (pending[i].values.size() != weights.size() + bias.size()) {
      throw IoError("stored value count does not match layer shape");
    }
    std::copy_n(pending[i].values.begin(), weights.size(), weights.data());
    std::copy(pending[i].values.begin() + static_cast<std::ptrdiff_t>(weights.size()),
              pending[i].values.end(), bias.data());
  }
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_network(bytes);
}

}  // namespace eyedrive::nn
