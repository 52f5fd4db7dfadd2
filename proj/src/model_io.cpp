#include "ack/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ack/error.hpp"

namespace ack {

namespace {

constexpr std::uint8_t kTagReal = 0;
constexpr std::uint8_t kTagInt8 = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& data) : data_(data) {}

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(le(1, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  const std::uint8_t* take(std::size_t n, const char* what) {
    need(n, what);
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (n > remaining()) {
      throw FormatError("model file truncated while reading " + std::string(what) + " at byte " +
                        std::to_string(pos_));
    }
  }
  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& data_;
  std::size_t pos_ = 0;
};

struct SlotInfo {
  std::string name;
  ParamKind kind;
  std::size_t size;
  std::size_t rows;
};

std::vector<SlotInfo> slots_of(const Network& net) {
  std::vector<SlotInfo> slots;
  net.visit([&](const ParamSlot<const Real>& s) { slots.push_back({s.name, s.kind, s.values.size(), s.rows}); });
  return slots;
}

}  // namespace

bool ModelFile::quantized() const {
  for (const StoredParam& p : params) {
    if (std::holds_alternative<QuantizedBlob>(p)) return true;
  }
  return false;
}

std::vector<std::uint8_t> encode_model(const ModelFile& model) {
  Writer w;
  w.bytes(kModelMagic, 4);
  w.u32(kModelVersion);
  const std::string text = model.spec.to_text();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.u32(static_cast<std::uint32_t>(model.params.size()));
  for (const StoredParam& p : model.params) {
    Writer payload;
    if (const auto* q = std::get_if<QuantizedBlob>(&p)) {
      w.u8(kTagInt8);
      payload.u8(static_cast<std::uint8_t>(q->mode));
      payload.u64(q->scales.size());
      for (Real s : q->scales) payload.f64(s);
      payload.u64(q->values.size());
      payload.bytes(q->values.data(), q->values.size());
    } else {
      const auto& values = std::get<std::vector<Real>>(p);
      w.u8(kTagReal);
      payload.u64(values.size());
      for (Real v : values) payload.f64(v);
    }
    w.u64(payload.data().size());
    w.bytes(payload.data().data(), payload.data().size());
  }
  return std::move(w.data());
}

ModelFile decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError("bad magic '" + std::string(reinterpret_cast<const char*>(magic), 4) + "', expected 'ACNK'");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version) + ", expected " +
                      std::to_string(kModelVersion));
  }
  const std::uint32_t text_len = r.u32("spec length");
  const std::uint8_t* text = r.take(text_len, "spec text");
  ModelFile model;
  try {
    model.spec = parse_dsl(std::string(reinterpret_cast<const char*>(text), text_len));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("embedded network description is invalid: ") + e.what());
  }
  const auto slots = slots_of(Network::compile(model.spec, 0));
  const std::uint32_t count = r.u32("blob count");
  if (count != slots.size()) {
    throw FormatError("model holds " + std::to_string(count) + " parameter blobs, network needs " +
                      std::to_string(slots.size()));
  }
  for (const SlotInfo& slot : slots) {
    const std::uint8_t tag = r.u8("blob tag");
    const std::uint64_t len = r.u64("blob length");
    if (len > r.remaining()) throw FormatError("blob '" + slot.name + "' truncated");
    const std::size_t end = r.pos() + len;
    if (tag == kTagReal) {
      const std::uint64_t n = r.u64("value count");
      if (n != slot.size) {
        throw FormatError("blob '" + slot.name + "' holds " + std::to_string(n) + " values, expected " +
                          std::to_string(slot.size));
      }
      std::vector<Real> values(n);
      for (auto& v : values) v = r.f64("values");
      model.params.emplace_back(std::move(values));
    } else if (tag == kTagInt8) {
      if (slot.kind != ParamKind::kWeight) throw FormatError("blob '" + slot.name + "' cannot be quantized");
      QuantizedBlob q;
      const std::uint8_t mode = r.u8("quantization mode");
      if (mode > 1) throw FormatError("blob '" + slot.name + "' has unknown quantization mode " + std::to_string(mode));
      q.mode = static_cast<QuantMode>(mode);
      const std::uint64_t scales = r.u64("scale count");
      const std::uint64_t expected_scales = q.mode == QuantMode::kPerTensor ? 1 : slot.rows;
      if (scales != expected_scales) throw FormatError("blob '" + slot.name + "' has a wrong scale count");
      q.scales.resize(scales);
      for (auto& s : q.scales) {
        s = r.f64("scales");
        if (!(s > 0.0)) throw FormatError("blob '" + slot.name + "' has a non-positive scale");
      }
      const std::uint64_t n = r.u64("value count");
      if (n != slot.size) throw FormatError("blob '" + slot.name + "' has a wrong value count");
      const std::uint8_t* raw = r.take(n, "quantized values");
      q.values.resize(n);
      std::memcpy(q.values.data(), raw, n);
      for (std::int8_t v : q.values) {
        if (v == -128) throw FormatError("blob '" + slot.name + "' holds -128, outside the symmetric range");
      }
      model.params.emplace_back(std::move(q));
    } else {
      throw FormatError("blob '" + slot.name + "' has unknown tag " + std::to_string(tag));
    }
    if (r.pos() != end) throw FormatError("blob '" + slot.name + "' length field does not match its contents");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last blob");
  return model;
}

ModelFile to_model_file(const Network& net) {
  ModelFile m{net.spec(), {}};
  net.visit([&](const ParamSlot<const Real>& s) { m.params.emplace_back(std::vector<Real>(s.values.begin(), s.values.end())); });
  return m;
}

ModelFile to_model_file(const QuantizedNetwork& qnet) { return ModelFile{qnet.spec(), qnet.params()}; }

void save_model(const ModelFile& model, const std::string& path) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing '" + path + "'");
}

ModelFile read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

Network load_network(const std::string& path) {
  ModelFile m = read_model(path);
  if (m.quantized()) return QuantizedNetwork(m.spec, std::move(m.params)).dequantized();
  Network net = Network::compile(m.spec, 0);
  std::vector<Real> flat;
  for (const StoredParam& p : m.params) {
    const auto& v = std::get<std::vector<Real>>(p);
    flat.insert(flat.end(), v.begin(), v.end());
  }
  net.set_flat_params(flat);
  return net;
}

QuantizedNetwork load_quantized(const std::string& path) {
  ModelFile m = read_model(path);
  if (!m.quantized()) throw FormatError("'" + path + "' holds a full-precision model, not a quantized one");
  return QuantizedNetwork(m.spec, std::move(m.params));
}

}  // namespace ack
