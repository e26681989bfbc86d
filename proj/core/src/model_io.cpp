#include "itals/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "itals/error.hpp"

namespace itals {

namespace {

constexpr std::array<char, 5> kMagic{'I', 'T', 'A', 'L', 'S'};
constexpr std::uint32_t kMaxOrder = 64;
constexpr std::uint32_t kMaxString = 1u << 24;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, bytes);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const auto n = u32();
    if (n > kMaxString) throw FormatError("model file: string too long");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("model file is truncated");
  }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

void write_header(Writer& w, std::ostream& out, ModelKind kind) {
  out.write(kMagic.data(), kMagic.size());
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(kind));
}

ModelKind read_header(Reader& r) {
  std::array<char, 5> magic{};
  r.read(magic.data(), magic.size());
  if (magic != kMagic) throw FormatError("not an iTALS model file (bad magic)");
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  const auto kind = r.u32();
  if (kind > 1) throw FormatError("unknown model kind " + std::to_string(kind));
  return static_cast<ModelKind>(kind);
}

void write_shape(Writer& w, const TensorShape& shape) {
  for (auto d : shape.dims) w.u64(d);
  for (const auto& role : shape.axis_roles) w.str(role);
}

TensorShape read_shape(Reader& r, std::uint32_t order) {
  TensorShape shape;
  for (std::uint32_t a = 0; a < order; ++a) shape.dims.push_back(r.u64());
  for (std::uint32_t a = 0; a < order; ++a) shape.axis_roles.push_back(r.str());
  try {
    shape.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  return shape;
}

std::uint32_t read_order(Reader& r) {
  const auto order = r.u32();
  if (order < 2 || order > kMaxOrder) throw FormatError("model file: bad tensor order");
  return order;
}

void write_id_maps(Writer& w, const std::vector<IdMap>& maps, std::size_t order) {
  for (std::size_t a = 0; a < order; ++a) {
    if (a >= maps.size()) {
      w.u64(0);
      continue;
    }
    w.u64(maps[a].size());
    for (const auto& name : maps[a].names()) w.str(name);
  }
}

std::vector<IdMap> read_id_maps(Reader& r, std::size_t order) {
  std::vector<IdMap> maps;
  for (std::size_t a = 0; a < order; ++a) {
    const auto n = r.u64();
    if (n > (1ull << 32)) throw FormatError("model file: id map too large");
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i) names.push_back(r.str());
    try {
      maps.emplace_back(std::move(names));
    } catch (const ShapeError& e) {
      throw FormatError(std::string("model file: ") + e.what());
    }
  }
  return maps;
}

void write_config(Writer& w, const TrainConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.features));
  w.u32(static_cast<std::uint32_t>(c.epochs));
  w.f64(c.lambda);
  w.u32(c.reg_mode == RegMode::constant ? 0 : 1);
  w.u64(c.seed);
  w.u8(c.init_scale ? 1 : 0);
  w.f64(c.init_scale.value_or(0.0));
  w.u32(static_cast<std::uint32_t>(c.threads));
}

TrainConfig read_config(Reader& r) {
  TrainConfig c;
  c.features = static_cast<int>(r.u32());
  c.epochs = static_cast<int>(r.u32());
  c.lambda = r.f64();
  c.reg_mode = r.u32() == 0 ? RegMode::constant : RegMode::support;
  c.seed = r.u64();
  const bool has_scale = r.u8() != 0;
  const double scale = r.f64();
  if (has_scale) c.init_scale = scale;
  c.threads = static_cast<int>(r.u32());
  return c;
}

void write_metadata(Writer& w, const std::map<std::string, std::string>& meta) {
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
}

std::map<std::string, std::string> read_metadata(Reader& r) {
  std::map<std::string, std::string> meta;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto key = r.str();
    meta[key] = r.str();
  }
  return meta;
}

void write_body(Writer& w, const Model& model) {
  model.validate();
  w.u32(static_cast<std::uint32_t>(model.order()));
  w.u32(static_cast<std::uint32_t>(model.features()));
  write_shape(w, model.shape);
  for (const auto& m : model.factors) {
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(k, j));
    }
  }
  write_id_maps(w, model.id_maps, model.order());
  write_config(w, model.config);
  write_metadata(w, model.metadata);
}

Model read_body(Reader& r) {
  Model model;
  const auto order = read_order(r);
  const auto k = r.u32();
  if (k == 0 || k > (1u << 20)) throw FormatError("model file: bad feature count");
  model.shape = read_shape(r, order);
  for (auto dim : model.shape.dims) {
    FactorMatrix m(k, static_cast<Eigen::Index>(dim));
    for (Eigen::Index row = 0; row < m.rows(); ++row) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(row, j) = r.f64();
    }
    model.factors.push_back(std::move(m));
  }
  model.id_maps = read_id_maps(r, order);
  model.config = read_config(r);
  model.metadata = read_metadata(r);
  model.refresh_grams();
  return model;
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

std::ifstream open_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  Writer w(out);
  write_header(w, out, ModelKind::single);
  write_body(w, model);
}

Model load_model(std::istream& in) {
  Reader r(in);
  if (read_header(r) != ModelKind::single) {
    throw FormatError("model file holds a composite model");
  }
  return read_body(r);
}

void save_composite(const CompositeModel& model, std::ostream& out) {
  Writer w(out);
  write_header(w, out, ModelKind::composite);
  w.u32(static_cast<std::uint32_t>(model.context_axis));
  w.u32(static_cast<std::uint32_t>(model.state_count()));
  w.u32(static_cast<std::uint32_t>(model.shape.order()));
  write_shape(w, model.shape);
  write_id_maps(w, model.id_maps, model.shape.order());
  write_config(w, model.config);
  write_metadata(w, model.metadata);
  for (const auto& sub : model.per_state) {
    w.u8(sub ? 1 : 0);
    if (sub) write_body(w, *sub);
  }
}

CompositeModel load_composite(std::istream& in) {
  Reader r(in);
  if (read_header(r) != ModelKind::composite) {
    throw FormatError("model file holds a single model, not a composite");
  }
  CompositeModel model;
  model.context_axis = r.u32();
  const auto states = r.u32();
  const auto order = read_order(r);
  model.shape = read_shape(r, order);
  if (model.context_axis >= order || model.shape.dims[model.context_axis] != states) {
    throw FormatError("model file: composite header is inconsistent");
  }
  model.id_maps = read_id_maps(r, order);
  model.config = read_config(r);
  model.metadata = read_metadata(r);
  model.per_state.resize(states);
  for (auto& sub : model.per_state) {
    if (r.u8() != 0) sub = read_body(r);
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  with_output(path, [&](std::ostream& out) { save_model(model, out); });
}

Model load_model(const std::filesystem::path& path) {
  auto in = open_model(path);
  return load_model(in);
}

void save_composite(const CompositeModel& model, const std::filesystem::path& path) {
  with_output(path, [&](std::ostream& out) { save_composite(model, out); });
}

CompositeModel load_composite(const std::filesystem::path& path) {
  auto in = open_model(path);
  return load_composite(in);
}

ModelKind peek_model_kind(const std::filesystem::path& path) {
  auto in = open_model(path);
  Reader r(in);
  return read_header(r);
}

}  // namespace itals
