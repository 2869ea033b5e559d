#include "morphfit/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "morphfit/error.hpp"

namespace morphfit {
namespace {

constexpr char kMagicTag[4] = {'M', 'F', 'I', 'T'};
constexpr char kVersion[4] = {'0', '0', '0', '1'};

class ByteWriter {
 public:
  void raw(const char* data, std::size_t n) { bytes_.append(data, n); }
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorCode::kTruncatedPayload, std::string("file ends inside ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * k);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * k);
    return std::bit_cast<double>(bits);
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const BilinearModel& model) {
  ByteWriter w;
  w.raw(kMagicTag, 4);
  w.raw(kVersion, 4);
  w.u32(static_cast<std::uint32_t>(model.n_vertices()));
  w.u32(static_cast<std::uint32_t>(model.n_identity()));
  w.u32(static_cast<std::uint32_t>(model.n_expression()));
  w.u32(static_cast<std::uint32_t>(model.topology().size()));
  w.u32(static_cast<std::uint32_t>(model.landmark_indices().size()));
  for (double v : model.tensor()) w.f64(v);
  for (const auto& tri : model.topology()) {
    for (auto v : tri) w.u32(v);
  }
  for (const auto& t : model.uv()) {
    w.f64(t.x());
    w.f64(t.y());
  }
  for (auto label : model.semantic()) w.u8(label);
  for (auto v : model.landmark_indices()) w.u32(v);
  for (Index j = 0; j < model.n_expression(); ++j) w.f64(model.neutral_expression()[j]);
  return w.take();
}

BilinearModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagicTag, 4) != 0) {
    fail(ErrorCode::kBadMagic, "not a morphfit model file");
  }
  if (std::memcmp(bytes.data() + 4, kVersion, 4) != 0) {
    fail(ErrorCode::kVersionMismatch,
         "model file version '" + bytes.substr(4, 4) + "', this build reads '0001'");
  }
  ByteReader r(bytes);
  for (int k = 0; k < 8; ++k) r.u8("magic");
  const Index n = r.u32("header");
  const Index na = r.u32("header");
  const Index ne = r.u32("header");
  const std::uint32_t n_tri = r.u32("header");
  const std::uint32_t n_lm = r.u32("header");

  const auto tensor_size = static_cast<std::size_t>(3 * n * na * ne);
  r.need(tensor_size * 8, "tensor payload");
  std::vector<double> tensor(tensor_size);
  for (auto& v : tensor) v = r.f64("tensor payload");

  r.need(static_cast<std::size_t>(n_tri) * 12, "topology payload");
  std::vector<Triangle> topology(n_tri);
  for (auto& tri : topology) {
    for (auto& v : tri) v = r.u32("topology payload");
  }
  std::vector<Eigen::Vector2d> uv(static_cast<std::size_t>(n));
  for (auto& t : uv) {
    t.x() = r.f64("uv payload");
    t.y() = r.f64("uv payload");
  }
  std::vector<std::uint8_t> semantic(static_cast<std::size_t>(n));
  for (auto& s : semantic) s = r.u8("semantic payload");
  std::vector<std::uint32_t> landmarks(n_lm);
  for (auto& v : landmarks) v = r.u32("landmark payload");
  Eigen::VectorXd neutral(ne);
  for (Index j = 0; j < ne; ++j) neutral[j] = r.f64("neutral expression payload");

  return BilinearModel(n, na, ne, std::move(tensor), std::move(topology), std::move(uv),
                       std::move(semantic), std::move(landmarks), std::move(neutral));
}

void save_model(const BilinearModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  const auto bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

BilinearModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingInput, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

void write_obj(const std::filesystem::path& path, const BilinearModel& model, const Shape& shape) {
  if (shape.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "shape does not belong to this model");
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (Index v = 0; v < shape.vertex_count(); ++v) {
    const auto x = shape.vertex(v);
    out << "v " << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  }
  for (const auto& t : model.uv()) out << "vt " << t.x() << ' ' << t.y() << '\n';
  for (const auto& tri : model.topology()) {
    out << 'f';
    for (auto v : tri) out << ' ' << v + 1 << '/' << v + 1;
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Shape read_obj(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingInput, path.string());
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.size() < 2 || line[0] != 'v' || line[1] != ' ') continue;
    std::istringstream ls(line.substr(2));
    double x = 0, y = 0, z = 0;
    if (!(ls >> x >> y >> z)) {
      fail(ErrorCode::kMalformed, path.string() + ":" + std::to_string(line_no) + ": bad vertex");
    }
    values.insert(values.end(), {x, y, z});
  }
  return Shape(Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
}

}  // namespace morphfit
