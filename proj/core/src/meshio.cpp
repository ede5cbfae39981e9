#include "worldmesh/meshio.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "worldmesh/error.hpp"
#include "worldmesh/image.hpp"

namespace worldmesh {

static_assert(std::endian::native == std::endian::little, "mesh serialization assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'W', 'M', 'E', 'S', 'H', '0', '0', '1'};

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  std::size_t count(std::size_t elem_size) {
    const auto n = get<std::uint64_t>();
    if (elem_size > 0 && n > (bytes.size() - pos) / elem_size) throw Error(ErrorCode::kSchemaError, "mesh: count exceeds data");
    return static_cast<std::size_t>(n);
  }
  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw Error(ErrorCode::kSchemaError, "mesh: truncated data");
  }
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_mesh(const TriMesh& mesh) {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(static_cast<std::uint64_t>(mesh.vertices.size()));
  for (const auto& v : mesh.vertices) {
    w.put(v.x());
    w.put(v.y());
    w.put(v.z());
  }
  w.put(static_cast<std::uint64_t>(mesh.triangles.size()));
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    for (auto i : mesh.triangles[f]) w.put(i);
    w.put(mesh.face_tag[f]);
  }
  w.put(static_cast<std::uint64_t>(mesh.tags.size()));
  for (const auto& t : mesh.tags) {
    w.put_string(t.room_id);
    w.put(static_cast<std::uint8_t>(t.category));
    w.put_string(t.object_id);
  }
  w.put(static_cast<std::uint64_t>(mesh.uvs.size()));
  for (const auto& uv : mesh.uvs) {
    w.put(uv.x());
    w.put(uv.y());
  }
  return std::move(w.out);
}

TriMesh decode_mesh(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic)
    if (r.get<char>() != c) throw Error(ErrorCode::kSchemaError, "mesh: bad magic");
  TriMesh m;
  m.vertices.resize(r.count(24));
  for (auto& v : m.vertices) {
    const double x = r.get<double>(), y = r.get<double>(), z = r.get<double>();
    v = Vec3(x, y, z);
  }
  const std::size_t nf = r.count(16);
  m.triangles.resize(nf);
  m.face_tag.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    for (auto& i : m.triangles[f]) i = r.get<std::uint32_t>();
    m.face_tag[f] = r.get<std::uint32_t>();
  }
  m.tags.resize(r.count(9));
  for (auto& t : m.tags) {
    t.room_id = r.get_string();
    const auto c = r.get<std::uint8_t>();
    if (c > static_cast<std::uint8_t>(Category::kObject)) throw Error(ErrorCode::kSchemaError, "mesh: bad category");
    t.category = static_cast<Category>(c);
    t.object_id = r.get_string();
  }
  m.uvs.resize(r.count(16));
  for (auto& uv : m.uvs) {
    const double u = r.get<double>(), v = r.get<double>();
    uv = Vec2(u, v);
  }
  if (r.pos != bytes.size()) throw Error(ErrorCode::kSchemaError, "mesh: trailing data");
  for (std::size_t f = 0; f < nf; ++f) {
    if (m.face_tag[f] >= m.tags.size()) throw Error(ErrorCode::kSchemaError, "mesh: tag index out of range");
    for (auto i : m.triangles[f])
      if (i >= m.vertices.size()) throw Error(ErrorCode::kSchemaError, "mesh: vertex index out of range");
  }
  if (!m.uvs.empty() && m.uvs.size() != m.vertices.size()) throw Error(ErrorCode::kSchemaError, "mesh: uv count mismatch");
  return m;
}

void write_mesh(const std::filesystem::path& path, const TriMesh& mesh) { write_file(path, encode_mesh(mesh)); }

TriMesh read_mesh(const std::filesystem::path& path) { return decode_mesh(read_file(path)); }

}  // namespace worldmesh
