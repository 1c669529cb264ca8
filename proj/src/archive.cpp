#include "advmark/archive.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>

#include "advmark/errors.hpp"

namespace advmark {
namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'M', 'A', 'R', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_pod(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(v));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void read(void* out, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("archive truncated");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T pod() {
    T v;
    read(&v, sizeof(v));
    return v;
  }

  std::size_t pos() const { return pos_; }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Archive::get(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  throw IncompatibilityError("archive has no array named " + name);
}

bool Archive::has(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return true;
  return false;
}

void write_archive(const std::string& path, const nlohmann::json& meta,
                   const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
  std::string buf;
  put_bytes(buf, kMagic, sizeof(kMagic));
  put_pod(buf, kVersion);
  const std::string meta_str = meta.dump();
  put_pod(buf, static_cast<std::uint64_t>(meta_str.size()));
  put_bytes(buf, meta_str.data(), meta_str.size());
  put_pod(buf, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    put_pod(buf, static_cast<std::uint16_t>(name.size()));
    put_bytes(buf, name.data(), name.size());
    put_pod(buf, static_cast<std::uint8_t>(t->shape.size()));
    for (int d : t->shape) put_pod(buf, static_cast<std::int32_t>(d));
    put_bytes(buf, t->ptr(), sizeof(double) * t->count());
  }
  const std::uint32_t crc =
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size()));
  put_pod(buf, crc);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open " + tmp + " for writing");
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw FormatError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw FormatError("cannot move " + tmp + " into place");
}

Archive read_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open archive " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) * 2)
    throw FormatError("archive truncated: " + path);

  Reader r(std::move(bytes));
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("bad archive magic in " + path);
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion)
    throw IncompatibilityError("archive version " + std::to_string(version) +
                               " not supported (expected " + std::to_string(kVersion) + ")");

  Archive a;
  const auto meta_len = r.pod<std::uint64_t>();
  std::string meta_str(meta_len, '\0');
  r.read(meta_str.data(), meta_len);
  a.meta = nlohmann::json::parse(meta_str, nullptr, false);
  if (a.meta.is_discarded()) throw FormatError("archive metadata is not valid JSON");

  const auto n_arrays = r.pod<std::uint32_t>();
  a.arrays.reserve(n_arrays);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    const auto name_len = r.pod<std::uint16_t>();
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    const auto ndim = r.pod<std::uint8_t>();
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
      d = r.pod<std::int32_t>();
      if (d <= 0) throw FormatError("archive array " + name + " has non-positive dim");
    }
    Tensor t(shape);
    r.read(t.ptr(), sizeof(double) * t.count());
    a.arrays.emplace_back(std::move(name), std::move(t));
  }

  // Integrity check last: a short file surfaces above as truncation, while
  // in-place corruption of a structurally whole file surfaces here.
  if (r.pos() + sizeof(std::uint32_t) > r.bytes().size())
    throw FormatError("archive truncated: " + path);
  const std::uint32_t stored_crc = [&] {
    std::uint32_t v;
    std::memcpy(&v, r.bytes().data() + r.bytes().size() - sizeof(v), sizeof(v));
    return v;
  }();
  const std::uint32_t actual_crc =
      crc32(0, reinterpret_cast<const Bytef*>(r.bytes().data()),
            static_cast<uInt>(r.bytes().size() - sizeof(std::uint32_t)));
  if (stored_crc != actual_crc) throw IntegrityError("archive checksum mismatch: " + path);
  return a;
}

}  // namespace advmark
