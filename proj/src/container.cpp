#include "zlse/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "zlse/errors.hpp"

namespace zlse {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("container truncated at offset " + std::to_string(pos_) + " while reading " + what);
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Container::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string encode_container(const Container& c) {
  std::string out = "ZLSE";
  put<std::uint32_t>(out, kContainerVersion);
  const std::string json = c.header.dump();
  put<std::uint64_t>(out, json.size());
  out += json;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    if (shape_size(t.shape) != t.data.size()) throw ShapeError("container: tensor '" + t.name + "' size mismatch");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (double v : t.data) put<double>(out, v);
  }
  put<std::uint64_t>(out, c.rng.size());
  out += c.rng;
  return out;
}

Container decode_container(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != "ZLSE") throw ParseError("container: bad magic at offset 0");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw ParseError("container: unsupported version " + std::to_string(version) + " at offset 4");
  }
  Container c;
  const auto json_len = r.get<std::uint64_t>("header length");
  const std::size_t json_at = r.offset();
  const std::string json = r.take(json_len, "header");
  try {
    c.header = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("container: header JSON at offset " + std::to_string(json_at) + ": " + e.what());
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.take(r.get<std::uint32_t>("name length"), "tensor name");
    const std::size_t dtype_at = r.offset();
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > 1) throw ParseError("container: unknown dtype at offset " + std::to_string(dtype_at));
    const auto rank = r.get<std::uint32_t>("rank");
    for (std::uint32_t a = 0; a < rank; ++a) t.shape.push_back(r.get<std::uint64_t>("dims"));
    const std::size_t n = shape_size(t.shape);
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      t.data[k] = dtype == 1 ? r.get<double>("payload") : static_cast<double>(r.get<float>("payload"));
    }
    c.tensors.push_back(std::move(t));
  }
  c.rng = r.take(r.get<std::uint64_t>("rng length"), "rng state");
  if (!r.done()) throw ParseError("container: trailing bytes at offset " + std::to_string(r.offset()));
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode_container(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

}  // namespace zlse
