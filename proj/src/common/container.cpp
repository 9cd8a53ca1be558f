#include "xbar/common/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xbar/common/error.hpp"

namespace xbar {

namespace {

constexpr char kMagic[8] = {'X', 'B', 'A', 'R', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "container payload is written in native little-endian order");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("container truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

const NamedArray& Container::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw FormatError("container has no array '" + name + "'");
}

void Container::add(std::string name, std::vector<std::size_t> shape, std::vector<double> data) {
  if (product(shape) != data.size())
    throw ShapeError("array '" + name + "' data length does not match its shape");
  arrays.push_back({std::move(name), std::move(shape), std::move(data)});
}

std::string serialize_container(const Container& c) {
  nlohmann::json header;
  header["kind"] = c.kind;
  header["meta"] = c.meta;
  header["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : c.arrays) {
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.data.size();
  }
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * sizeof(double));
  for (const auto& a : c.arrays)
    out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(double));
  return out;
}

Container deserialize_container(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint container (bad magic)");
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version));
  const auto header_len = take<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw FormatError("container header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("container header: ") + e.what());
  }
  pos += header_len;

  Container c;
  c.kind = header.at("kind").get<std::string>();
  c.meta = header.at("meta");
  const std::size_t payload = pos;
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t n = product(a.shape);
    const std::size_t begin = payload + offset * sizeof(double);
    if (begin + n * sizeof(double) > bytes.size())
      throw FormatError("array '" + a.name + "' runs past end of container");
    a.data.resize(n);
    std::memcpy(a.data.data(), bytes.data() + begin, n * sizeof(double));
    c.arrays.push_back(std::move(a));
  }
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const std::filesystem::path& path, const Container& c) {
  write_file_atomic(path, serialize_container(c));
}

Container read_container(const std::filesystem::path& path) {
  return deserialize_container(read_file(path));
}

}  // namespace xbar
