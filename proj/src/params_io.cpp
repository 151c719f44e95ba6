#include "advpc/params_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "advpc/error.hpp"

namespace advpc::nn {

namespace {

constexpr char kMagic[4] = {'n', 'n', 'p', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
}

void put_str(std::string& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_f64(std::string& out, double v) { put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("nnp1: truncated file");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_params(const std::vector<ParamSection>& sections) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    put_str(out, s.tag);
    put_str(out, s.meta);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.params.size()));
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      const Tensor& t = s.params.values[i];
      put_str(out, s.params.names[i]);
      put_le<std::uint32_t>(out, 2);
      put_le<std::uint64_t>(out, t.rows);
      put_le<std::uint64_t>(out, t.cols);
      for (double v : t.data) put_f64(out, v);
    }
  }
  return out;
}

std::vector<ParamSection> decode_params(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error("nnp1: bad magic");
  }
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>();
  if (r.get<std::uint32_t>() != kVersion) throw Error("nnp1: unsupported version");
  const auto count = r.get<std::uint32_t>();
  std::vector<ParamSection> sections;
  for (std::uint32_t s = 0; s < count; ++s) {
    ParamSection sec;
    sec.tag = r.str();
    sec.meta = r.str();
    const auto nt = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < nt; ++k) {
      std::string name = r.str();
      const auto rank = r.get<std::uint32_t>();
      if (rank == 0 || rank > 2) throw Error("nnp1: unsupported tensor rank");
      std::uint64_t dims[2] = {1, 1};
      for (std::uint32_t d = 0; d < rank; ++d) dims[d + (2 - rank)] = r.get<std::uint64_t>();
      r.need(dims[0] * dims[1] * 8);
      Tensor t(dims[0], dims[1]);
      for (auto& v : t.data) v = r.f64();
      sec.params.add(std::move(name), std::move(t));
    }
    sections.push_back(std::move(sec));
  }
  if (!r.done()) throw Error("nnp1: trailing bytes");
  return sections;
}

void write_params(const std::filesystem::path& path, const std::vector<ParamSection>& sections) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  const std::string bytes = encode_params(sections);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<ParamSection> read_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_params(buf.str());
}

const ParamSection& find_section(const std::vector<ParamSection>& sections, const std::string& tag) {
  for (const auto& s : sections) {
    if (s.tag == tag) return s;
  }
  throw Error("nnp1: missing section '" + tag + "'");
}

void save_classifier(const std::filesystem::path& path, const ClassifierParams& p) {
  write_params(path, {ParamSection{"clf", p.arch.name + " " + std::to_string(p.arch.classes), p.params}});
}

ClassifierParams load_classifier(const std::filesystem::path& path) {
  const auto sections = read_params(path);
  const auto& sec = find_section(sections, "clf");
  std::istringstream meta(sec.meta);
  std::string name;
  std::size_t classes = 0;
  if (!(meta >> name >> classes)) throw Error("nnp1: bad classifier metadata");
  ClassifierParams p;
  p.arch = Architecture::by_name(name, classes);
  p.params = sec.params;
  const auto expected = init_classifier(p.arch, 0);
  if (p.params.size() != expected.params.size()) throw Error("nnp1: classifier tensor count mismatch");
  for (std::size_t i = 0; i < p.params.size(); ++i) {
    if (!p.params.values[i].same_shape(expected.params.values[i])) {
      throw Error("nnp1: classifier tensor shape mismatch for " + p.params.names[i]);
    }
  }
  return p;
}

}  // namespace advpc::nn
