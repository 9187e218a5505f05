#include "demo/core/param_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "demo/core/error.hpp"

namespace demo {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'M', 'O', 'P', 'R', 'M', '\0'};

template <class T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits;
  std::memcpy(&bits, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view buf) : buf_(buf) {}

  template <class T>
  T get() {
    need(sizeof(T));
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, &bits, sizeof(T));
    return v;
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("parameter file truncated");
  }
  std::string_view buf_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_params(const std::filesystem::path& path, const ParameterSet& params, std::string_view manifest_json) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kParamFormatVersion);
  put<std::uint64_t>(out, manifest_json.size());
  out.append(manifest_json);
  const auto all = params.all();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(all.size()));
  for (const auto* p : all) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.append(p->name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.ndim()));
    for (auto e : p->value.shape()) put<std::uint64_t>(out, e);
    for (double v : p->value.data()) put<double>(out, v);
  }
  put<std::uint64_t>(out, fnv1a64(out));

  // Write-then-rename so a crash never leaves a half-written checkpoint.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write " + tmp);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw FormatError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ParamFile read_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a parameter file");
  }
  Reader tail(std::string_view(buf).substr(buf.size() - 8));
  const auto stored = tail.get<std::uint64_t>();
  const std::string_view body(buf.data(), buf.size() - 8);
  if (fnv1a64(body) != stored) throw FormatError(path.string() + ": checksum mismatch");

  Reader r(body);
  r.bytes(sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kParamFormatVersion) {
    throw FormatError(path.string() + ": unsupported format_version " + std::to_string(version));
  }
  ParamFile pf;
  pf.checksum = stored;
  const auto mlen = r.get<std::uint64_t>();
  pf.manifest = std::string(r.bytes(mlen));
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nlen = r.get<std::uint32_t>();
    std::string name(r.bytes(nlen));
    const auto ndim = r.get<std::uint32_t>();
    Shape shape(ndim);
    for (auto& e : shape) e = r.get<std::uint64_t>();
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = r.get<double>();
    pf.params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.pos() != body.size()) throw FormatError(path.string() + ": trailing bytes");
  return pf;
}

void assign_params(ParameterSet& dst, const ParameterSet& src) {
  for (auto* p : dst.all()) {
    const auto* s = src.find(p->name);
    if (!s) throw FormatError("checkpoint lacks parameter '" + p->name + "'");
    if (s->value.shape() != p->value.shape()) {
      throw FormatError("checkpoint parameter '" + p->name + "' has shape " + shape_str(s->value.shape()) +
                        ", expected " + shape_str(p->value.shape()));
    }
    p->value = s->value;
  }
}

}  // namespace demo
