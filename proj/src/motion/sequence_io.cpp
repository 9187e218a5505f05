#include "demo/motion/sequence_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "demo/core/error.hpp"

namespace demo::motion {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("sequence line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("sequence header missing '" + key + "'");
  std::uint64_t v = 0;
  const auto* first = it->second.data();
  const auto* last = first + it->second.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw FormatError("sequence header: bad value for '" + key + "'");
  return v;
}

}  // namespace

void write_sequence(std::ostream& os, const SequenceFile& seq) {
  const std::size_t d = seq.latent_dim, h = seq.conditions.cols();
  if (seq.latents.cols() != d || seq.conditions.rows() != seq.latents.rows()) {
    throw DimensionError("write_sequence: latents/conditions shapes disagree");
  }
  os << "#demo-sequence,format_version=" << kSequenceFormatVersion << ",d=" << d << ",F=" << seq.frames()
     << ",lip=" << seq.dims.lip << ",pose=" << seq.dims.pose << ",eye=" << seq.dims.eye
     << ",residual=" << seq.dims.residual << ",audio=" << seq.audio_channels << ",cond=" << h << ",seed=" << seq.seed
     << ",world_seed=" << seq.world_seed << "\n";
  os << "frame";
  for (std::size_t j = 0; j < d; ++j) os << ",z" << j;
  for (std::size_t j = 0; j < h; ++j) os << ",c" << j;
  os << "\n";
  for (std::size_t f = 0; f < seq.frames(); ++f) {
    os << f;
    for (std::size_t j = 0; j < d; ++j) os << ',' << fmt(seq.latents(f, j));
    for (std::size_t j = 0; j < h; ++j) os << ',' << fmt(seq.conditions(f, j));
    os << "\n";
  }
}

SequenceFile read_sequence(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("sequence: empty input");
  auto fields = split(line, ',');
  if (fields.empty() || fields[0] != "#demo-sequence") throw FormatError("sequence: missing #demo-sequence header");
  std::map<std::string, std::string> kv;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string::npos) throw FormatError("sequence header: malformed field '" + fields[i] + "'");
    kv[fields[i].substr(0, eq)] = fields[i].substr(eq + 1);
  }
  if (parse_u64(kv, "format_version") != kSequenceFormatVersion) {
    throw FormatError("sequence: unsupported format_version " + kv["format_version"]);
  }
  SequenceFile seq;
  seq.latent_dim = parse_u64(kv, "d");
  const std::size_t F = parse_u64(kv, "F");
  seq.dims = {parse_u64(kv, "lip"), parse_u64(kv, "pose"), parse_u64(kv, "eye"), parse_u64(kv, "residual")};
  seq.audio_channels = parse_u64(kv, "audio");
  const std::size_t h = parse_u64(kv, "cond");
  seq.seed = parse_u64(kv, "seed");
  seq.world_seed = parse_u64(kv, "world_seed");
  if (F == 0 || seq.latent_dim == 0 || h == 0) throw FormatError("sequence: zero extent in header");

  if (!std::getline(is, line)) throw FormatError("sequence: missing column header");
  if (split(line, ',').size() != 1 + seq.latent_dim + h) throw FormatError("sequence: column header width mismatch");

  std::vector<double> z, c;
  z.reserve(F * seq.latent_dim);
  c.reserve(F * h);
  for (std::size_t f = 0; f < F; ++f) {
    if (!std::getline(is, line)) throw FormatError("sequence: expected " + std::to_string(F) + " rows");
    auto cells = split(line, ',');
    if (cells.size() != 1 + seq.latent_dim + h) throw FormatError("sequence row " + std::to_string(f) + ": bad width");
    for (std::size_t j = 0; j < seq.latent_dim; ++j) z.push_back(parse_double(cells[1 + j], f + 3));
    for (std::size_t j = 0; j < h; ++j) c.push_back(parse_double(cells[1 + seq.latent_dim + j], f + 3));
  }
  seq.latents = Tensor({F, seq.latent_dim}, std::move(z));
  seq.conditions = Tensor({F, h}, std::move(c));
  return seq;
}

void write_sequence(const std::filesystem::path& path, const SequenceFile& seq) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  write_sequence(os, seq);
}

SequenceFile read_sequence(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot read " + path.string());
  return read_sequence(is);
}

}  // namespace demo::motion
