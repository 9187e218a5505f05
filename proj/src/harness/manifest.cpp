#include "demo/harness/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "demo/core/error.hpp"

namespace demo::harness {

namespace {

std::string to_hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (unsigned i = 0; i < n; ++i) {
    s[2 * i] = digits[p[i] >> 4];
    s[2 * i + 1] = digits[p[i] & 15];
  }
  return s;
}

std::string sha1_parts(std::initializer_list<std::string_view> parts) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1) throw Error("sha1: init failed");
  for (auto p : parts)
    if (EVP_DigestUpdate(ctx.get(), p.data(), p.size()) != 1) throw Error("sha1: update failed");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw Error("sha1: final failed");
  return to_hex(md, len);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

std::string sha1_hex(std::string_view bytes) { return sha1_parts({bytes}); }

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size());
  return sha1_parts({header, std::string_view("\0", 1), bytes});
}

std::string git_blob_sha1_file(const std::filesystem::path& path) { return git_blob_sha1(slurp(path)); }

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void RunManifest::add(const std::filesystem::path& root, const std::string& rel, const std::string& role) {
  const std::string bytes = slurp(root / rel);
  files.push_back({rel, role, git_blob_sha1(bytes), bytes.size()});
}

std::string RunManifest::json() const {
  nlohmann::ordered_json j;
  j["format_version"] = kManifestFormatVersion;
  j["command"] = command;
  j["preset"] = preset;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["wall_seconds"] = wall_seconds;
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : files)
    j["files"].push_back({{"path", f.path}, {"role", f.role}, {"sha1", f.sha1}, {"bytes", f.bytes}});
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const int v = j.at("format_version");
    if (v != kManifestFormatVersion) throw FormatError("unsupported manifest format_version " + std::to_string(v));
    RunManifest m;
    m.command = j.at("command");
    m.preset = j.at("preset");
    m.config_hash = j.at("config_hash");
    m.seed = j.at("seed");
    m.wall_seconds = j.at("wall_seconds");
    for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("role"), f.at("sha1"), f.at("bytes")});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad run manifest: ") + e.what());
  }
}

void RunManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, json()); }

RunManifest RunManifest::read(const std::filesystem::path& path) { return from_json(slurp(path)); }

std::vector<std::string> RunManifest::verify(const std::filesystem::path& root) const {
  std::vector<std::string> bad;
  for (const auto& f : files) {
    std::error_code ec;
    if (!std::filesystem::exists(root / f.path, ec) || git_blob_sha1_file(root / f.path) != f.sha1)
      bad.push_back(f.path);
  }
  return bad;
}

}  // namespace demo::harness
