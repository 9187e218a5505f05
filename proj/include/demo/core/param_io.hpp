#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "demo/core/nn.hpp"

namespace demo {

inline constexpr std::uint32_t kParamFormatVersion = 1;

/// Binary parameter file, all integers and floats little-endian:
///
///   magic "DEMOPRM\0" | u32 format_version | u64 manifest_len | manifest (UTF-8 JSON)
///   u32 tensor_count | per tensor: u32 name_len, name, u32 ndim, u64 dims[ndim], f64 payload
///   u64 checksum (FNV-1a 64 over every preceding byte)
///
/// The manifest carries the owning module's configuration.
void write_params(const std::filesystem::path& path, const ParameterSet& params, std::string_view manifest_json);

struct ParamFile {
  std::string manifest;
  ParameterSet params;
  std::uint64_t checksum = 0;
};

/// Throws FormatError on bad magic/version, truncation or checksum mismatch.
ParamFile read_params(const std::filesystem::path& path);

/// Copies values from `src` into same-named, same-shaped parameters of `dst`.
/// Throws when any parameter of `dst` is missing or mis-shaped.
void assign_params(ParameterSet& dst, const ParameterSet& src);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace demo
