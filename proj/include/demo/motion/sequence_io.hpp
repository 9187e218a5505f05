#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "demo/core/tensor.hpp"
#include "demo/motion/factor_space.hpp"

namespace demo::motion {

inline constexpr int kSequenceFormatVersion = 1;

/// One motion sequence on disk.
///
/// Line 1 is a header of comma-separated key=value pairs:
///   #demo-sequence,format_version=1,d=..,F=..,lip=..,pose=..,eye=..,residual=..,
///   audio=..,cond=..,seed=..,world_seed=..
/// Line 2 names the columns: frame,z0..z{d-1},c0..c{cond-1}
/// Then F rows of values printed with 17 significant digits (exact round trip).
struct SequenceFile {
  std::size_t latent_dim = 0;
  FactorDims dims;
  std::size_t audio_channels = 0;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  Tensor latents;     ///< F x d
  Tensor conditions;  ///< F x cond

  std::size_t frames() const { return latents.rows(); }
  bool operator==(const SequenceFile&) const = default;
};

void write_sequence(std::ostream& os, const SequenceFile& seq);
SequenceFile read_sequence(std::istream& is);
void write_sequence(const std::filesystem::path& path, const SequenceFile& seq);
SequenceFile read_sequence(const std::filesystem::path& path);

}  // namespace demo::motion
