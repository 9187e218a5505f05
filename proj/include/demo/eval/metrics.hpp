#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "demo/core/linalg.hpp"
#include "demo/motion/factor_space.hpp"

namespace demo::eval {

struct GaussianSummary {
  Tensor mean;        ///< 1 x d
  Tensor covariance;  ///< d x d

  /// Sample mean and unbiased covariance of the rows; needs at least 2 rows.
  static GaussianSummary fit(const Tensor& samples);
  std::size_t dim() const { return mean.size(); }
};

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2). Square
/// roots by symmetric eigendecomposition with negative eigenvalues clipped
/// to zero. Throws DimensionError on mismatched dimensions.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

/// Closed-form least-squares map from audio channels to lip coefficients,
/// fitted on ground truth and then frozen.
class SyncProbe {
 public:
  SyncProbe() = default;
  static SyncProbe fit(const Tensor& audio, const Tensor& lip_coeffs);

  bool fitted() const { return probe_.fitted(); }
  std::size_t audio_channels() const { return audio_channels_; }
  /// Reads the first audio_channels() columns of `conditions`.
  Tensor predict(const Tensor& conditions) const;

 private:
  LinearProbe probe_;
  std::size_t audio_channels_ = 0;
};

/// Mean over frames of ||coeff_lip(generated_f) - probe(conditions_f)||.
/// Throws Error when the probe is unfitted, DimensionError on row mismatch.
double sync_distance(const Tensor& generated, const Tensor& conditions, const motion::FactorSpaces& spaces,
                     const SyncProbe& probe);

struct EditPair {
  motion::Factor target;
  Tensor base;    ///< M x d
  Tensor edited;  ///< M x d
};

/// leak[f][g] = mean over edited frames of ||P_g delta|| / ||delta|| for
/// edits targeting f. Rows with no edits are empty. Frames with delta == 0
/// are skipped.
struct LeakageMatrix {
  std::array<std::array<double, 4>, 4> leak{};
  std::array<std::size_t, 4> frames{};  ///< contributing frames per target

  bool has_row(motion::Factor f) const { return frames[motion::index_of(f)] > 0; }
  double diagonal_mean() const;
  double off_diagonal_mean() const;
};

/// Throws Error when `pairs` is empty or every delta is zero.
LeakageMatrix factor_leakage(const std::vector<EditPair>& pairs, const motion::FactorSpaces& spaces);

/// Mean second-difference norm over frames. Throws DimensionError for M < 3.
double smoothness(const Tensor& sequence);

struct SeamStats {
  double max_boundary_jump = 0.0;
  double median_intra_jump = 0.0;
  double ratio = 0.0;  ///< max_boundary_jump / median_intra_jump
};

/// Frame-to-frame jumps ||x_f - x_{f-1}|| pooled over sequences. A jump
/// into frame f is a boundary jump when f is a positive multiple of
/// `segment_frames`.
SeamStats seam_stats(const std::vector<Tensor>& sequences, std::size_t segment_frames);
/// Same, leaving out the jump into frame f of sequence i when skip[i][f] is
/// set (e.g. frames where the driving conditions themselves jump).
SeamStats seam_stats(const std::vector<Tensor>& sequences, std::size_t segment_frames,
                     const std::vector<std::vector<unsigned char>>& skip);

inline constexpr int kMetricsFormatVersion = 1;

/// Named scalar metrics with provenance. CSV columns are
/// format_version,config_hash,seed,n_generated,n_reference followed by the
/// metric names in insertion order.
struct MetricsReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t n_generated = 0;
  std::size_t n_reference = 0;
  std::vector<std::pair<std::string, double>> metrics;

  /// Throws Error on a non-finite value or duplicate name.
  void add(std::string name, double value);
  std::optional<double> get(const std::string& name) const;

  std::string csv_header() const;
  std::string csv_row() const;
  std::string json() const;
  static MetricsReport from_json(const std::string& text);
};

}  // namespace demo::eval
