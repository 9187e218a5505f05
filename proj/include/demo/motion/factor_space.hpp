#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "demo/core/tensor.hpp"

namespace demo::motion {

enum class Factor { kLip = 0, kPose = 1, kEye = 2, kResidual = 3 };

inline constexpr std::array<Factor, 4> kAllFactors = {Factor::kLip, Factor::kPose, Factor::kEye, Factor::kResidual};

std::string_view factor_name(Factor f);
Factor parse_factor(std::string_view name);
inline std::size_t index_of(Factor f) { return static_cast<std::size_t>(f); }

struct FactorDims {
  std::size_t lip = 6;
  std::size_t pose = 6;
  std::size_t eye = 4;
  std::size_t residual = 16;

  std::size_t of(Factor f) const;
  std::size_t total() const { return lip + pose + eye + residual; }
  bool operator==(const FactorDims&) const = default;
};

/// Orthonormal d x k basis spanning one factor.
struct FactorSubspace {
  Factor factor = Factor::kLip;
  Tensor basis;

  std::size_t dim() const { return basis.cols(); }
};

/// Mutually orthogonal factor subspaces of a d-dimensional latent space.
class FactorSpaces {
 public:
  FactorSpaces() = default;

  std::size_t latent_dim() const { return latent_dim_; }
  const FactorDims& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  const FactorSubspace& operator[](Factor f) const { return spaces_[index_of(f)]; }

  /// rows x k coefficients of every row of `latents` in the factor's basis.
  Tensor coefficients(Factor f, const Tensor& latents) const;
  /// Orthogonal projection of every row onto the factor subspace.
  Tensor project(Factor f, const Tensor& latents) const;
  /// d x d projector B B^T.
  Tensor projector(Factor f) const;
  /// Sum over factors of coeffs_f * B_f^T. Each entry is rows x k_f.
  Tensor compose(const std::array<Tensor, 4>& coeffs) const;

 private:
  friend FactorSpaces build_factor_spaces(std::size_t d, const FactorDims& dims, std::uint64_t seed);
  std::size_t latent_dim_ = 0;
  FactorDims dims_;
  std::uint64_t seed_ = 0;
  std::array<FactorSubspace, 4> spaces_;
};

/// Orthonormal bases from the Householder QR of a seeded Gaussian d x d matrix,
/// handed out to lip, pose, eye, residual in that order. Throws CapacityError
/// when the factor dimensions exceed d.
FactorSpaces build_factor_spaces(std::size_t d, const FactorDims& dims, std::uint64_t seed);

}  // namespace demo::motion
