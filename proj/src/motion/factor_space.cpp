#include "demo/motion/factor_space.hpp"

#include <string>

#include "demo/core/error.hpp"
#include "demo/core/linalg.hpp"
#include "demo/core/numeric.hpp"
#include "demo/core/rng.hpp"

namespace demo::motion {

std::string_view factor_name(Factor f) {
  switch (f) {
    case Factor::kLip: return "lip";
    case Factor::kPose: return "pose";
    case Factor::kEye: return "eye";
    case Factor::kResidual: return "residual";
  }
  return "?";
}

Factor parse_factor(std::string_view name) {
  for (auto f : kAllFactors)
    if (factor_name(f) == name) return f;
  throw ConfigError("unknown motion factor '" + std::string(name) + "'");
}

std::size_t FactorDims::of(Factor f) const {
  switch (f) {
    case Factor::kLip: return lip;
    case Factor::kPose: return pose;
    case Factor::kEye: return eye;
    case Factor::kResidual: return residual;
  }
  return 0;
}

FactorSpaces build_factor_spaces(std::size_t d, const FactorDims& dims, std::uint64_t seed) {
  if (dims.total() > d) {
    throw CapacityError("factor dimensions sum to " + std::to_string(dims.total()) + " > latent dim " +
                        std::to_string(d));
  }
  for (auto f : kAllFactors)
    if (dims.of(f) == 0) throw CapacityError("factor '" + std::string(factor_name(f)) + "' has zero dimensions");
  SeededRng rng(seed);
  const Eigen::MatrixXd gauss = to_eigen(rng.normal_tensor({d, d}));
  const Eigen::MatrixXd q = gauss.householderQr().householderQ() * Eigen::MatrixXd::Identity(
                                                                        static_cast<Eigen::Index>(d),
                                                                        static_cast<Eigen::Index>(d));
  FactorSpaces fs;
  fs.latent_dim_ = d;
  fs.dims_ = dims;
  fs.seed_ = seed;
  Eigen::Index col = 0;
  for (auto f : kAllFactors) {
    const auto k = static_cast<Eigen::Index>(dims.of(f));
    fs.spaces_[index_of(f)].factor = f;
    fs.spaces_[index_of(f)].basis = from_eigen(q.middleCols(col, k));
    col += k;
  }
  return fs;
}

Tensor FactorSpaces::coefficients(Factor f, const Tensor& latents) const {
  if (latents.cols() != latent_dim_) throw DimensionError("coefficients: latent width mismatch");
  return matmul(latents, (*this)[f].basis);
}

Tensor FactorSpaces::project(Factor f, const Tensor& latents) const {
  return matmul(coefficients(f, latents), transpose((*this)[f].basis));
}

Tensor FactorSpaces::projector(Factor f) const {
  const auto& b = (*this)[f].basis;
  return matmul(b, transpose(b));
}

Tensor FactorSpaces::compose(const std::array<Tensor, 4>& coeffs) const {
  const std::size_t rows = coeffs[0].rows();
  Tensor out({rows, latent_dim_});
  for (auto f : kAllFactors) {
    const auto& c = coeffs[index_of(f)];
    if (c.rows() != rows || c.cols() != dims_.of(f)) throw DimensionError("compose: coefficient shape mismatch");
    const Tensor part = matmul(c, transpose((*this)[f].basis));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += part[i];
  }
  return out;
}

}  // namespace demo::motion
