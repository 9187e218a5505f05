#include "demo/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "demo/core/error.hpp"

namespace demo::eval {

using motion::Factor;
using motion::index_of;

namespace {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

GaussianSummary GaussianSummary::fit(const Tensor& x) {
  if (x.ndim() != 2 || x.rows() < 2) throw DimensionError("GaussianSummary::fit: need at least 2 sample rows");
  const Eigen::MatrixXd m = to_eigen(x);
  const Eigen::RowVectorXd mu = m.colwise().mean();
  const Eigen::MatrixXd c = m.rowwise() - mu;
  const Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  return {from_eigen(mu), from_eigen(cov)};
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim() || a.covariance.shape() != Shape{a.dim(), a.dim()} ||
      b.covariance.shape() != Shape{b.dim(), b.dim()}) {
    throw DimensionError("frechet_distance: dimension mismatch");
  }
  const Eigen::MatrixXd sa = to_eigen(a.covariance), sb = to_eigen(b.covariance);
  const Eigen::MatrixXd ra = sym_sqrt(sa);
  const Eigen::MatrixXd cross = sym_sqrt(ra * sb * ra);
  double mean = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) mean += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  return mean + sa.trace() + sb.trace() - 2.0 * cross.trace();
}

SyncProbe SyncProbe::fit(const Tensor& audio, const Tensor& lip) {
  SyncProbe p;
  p.probe_ = LinearProbe::fit(audio, lip, 1e-9);
  p.audio_channels_ = audio.cols();
  return p;
}

Tensor SyncProbe::predict(const Tensor& conditions) const {
  if (!fitted()) throw Error("sync probe is not fitted");
  if (conditions.cols() < audio_channels_) throw DimensionError("sync probe: conditions narrower than audio block");
  Tensor audio({conditions.rows(), audio_channels_});
  for (std::size_t r = 0; r < conditions.rows(); ++r)
    std::copy_n(conditions.row(r).begin(), audio_channels_, audio.row(r).begin());
  return probe_.predict(audio);
}

double sync_distance(const Tensor& generated, const Tensor& conditions, const motion::FactorSpaces& spaces,
                     const SyncProbe& probe) {
  if (!probe.fitted()) throw Error("sync_distance: probe not fitted");
  if (generated.rows() != conditions.rows()) throw DimensionError("sync_distance: frame count mismatch");
  const Tensor lip = spaces.coefficients(Factor::kLip, generated);
  const Tensor want = probe.predict(conditions);
  double s = 0.0;
  for (std::size_t r = 0; r < lip.rows(); ++r) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < lip.cols(); ++j) d2 += (lip(r, j) - want(r, j)) * (lip(r, j) - want(r, j));
    s += std::sqrt(d2);
  }
  return s / static_cast<double>(lip.rows());
}

double LeakageMatrix::diagonal_mean() const {
  double s = 0.0;
  int n = 0;
  for (std::size_t f = 0; f < 4; ++f) {
    if (frames[f] == 0) continue;
    s += leak[f][f];
    ++n;
  }
  return n ? s / n : 0.0;
}

double LeakageMatrix::off_diagonal_mean() const {
  double s = 0.0;
  int n = 0;
  for (std::size_t f = 0; f < 4; ++f) {
    if (frames[f] == 0) continue;
    for (std::size_t g = 0; g < 4; ++g) {
      if (g == f) continue;
      s += leak[f][g];
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

LeakageMatrix factor_leakage(const std::vector<EditPair>& pairs, const motion::FactorSpaces& spaces) {
  if (pairs.empty()) throw Error("factor_leakage: no edit pairs");
  LeakageMatrix m;
  for (const auto& p : pairs) {
    require_same_shape(p.base, p.edited, "factor_leakage");
    Tensor delta(p.base.shape());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = p.edited[i] - p.base[i];
    std::array<Tensor, 4> coeffs;
    for (Factor g : motion::kAllFactors) coeffs[index_of(g)] = spaces.coefficients(g, delta);
    const std::size_t f = index_of(p.target);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const double total = row_norm(delta.row(r));
      if (total == 0.0) continue;
      // Orthonormal bases: ||P_g delta|| is the norm of the coefficients.
      for (std::size_t g = 0; g < 4; ++g) m.leak[f][g] += row_norm(coeffs[g].row(r)) / total;
      ++m.frames[f];
    }
  }
  std::size_t any = 0;
  for (std::size_t f = 0; f < 4; ++f) {
    any += m.frames[f];
    if (m.frames[f] == 0) continue;
    for (auto& v : m.leak[f]) v /= static_cast<double>(m.frames[f]);
  }
  if (any == 0) throw Error("factor_leakage: every edit delta is zero");
  return m;
}

double smoothness(const Tensor& x) {
  if (x.ndim() != 2 || x.rows() < 3) throw DimensionError("smoothness: need at least 3 frames");
  double s = 0.0;
  for (std::size_t f = 1; f + 1 < x.rows(); ++f) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double v = x(f + 1, j) - 2.0 * x(f, j) + x(f - 1, j);
      d2 += v * v;
    }
    s += std::sqrt(d2);
  }
  return s / static_cast<double>(x.rows() - 2);
}

SeamStats seam_stats(const std::vector<Tensor>& sequences, std::size_t segment_frames) {
  return seam_stats(sequences, segment_frames, {});
}

SeamStats seam_stats(const std::vector<Tensor>& sequences, std::size_t segment_frames,
                     const std::vector<std::vector<unsigned char>>& skip) {
  if (segment_frames == 0) throw ConfigError("seam_stats: segment_frames must be positive");
  if (!skip.empty() && skip.size() != sequences.size()) throw DimensionError("seam_stats: one skip mask per sequence");
  std::vector<double> boundary, intra;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& x = sequences[i];
    if (!skip.empty() && skip[i].size() != x.rows()) throw DimensionError("seam_stats: skip mask length");
    for (std::size_t f = 1; f < x.rows(); ++f) {
      if (!skip.empty() && skip[i][f]) continue;
      double d2 = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) d2 += (x(f, j) - x(f - 1, j)) * (x(f, j) - x(f - 1, j));
      (f % segment_frames == 0 ? boundary : intra).push_back(std::sqrt(d2));
    }
  }
  if (boundary.empty() || intra.empty()) throw DimensionError("seam_stats: need at least two segments");
  SeamStats s;
  s.max_boundary_jump = *std::max_element(boundary.begin(), boundary.end());
  const std::size_t mid = intra.size() / 2;
  std::nth_element(intra.begin(), intra.begin() + mid, intra.end());
  double med = intra[mid];
  if (intra.size() % 2 == 0) med = 0.5 * (med + *std::max_element(intra.begin(), intra.begin() + mid));
  s.median_intra_jump = med;
  s.ratio = s.max_boundary_jump / med;
  return s;
}

void MetricsReport::add(std::string name, double value) {
  if (!std::isfinite(value)) throw Error("metric '" + name + "' is not finite");
  if (get(name)) throw Error("duplicate metric '" + name + "'");
  metrics.emplace_back(std::move(name), value);
}

std::optional<double> MetricsReport::get(const std::string& name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  return std::nullopt;
}

std::string MetricsReport::csv_header() const {
  std::string h = "format_version,config_hash,seed,n_generated,n_reference";
  for (const auto& [k, v] : metrics) h += "," + k;
  return h;
}

std::string MetricsReport::csv_row() const {
  std::string r = std::to_string(kMetricsFormatVersion) + "," + config_hash + "," + std::to_string(seed) + "," +
                  std::to_string(n_generated) + "," + std::to_string(n_reference);
  for (const auto& [k, v] : metrics) r += "," + fmt(v);
  return r;
}

std::string MetricsReport::json() const {
  nlohmann::ordered_json j;
  j["format_version"] = kMetricsFormatVersion;
  j["provenance"] = {{"config_hash", config_hash},
                     {"seed", seed},
                     {"n_generated", n_generated},
                     {"n_reference", n_reference}};
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["metrics"] = m;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics json: ") + e.what());
  }
  if (j.value("format_version", -1) != kMetricsFormatVersion) throw FormatError("metrics json: unsupported version");
  MetricsReport r;
  const auto& p = j.at("provenance");
  r.config_hash = p.at("config_hash");
  r.seed = p.at("seed");
  r.n_generated = p.at("n_generated");
  r.n_reference = p.at("n_reference");
  for (const auto& [k, v] : j.at("metrics").items()) r.add(k, v.get<double>());
  return r;
}

}  // namespace demo::eval
