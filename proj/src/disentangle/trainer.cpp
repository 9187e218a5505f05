#include "demo/disentangle/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "demo/core/error.hpp"
#include "demo/core/linalg.hpp"
#include "demo/core/ops.hpp"
#include "demo/core/optim.hpp"
#include "demo/disentangle/losses.hpp"

namespace demo::disentangle {

using motion::Factor;
using motion::index_of;

namespace {

Tensor gather(const Tensor& src, const std::vector<std::size_t>& rows) {
  const std::size_t c = src.cols();
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(src.row(rows[i]).begin(), c, out.row(i).begin());
  return out;
}

Tensor half(const Tensor& t, bool second) {
  const std::size_t n = t.rows() / 2;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = second ? n + i : i;
  return gather(t, idx);
}

double heldout_r2(const Tensor& features, const Tensor& targets) {
  const auto probe = LinearProbe::fit(half(features, false), half(targets, false), 1e-9);
  const Tensor test = half(features, true);
  return r_squared(probe.predict(test), half(targets, true));
}

double gap(const std::array<double, 4>& r2, Factor same) {
  double cross = -1e300;
  for (Factor f : {Factor::kLip, Factor::kPose, Factor::kEye}) {
    if (f != same) cross = std::max(cross, r2[index_of(f)]);
  }
  return r2[index_of(same)] - cross;
}

void check_finite(const LossRecord& r) {
  const std::pair<const char*, double> terms[] = {{"l_mot", r.mot}, {"l_eye", r.eye}, {"l_pose", r.pose},
                                                  {"l_a2v", r.a2v}, {"l_v2a", r.v2a}, {"l_kl", r.kl}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw DivergenceError("disentangler diverged at step " + std::to_string(r.step) + ": " + name + " = " +
                            std::to_string(v));
    }
  }
}

}  // namespace

FramePool build_frame_pool(const motion::MotionWorld& world, std::size_t sequences, std::size_t frames,
                           std::uint64_t seed) {
  if (sequences == 0 || frames == 0) throw ConfigError("frame pool must be non-empty");
  const std::size_t n = sequences * frames;
  const auto& dims = world.config().dims;
  const std::size_t A = world.config().signal.audio_channels;
  FramePool pool;
  pool.latents = Tensor({n, world.latent_dim()});
  for (Factor f : motion::kAllFactors) pool.coeffs[index_of(f)] = Tensor({n, dims.of(f)});
  pool.audio = Tensor({n, A});
  pool.pose = Tensor({n, 6});
  SeededRng seeds(seed);
  for (std::size_t s = 0; s < sequences; ++s) {
    const auto [seq, cond] = motion::synthesize_sequence(frames, world, seeds.next_u64());
    const Tensor audio = cond.audio();
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t r = s * frames + f;
      std::copy_n(seq.latents.row(f).begin(), pool.latents.cols(), pool.latents.row(r).begin());
      for (std::size_t k = 0; k < 4; ++k)
        std::copy_n(seq.coeffs[k].row(f).begin(), seq.coeffs[k].cols(), pool.coeffs[k].row(r).begin());
      std::copy_n(audio.row(f).begin(), A, pool.audio.row(r).begin());
      const auto p = motion::pose_ground_truth(seq.coeffs[index_of(Factor::kPose)].row(f)).flat();
      std::copy(p.begin(), p.end(), pool.pose.row(r).begin());
    }
  }
  return pool;
}

TrainResult train_disentangler(const TrainerConfig& cfg, const motion::MotionWorld& world) {
  EncoderConfig enc = cfg.encoder;
  enc.latent_dim = world.latent_dim();
  enc.audio_dim = world.config().signal.audio_channels;
  enc.variational = cfg.objective == Objective::kVae;
  if (cfg.batch < 2) throw ConfigError("disentangler batch must be at least 2 (in-batch negatives)");

  SeededRng root(cfg.seed);
  TrainResult out{EncoderStack(enc, root.fork(1).next_u64()), {}};
  auto& stack = out.stack;
  if (cfg.steps == 0) return out;

  const FramePool pool = build_frame_pool(world, cfg.pool_sequences, cfg.pool_frames, root.fork(2).next_u64());
  SeededRng draw = root.fork(3);
  Adam adam(stack.params().all(), AdamConfig{.lr = cfg.lr});
  const auto& ex = world.extractors();
  out.history.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> i1(cfg.batch), i2(cfg.batch);
    for (auto& i : i1) i = draw.below(pool.size());
    for (auto& i : i2) i = draw.below(pool.size());
    const Tensor x1 = gather(pool.latents, i1);

    stack.params().zero_grad();
    Tape tape;
    LossRecord rec;
    rec.step = step;
    Var total;
    try {
      if (cfg.objective == Objective::kFcme) {
        const Tensor x2 = gather(pool.latents, i2);
        const Tensor xa = motion::composite_anchor(x1, x2, world.spaces());
        const Var m1 = stack.motion(tape, tape.constant(x1));
        const Var m2 = stack.motion(tape, tape.constant(x2));
        const Var ma = stack.motion(tape, tape.constant(xa));

        const Var l_mot = motion_recon_loss(stack.decode(tape, m1), x1, ex);
        const Var l_eye =
            eye_contrastive_loss(stack.eye(tape, m1), stack.eye(tape, m2), stack.eye(tape, ma), cfg.temperature);
        const Var l_pose = pose_loss(stack.pose(tape, m1), gather(pool.pose, i1));
        const Var fv = stack.lip(tape, m1);
        const Var fa = stack.audio(tape, tape.constant(gather(pool.audio, i1)));
        const Var l_a2v = infonce(fa, fv, cfg.temperature);
        const Var l_v2a = infonce(fv, fa, cfg.temperature);
        total = ops::add(ops::add(ops::add(l_mot, l_eye), ops::add(l_pose, l_a2v)), l_v2a);
        rec.mot = l_mot.value().item();
        rec.eye = l_eye.value().item();
        rec.pose = l_pose.value().item();
        rec.a2v = l_a2v.value().item();
        rec.v2a = l_v2a.value().item();
      } else {
        // Reparameterized Gaussian encoder; the KL is to N(0, I), averaged over rows.
        const Var mu = stack.motion(tape, tape.constant(x1));
        const Var log_std = stack.log_std(tape);
        const Var sd = ops::exp(log_std);
        const Tensor eps = draw.normal_tensor(mu.shape());
        const Var z = ops::add(mu, ops::mul_row(tape.constant(eps), sd));
        const Var l_mot = motion_recon_loss(stack.decode(tape, z), x1, ex);
        const double n = static_cast<double>(mu.rows());
        // 0.5 * sum(mu^2 + sd^2 - 1 - 2 log sd) per row.
        const Var mu_term = ops::scale(ops::sum(ops::mul(mu, mu)), 0.5 / n);
        const Var var_term = ops::scale(ops::sum(ops::sub(ops::mul(sd, sd), ops::scale(log_std, 2.0))), 0.5);
        const Var l_kl =
            ops::add(mu_term, ops::add(var_term, tape.constant(Tensor::scalar(-0.5 * double(mu.cols())))));
        total = ops::add(l_mot, ops::scale(l_kl, cfg.vae_beta));
        rec.mot = l_mot.value().item();
        rec.kl = l_kl.value().item();
      }
      rec.total = total.value().item();
      check_finite(rec);
      tape.backward(total);
      adam.step();
    } catch (const NonFiniteError& e) {
      throw DivergenceError("disentangler diverged at step " + std::to_string(step) + ": " + e.what());
    }
    out.history.push_back(rec);
  }
  return out;
}

void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& history) {
  os << "step,l_mot,l_eye,l_pose,l_a2v,l_v2a,l_kl,total\n" << std::setprecision(17);
  for (const auto& r : history) {
    os << r.step << ',' << r.mot << ',' << r.eye << ',' << r.pose << ',' << r.a2v << ',' << r.v2a << ',' << r.kl
       << ',' << r.total << '\n';
  }
}

double ProbeReport::eye_gap() const { return gap(eye, Factor::kEye); }
double ProbeReport::lip_gap() const { return gap(lip, Factor::kLip); }

ProbeReport probe_heads(const EncoderStack& stack, const FramePool& heldout) {
  if (heldout.size() < 4) throw ConfigError("probe_heads: need at least 4 held-out frames");
  const Tensor fe = stack.eye_features(heldout.latents);
  const Tensor fl = stack.lip_features(heldout.latents);
  const Tensor fp = stack.pose_params(heldout.latents);
  ProbeReport rep;
  for (std::size_t k = 0; k < 4; ++k) {
    rep.eye[k] = heldout_r2(fe, heldout.coeffs[k]);
    rep.lip[k] = heldout_r2(fl, heldout.coeffs[k]);
    rep.pose[k] = heldout_r2(fp, heldout.coeffs[k]);
  }
  return rep;
}

}  // namespace demo::disentangle
