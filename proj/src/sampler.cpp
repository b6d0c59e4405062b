// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/sampler.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "revgen/common.hpp"
#include "revgen/kernels.hpp"
#include "revgen/metrics.hpp"

namespace revgen {

using nlohmann::json;

void SamplerConfig::validate() const {
  REVGEN_CHECK(ss_steps >= 1 && slat_steps >= 1, "SamplerConfig: steps must be >= 1");
  REVGEN_CHECK(alpha >= 0.0, "SamplerConfig: alpha must be >= 0");
  REVGEN_CHECK(view_discard_threshold > 0.0 && view_discard_threshold <= 1.0,
               "SamplerConfig: discard threshold must be in (0,1]");
  REVGEN_CHECK(rvc_start >= 0.0 && rvc_start <= 1.0, "SamplerConfig: rvc_start outside [0,1]");
}

std::vector<double> cfg_velocity(const std::vector<double>& v_cond,
                                 const std::vector<double>& v_uncond, double s) {
  REVGEN_CHECK(v_cond.size() == v_uncond.size(), "cfg_velocity: shape mismatch");
  std::vector<double> out(v_cond.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = v_uncond[i] + s * (v_cond[i] - v_uncond[i]);
  return out;
}

std::vector<double> predict_x0(const std::vector<double>& x_t, double t,
                               const std::vector<double>& v) {
  REVGEN_CHECK(x_t.size() == v.size(), "predict_x0: shape mismatch");
  REVGEN_CHECK(t >= 0.0 && t <= 1.0, "predict_x0: t outside [0,1]");
  std::vector<double> out(x_t.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] - t * v[i];
  return out;
}

std::vector<double> euler_step(const std::vector<double>& x_t, double t, double t_prev,
                               const std::vector<double>& v, const std::vector<double>& dv,
                               double alpha) {
  REVGEN_CHECK(x_t.size() == v.size() && (dv.empty() || dv.size() == v.size()),
               "euler_step: shape mismatch");
  REVGEN_CHECK(t_prev < t && t <= 1.0 && t_prev >= 0.0, "euler_step: invalid schedule (t_prev >= t)");
  const double dt = t - t_prev;
  std::vector<double> out(x_t.size());
  if (dv.empty() || alpha == 0.0) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] - dt * v[i];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] - dt * (v[i] + alpha * dv[i]);
  }
  return out;
}

std::vector<double> linear_schedule(int steps) {
  REVGEN_CHECK(steps >= 1, "linear_schedule: steps must be >= 1");
  std::vector<double> t(steps + 1);
  for (int i = 0; i <= steps; ++i) t[i] = 1.0 - static_cast<double>(i) / steps;
  t.back() = 0.0;
  return t;
}

// ---------------------------------------------------------------------------
// Loss plugins

namespace {

Tensor gray_of(const Tensor& rgb) {
  static const std::vector<double> w = {0.299, 0.587, 0.114};
  return matmul(rgb, Tensor::from_data(3, 1, w));
}

struct SsimL2Plugin : RvcLossPlugin {
  std::string name() const override { return "ssim_l2"; }
  Tensor eval(const Tensor& rendered, const ImageBuffer& target) const override {
    const int h = target.height, w = target.width;
    Tensor rgb = slice_cols(rendered, 0, 3);
    Tensor l_ssim = ssim_loss(gray_of(rgb), target.to_gray(), h, w);
    std::vector<double> tgt((size_t)h * w * 3);
    for (int i = 0; i < h * w; ++i)
      for (int c = 0; c < 3; ++c) tgt[(size_t)i * 3 + c] = target.values[(size_t)i * target.channels + c];
    Tensor d = sub(rgb, Tensor::from_data(h * w, 3, tgt));
    return add(l_ssim, mean_all(mul(d, d)));
  }
};

struct L2Plugin : RvcLossPlugin {
  std::string name() const override { return "l2"; }
  Tensor eval(const Tensor& rendered, const ImageBuffer& target) const override {
    const int h = target.height, w = target.width;
    Tensor rgb = slice_cols(rendered, 0, 3);
    std::vector<double> tgt((size_t)h * w * 3);
    for (int i = 0; i < h * w; ++i)
      for (int c = 0; c < 3; ++c) tgt[(size_t)i * 3 + c] = target.values[(size_t)i * target.channels + c];
    Tensor d = sub(rgb, Tensor::from_data(h * w, 3, tgt));
    return mean_all(mul(d, d));
  }
};

struct ZeroPlugin : RvcLossPlugin {
  std::string name() const override { return "zero"; }
  Tensor eval(const Tensor& rendered, const ImageBuffer&) const override {
    return scale(mean_all(rendered), 0.0);
  }
};

}  // namespace

std::unique_ptr<RvcLossPlugin> make_loss_plugin(const std::string& name) {
  if (name == "ssim_l2") return std::make_unique<SsimL2Plugin>();
  if (name == "l2") return std::make_unique<L2Plugin>();
  if (name == "zero") return std::make_unique<ZeroPlugin>();
  if (name == "lpips" || name == "dreamsim")
    REVGEN_FAIL("loss plugin '" + name + "' requires an external perceptual network (not bundled)");
  REVGEN_FAIL("unknown loss plugin '" + name + "'");
}

// ---------------------------------------------------------------------------
// RVC

namespace {

// Scatter maps from per-voxel rows into the dense grids.
void build_scatter_maps(const SparseStructure& pos,
                        std::shared_ptr<std::vector<int64_t>>& map1,
                        std::shared_ptr<std::vector<int64_t>>& map3) {
  const int R = pos.resolution;
  const size_t cells = (size_t)R * R * R;
  map1 = std::make_shared<std::vector<int64_t>>(cells, -1);
  map3 = std::make_shared<std::vector<int64_t>>(cells * 3, -1);
  for (int i = 0; i < pos.count(); ++i) {
    const size_t flat = pos.flat(i);
    (*map1)[flat] = i;
    for (int c = 0; c < 3; ++c) (*map3)[flat * 3 + c] = (int64_t)i * 3 + c;
  }
}

struct DecodedGrids {
  Tensor density;  // [R^3,1]
  Tensor pcolor;   // [R^3,3]
};

DecodedGrids decode_to_grids(const Tensor& x0_hat, const SLATCodec& codec,
                             const SparseStructure& pos, const RenderConfig& rc) {
  Tensor attrs = codec.decode(x0_hat);           // [V,4] (rgb sigmoid, logit raw)
  Tensor rgb = slice_cols(attrs, 0, 3);
  Tensor logit = slice_cols(attrs, 3, 4);
  Tensor dens_v = scale(sigmoid(logit), rc.density_scale);  // [V,1]
  Tensor pcol_v = mul_bcast_col(rgb, dens_v);               // [V,3]
  std::shared_ptr<std::vector<int64_t>> map1, map3;
  build_scatter_maps(pos, map1, map3);
  const int R = pos.resolution;
  DecodedGrids g;
  g.density = gather_map(dens_v, map1, R * R * R, 1);
  g.pcolor = gather_map(pcol_v, map3, R * R * R, 3);
  return g;
}

}  // namespace

Tensor rvc_render_loss(const Tensor& x0_hat, const SLATCodec& codec,
                       const SparseStructure& positions, const Camera& camera,
                       const ImageBuffer& target, const RvcLossPlugin& plugin,
                       const RenderConfig& rc) {
  DecodedGrids g = decode_to_grids(x0_hat, codec, positions, rc);
  Tensor img = render_diff(g.density, g.pcolor, positions.resolution, camera, target.width, rc);
  return plugin.eval(img, target);
}

std::vector<double> rvc_delta(const std::vector<double>& x_t, double t,
                              const std::vector<double>& v, const std::vector<Camera>& cameras,
                              const ViewSet& inputs, const SLATCodec& codec,
                              const SparseStructure& positions, const SamplerConfig& cfg,
                              RvcReport* report) {
  REVGEN_CHECK(cameras.size() == inputs.images.size(),
               "rvc_delta: camera count must match input count");
  auto plugin = make_loss_plugin(cfg.loss_plugin);

  const int vcount = positions.count();
  const int dim = static_cast<int>(x_t.size()) / std::max(1, vcount);
  Tensor x0_hat = Tensor::from_data(vcount, dim, predict_x0(x_t, t, v), true);

  DecodedGrids grids = decode_to_grids(x0_hat, codec, positions, cfg.render);
  std::vector<Tensor> losses;
  for (size_t k = 0; k < cameras.size(); ++k) {
    Tensor img = render_diff(grids.density, grids.pcolor, positions.resolution, cameras[k],
                             inputs.images[k].width, cfg.render);
    losses.push_back(plugin->eval(img, inputs.images[k]));
  }

  RvcReport rep;
  rep.per_view_loss.resize(losses.size());
  rep.retained.resize(losses.size());
  for (size_t k = 0; k < losses.size(); ++k) {
    rep.per_view_loss[k] = losses[k].item();
    rep.retained[k] = rep.per_view_loss[k] <= cfg.view_discard_threshold;
    rep.retained_count += rep.retained[k];
  }

  std::vector<double> delta(x_t.size(), 0.0);
  if (rep.retained_count == 0) {
    rep.all_discarded = true;
  } else {
    Tensor total;
    for (size_t k = 0; k < losses.size(); ++k) {
      if (!rep.retained[k]) continue;
      total = total.defined() ? add(total, losses[k]) : losses[k];
    }
    total = scale(total, 1.0 / rep.retained_count);
    total.backward();
    const auto& g = x0_hat.grad();
    for (size_t i = 0; i < delta.size(); ++i) delta[i] = -t * g[i];
  }
  double nrm = 0;
  for (double d : delta) nrm += d * d;
  rep.delta_norm = std::sqrt(nrm);
  if (report) *report = rep;
  return delta;
}

// ---------------------------------------------------------------------------
// Trajectory

void Trajectory::write_jsonl(const std::string& path) const {
  std::ofstream f(path);
  REVGEN_CHECK(f.good(), "Trajectory::write_jsonl: cannot open '" + path + "'");
  for (const auto& s : steps) {
    json j;
    j["stage"] = s.stage;
    j["t"] = s.t;
    j["state_norm"] = s.state_norm;
    j["delta_norm"] = s.delta_norm;
    if (s.retained_views >= 0) j["retained_views"] = s.retained_views;
    if (!s.per_view_loss.empty()) j["per_view_loss"] = s.per_view_loss;
    if (!s.warning.empty()) j["warning"] = s.warning;
    f << j.dump() << "\n";
  }
  for (const auto& w : warnings) {
    json j;
    j["warning"] = w;
    f << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Generate

namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

GenerateResult generate(const ViewSet& views, const GenerateModels& models,
                        const SamplerConfig& cfg, uint64_t seed) {
  cfg.validate();
  REVGEN_CHECK(models.encoder && models.ss_flow && models.slat_flow && models.codec,
               "generate: missing models");
  REVGEN_CHECK(views.count() >= 1, "generate: need at least one view");

  GenerateResult result;
  Trajectory& traj = result.trajectory;

  FeatureStack features = models.encoder->encode(views.images);

  // --- Stage 1: sparse structure.
  const ConditionNet& ss_cond_net = models.ss_flow->cond_net();
  Tensor t_g = ss_cond_net.global_condition(features);
  Tensor ss_cond = cfg.ggc_enabled ? t_g : ss_cond_net.null_condition();
  Tensor ss_null = ss_cond_net.null_condition();

  const int R = models.ss_flow->config().ss_resolution;
  RngStream ss_noise(seed, "generate/ss-noise");
  std::vector<double> x = ss_noise.normal_vec((size_t)R * R * R);
  {
    const auto ts = linear_schedule(cfg.ss_steps);
    for (int i = 0; i < cfg.ss_steps; ++i) {
      std::vector<double> vel;
      if (cfg.ggc_enabled) {
        const auto vc = models.ss_flow->velocity_plain(x, ts[i], ss_cond);
        const auto vu = models.ss_flow->velocity_plain(x, ts[i], ss_null);
        vel = cfg_velocity(vc, vu, cfg.ss_cfg);
      } else {
        vel = models.ss_flow->velocity_plain(x, ts[i], ss_null);
      }
      x = euler_step(x, ts[i], ts[i + 1], vel, {}, 0.0);
      traj.steps.push_back({"ss", ts[i + 1], l2_norm(x), 0.0, -1, {}, ""});
    }
  }
  Array ss_grid;
  ss_grid.shape = {R, R, R};
  ss_grid.data = x;
  try {
    result.structure = sparsify(ss_grid, 0.0);
  } catch (const Error& e) {
    throw Error(std::string("generate: coarse stage produced an empty structure (") + e.what() +
                ")");
  }

  // --- Stage 2 conditions.
  const ConditionNet& slat_cond_net = models.slat_flow->cond_net();
  std::vector<Tensor> slat_conds;
  if (cfg.pvc_enabled) {
    slat_conds = slat_cond_net.per_view_conditions(features);
  } else {
    slat_conds = {t_g};  // single repeated global condition
  }
  std::vector<Tensor> slat_null = {slat_cond_net.null_condition()};

  const int D = models.slat_flow->config().latent_dim;
  const SparseStructure& pos = result.structure;

  auto sample_slat = [&](const std::string& label, const std::string& stage, bool with_rvc,
                         const std::vector<Camera>* cameras) {
    RngStream noise(seed, "generate/" + label);
    std::vector<double> latents = noise.normal_vec((size_t)pos.count() * D);
    const auto ts = linear_schedule(cfg.slat_steps);
    for (int i = 0; i < cfg.slat_steps; ++i) {
      const auto vc = models.slat_flow->velocity_plain(latents, pos, ts[i], slat_conds);
      const auto vu = models.slat_flow->velocity_plain(latents, pos, ts[i], slat_null);
      auto vel = cfg_velocity(vc, vu, cfg.slat_cfg);
      std::vector<double> dv;
      TrajectoryStep step{stage, ts[i + 1], 0.0, 0.0, -1, {}, ""};
      if (with_rvc && cfg.alpha > 0 && ts[i] < cfg.rvc_start && cameras && !cameras->empty()) {
        RvcReport rep;
        dv = rvc_delta(latents, ts[i], vel, *cameras, views, *models.codec, pos, cfg, &rep);
        step.delta_norm = rep.delta_norm;
        step.retained_views = rep.retained_count;
        step.per_view_loss = rep.per_view_loss;
        if (rep.all_discarded) step.warning = "rvc: all views discarded";
      }
      latents = euler_step(latents, ts[i], ts[i + 1], vel, dv, cfg.alpha);
      step.state_norm = l2_norm(latents);
      traj.steps.push_back(step);
    }
    return latents;
  };

  // --- Preliminary SLAT pass (no RVC) and pose refinement.
  {
    auto latents = sample_slat("slat-prelim", "slat-prelim", false, nullptr);
    StructuredLatent prelim;
    prelim.positions = pos;
    prelim.dim = D;
    prelim.latents = latents;
    result.preliminary = models.codec->decode_object(prelim);
  }

  std::vector<Camera> rvc_cameras;
  if (cfg.rvc_enabled && cfg.alpha > 0) {
    RefineConfig rc;
    rc.seed = seed;
    result.poses = refine_all(views, result.preliminary, *models.encoder, rc);
    for (const auto& est : result.poses) {
      if (est.camera.has_value()) rvc_cameras.push_back(*est.camera);
    }
    if (rvc_cameras.size() != views.images.size()) {
      traj.warnings.push_back("pose refinement failed; rvc disabled for missing views");
      rvc_cameras.clear();
    } else {
      for (const auto& est : result.poses)
        if (est.status == PoseStatus::kFallback)
          traj.warnings.push_back("pose refinement fell back to the coarse pose for a view");
    }
  } else {
    RefineConfig rc;
    rc.seed = seed;
    result.poses = refine_all(views, result.preliminary, *models.encoder, rc);
  }

  // --- Final SLAT pass with RVC.
  {
    auto latents = sample_slat("slat-final", "slat-final", cfg.rvc_enabled,
                               rvc_cameras.empty() ? nullptr : &rvc_cameras);
    StructuredLatent fin;
    fin.positions = pos;
    fin.dim = D;
    fin.latents = latents;
    result.object = models.codec->decode_object(fin);
  }
  return result;
}

}  // namespace revgen
