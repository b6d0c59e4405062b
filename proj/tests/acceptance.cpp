// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Criteria 1-4 and 8-13 are exact math / oracle
// checks and run in minutes; criteria 5-7 train the full pipeline on the toy
// corpus first (several CPU-hours single-core).
//
// Environment:
//   REVGEN_ACCEPT_DIR    work directory (default: ./acceptance_work)
//   REVGEN_ACCEPT_FAST   "1" skips the training-dependent criteria 5-7
//                        (they report SKIP and the suite fails, since the
//                        gate requires all criteria; use for smoke runs only)

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "revgen/common.hpp"
#include "revgen/pipeline.hpp"

using namespace revgen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
Clock::time_point g_suite_start;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::cout << "[" << (pass ? "PASS" : "FAIL") << "] criterion " << idx << ": " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++g_failures;
}

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// --------------------------------------------------------------------------
// 1. Velocity-compensation correctness: analytic dv vs central differences
//    through codec-decode + render + loss on a 4^3 grid, D=4, one 32x32 view.

void criterion_1() {
  const auto t0 = Clock::now();
  SLATCodec codec(SLATCodecConfig{.latent_dim = 4, .hidden = 16}, 11);
  RngStream pos_rng(12, "pos");
  SparseStructure pos;
  pos.resolution = 4;
  std::vector<uint8_t> used(64, 0);
  while (pos.count() < 10) {
    int x = static_cast<int>(pos_rng.uniform_index(4)), y = static_cast<int>(pos_rng.uniform_index(4)),
        z = static_cast<int>(pos_rng.uniform_index(4));
    const size_t f = ((size_t)z * 4 + y) * 4 + x;
    if (used[f]) continue;
    used[f] = 1;
    pos.coords.push_back({x, y, z});
  }
  RngStream rng(13, "x");
  std::vector<double> x = rng.normal_vec((size_t)pos.count() * 4);
  std::vector<double> v = rng.normal_vec(x.size());
  const double t = 0.4;

  SamplerConfig cfg;
  Camera cam = sample_cameras(1, CameraMode::kUniform, 14, 32)[0];
  ViewSet inputs;
  {
    StructuredLatent z;
    z.positions = pos;
    z.dim = 4;
    z.latents = predict_x0(x, t, v);
    ImageBuffer self_view = render(codec.decode_object(z), cam, 32, cfg.render).rgb;
    ImageBuffer other = render(make_object(15, 2, 4), cam, 32, cfg.render).rgb;
    for (size_t i = 0; i < self_view.values.size(); ++i)
      self_view.values[i] = 0.7 * self_view.values[i] + 0.3 * other.values[i];
    inputs.images.push_back(self_view);
  }
  std::vector<Camera> cams = {cam};
  RvcReport rep;
  auto dv = rvc_delta(x, t, v, cams, inputs, codec, pos, cfg, &rep);

  auto plugin = make_loss_plugin(cfg.loss_plugin);
  const auto x0 = predict_x0(x, t, v);
  auto loss_at = [&](const std::vector<double>& x0v) {
    Tensor x0t = Tensor::from_data(pos.count(), 4, x0v);
    return rvc_render_loss(x0t, codec, pos, cam, inputs.images[0], *plugin, cfg.render).item();
  };
  const double h = 1e-3;
  double num = 0, den = 0;
  for (size_t i = 0; i < x0.size(); ++i) {
    auto probe = x0;
    probe[i] = x0[i] + h;
    const double fp = loss_at(probe);
    probe[i] = x0[i] - h;
    const double fm = loss_at(probe);
    const double fd = -t * (fp - fm) / (2 * h);
    num += (fd - dv[i]) * (fd - dv[i]);
    den += fd * fd;
  }
  const double rel = std::sqrt(num) / std::sqrt(den);
  const double secs = elapsed_s(t0);
  report(1, "velocity compensation matches finite differences",
         rep.retained_count == 1 && rel < 1e-3 && secs < 60.0,
         "rel_err=" + fmt(rel, 7) + ", " + fmt(secs, 1) + "s");
}

// --------------------------------------------------------------------------
// 2. Euler / rectified-flow exactness.

void criterion_2() {
  RngStream rng(21, "x");
  bool ok = true;
  std::ostringstream detail;
  double worst_step = 0, worst_x0 = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x0 = rng.normal_vec(32), eps = rng.normal_vec(32), vel(32);
    for (int i = 0; i < 32; ++i) vel[i] = eps[i] - x0[i];
    auto rec = euler_step(eps, 1.0, 0.0, vel, {}, 0.0);
    for (int i = 0; i < 32; ++i) worst_step = std::max(worst_step, std::abs(rec[i] - x0[i]));
    for (double t : {0.999, 0.7, 0.25, 1e-9}) {
      std::vector<double> xt(32);
      for (int i = 0; i < 32; ++i) xt[i] = x0[i] + t * vel[i];
      auto back = predict_x0(xt, t, vel);
      for (int i = 0; i < 32; ++i) worst_x0 = std::max(worst_x0, std::abs(back[i] - x0[i]));
    }
  }
  ok = worst_step < 1e-6 && worst_x0 < 1e-9;
  report(2, "one-step exactness and x0-hat identity", ok,
         "step_err=" + fmt(worst_step, 12) + ", x0_err=" + fmt(worst_x0, 12));
}

// --------------------------------------------------------------------------
// 3. CFM optimum and zero-model expectation.

void criterion_3() {
  RngStream rng(31, "cfm");
  std::vector<double> x0 = rng.normal_vec(16);
  double worst = 0;
  for (int i = 0; i < 64; ++i) {
    const double t = rng.uniform();
    std::vector<double> eps = rng.normal_vec(16), xt(16), oracle(16);
    for (int k = 0; k < 16; ++k) {
      xt[k] = (1 - t) * x0[k] + t * eps[k];
      oracle[k] = eps[k] - x0[k];
    }
    // Feed the oracle output through the loss: must be exactly zero.
    Tensor v = Tensor::from_data(16, 1, oracle);
    Tensor target = Tensor::from_data(16, 1, oracle);
    Tensor d = sub(v, target);
    worst = std::max(worst, mean_all(mul(d, d)).item());
  }
  // Zero model on x0 = 0 -> expected loss 1.
  std::vector<double> zeros(8, 0.0);
  RngStream rng2(32, "cfm0");
  double acc = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Tensor loss = cfm_loss(
        [&](const Tensor& xt, double) { return Tensor::zeros(xt.rows(), xt.cols()); }, zeros, 8,
        1, rng2);
    acc += loss.item();
  }
  acc /= draws;
  const bool ok = worst == 0.0 && std::abs(acc - 1.0) < 0.05;
  report(3, "CFM optimum is zero; zero-model expectation is 1", ok,
         "oracle_loss=" + fmt(worst, 12) + ", zero_model=" + fmt(acc, 4));
}

// --------------------------------------------------------------------------
// 4. CFG identities.

void criterion_4() {
  RngStream rng(41, "cfg");
  std::vector<double> vc = rng.normal_vec(64), vu = rng.normal_vec(64);
  bool ok = cfg_velocity(vc, vu, 1.0) == vc && cfg_velocity(vc, vu, 0.0) == vu;
  const double probe = cfg_velocity({1.0}, {0.0}, 7.5)[0];
  ok = ok && probe == 7.5;
  report(4, "CFG identities at s=1, s=0 and the 7.5 scalar probe", ok,
         "probe=" + fmt(probe, 2));
}

// --------------------------------------------------------------------------
// Training-dependent criteria 5-7 share one trained pipeline.

struct TrainedPipeline {
  RunConfig cfg;
  Stages stages;
  std::string train_dir, eval_dir;
};

TrainedPipeline train_pipeline(const std::string& work) {
  TrainedPipeline tp;
  tp.cfg = RunConfig::from_json_text(R"({
    "seed": 1,
    "dataset": {"n_objects": 64, "n_views": 16},
    "encoder": {"train_steps": 9000},
    "flow": {"ss_train_steps": 4200, "slat_train_steps": 4200, "codec_steps": 8000}
  })");
  tp.train_dir = work + "/data_train";
  tp.eval_dir = work + "/data_eval";
  tp.cfg.paths.dataset_dir = tp.train_dir;
  tp.cfg.paths.eval_dataset_dir = tp.eval_dir;
  tp.cfg.paths.encoder_ckpt = work + "/ckpts/encoder";
  tp.cfg.paths.ss_ckpt = work + "/ckpts/ss";
  tp.cfg.paths.slat_ckpt = work + "/ckpts/slat";

  std::ofstream log(work + "/train.log");
  if (!fs::exists(tp.train_dir + "/manifest.json"))
    make_dataset(tp.cfg.dataset.n_objects, tp.cfg.dataset.n_views, tp.train_dir, tp.cfg.seed,
                 tp.cfg.dataset.image_size, tp.cfg.dataset.resolution);
  if (!fs::exists(tp.eval_dir + "/manifest.json"))
    make_dataset(16, tp.cfg.dataset.n_views, tp.eval_dir, 777, tp.cfg.dataset.image_size,
                 tp.cfg.dataset.resolution);
  if (!fs::exists(tp.cfg.paths.encoder_ckpt + "/manifest.json")) {
    const auto t0 = Clock::now();
    train_encoder_stage(tp.cfg, log);
    std::cout << "  [train] encoder done in " << fmt(elapsed_s(t0) / 60, 1) << " min"
              << std::endl;
  }
  if (!fs::exists(tp.cfg.paths.ss_ckpt + "/manifest.json")) {
    const auto t0 = Clock::now();
    train_ss_stage(tp.cfg, log);
    std::cout << "  [train] ss flow done in " << fmt(elapsed_s(t0) / 60, 1) << " min"
              << std::endl;
  }
  if (!fs::exists(tp.cfg.paths.slat_ckpt + "/flow/manifest.json")) {
    const auto t0 = Clock::now();
    train_slat_stage(tp.cfg, log);
    std::cout << "  [train] slat done in " << fmt(elapsed_s(t0) / 60, 1) << " min" << std::endl;
  }
  tp.stages = load_stages(tp.cfg.paths);
  return tp;
}

void criterion_5(const TrainedPipeline& tp) {
  const auto t0 = Clock::now();
  std::ofstream log(fs::path(tp.train_dir).parent_path() / "ablation.log");
  AblationResult ab = run_ablation(tp.cfg, tp.stages, tp.eval_dir, 8, 4,
                                   (fs::path(tp.train_dir).parent_path() / "ablation").string(),
                                   log);
  const auto& r = ab.rows;
  const bool order_ok = r[0].psnr < r[1].psnr && r[1].psnr <= r[2].psnr && r[2].psnr < r[3].psnr;
  const bool fscore_ok = r[3].fscore >= r[0].fscore + 0.05;
  report(5, "ablation rows: PSNR(a)<PSNR(b)<=PSNR(c)<PSNR(d), F(d)>=F(a)+0.05",
         order_ok && fscore_ok,
         "psnr a/b/c/d=" + fmt(r[0].psnr, 2) + "/" + fmt(r[1].psnr, 2) + "/" + fmt(r[2].psnr, 2) +
             "/" + fmt(r[3].psnr, 2) + ", fscore a=" + fmt(r[0].fscore, 3) +
             " d=" + fmt(r[3].fscore, 3) + ", " + fmt(elapsed_s(t0) / 60, 1) + " min");
}

void criterion_6(const TrainedPipeline& tp) {
  const auto t0 = Clock::now();
  DatasetManifest manifest = load_manifest(tp.eval_dir);
  int wins = 0, ties = 0, cases = 0;
  std::vector<double> deltas;
  for (int i = 0; i < 16 && i < static_cast<int>(manifest.objects.size()); ++i) {
    const auto& entry = manifest.objects[i];
    const std::string odir = (fs::path(tp.eval_dir) / entry.dir).string();
    ViewSet all = load_views(odir);
    ViewSet subset;
    for (int vi : strided_view_pick(all.count(), 4)) subset.images.push_back(all.images[vi]);

    SamplerConfig with = tp.cfg.sampler;
    SamplerConfig without = tp.cfg.sampler;
    without.alpha = 0.0;  // --no-rvc semantics
    GenerateResult ron = generate_from_dir(odir, tp.stages, with, tp.cfg.seed + entry.seed, 4);
    GenerateResult roff =
        generate_from_dir(odir, tp.stages, without, tp.cfg.seed + entry.seed, 4);
    const double pon = input_view_psnr(ron.object, ron.poses, subset, with.render);
    const double poff = input_view_psnr(roff.object, roff.poses, subset, without.render);
    deltas.push_back(pon - poff);
    wins += pon > poff;
    ties += pon == poff;
    ++cases;
  }
  std::sort(deltas.begin(), deltas.end());
  const double median_delta = deltas[deltas.size() / 2];
  const bool ok = median_delta > 0.0 && wins >= 13;
  std::ostringstream detail;
  detail << "wins=" << wins << "/" << cases << " (ties " << ties
         << "), median_delta=" << fmt(median_delta, 3) << " dB, " << fmt(elapsed_s(t0) / 60, 1)
         << " min";
  report(6, "RVC raises input-view PSNR on held-out cases (13/16 or better)", ok, detail.str());
}

void criterion_7(const std::string& work) {
  // Uses the sweep the ablation harness already produced.
  std::ifstream f(fs::path(work) / "ablation" / "ablation.json");
  if (!f.good()) {
    report(7, "view-count sweep monotone with the largest 2->4 increment", false,
           "ablation output missing");
    return;
  }
  std::stringstream ss;
  ss << f.rdbuf();
  // Tiny parse: rely on pipeline emitting sweep in view order 2,4,6,8.
  std::vector<double> psnr;
  {
    std::string text = ss.str();
    size_t pos = text.find("\"sweep\"");
    while (pos != std::string::npos) {
      pos = text.find("\"psnr\":", pos);
      if (pos == std::string::npos) break;
      psnr.push_back(std::atof(text.c_str() + pos + 7));
      pos = text.find("\"views\"", pos);
    }
  }
  bool ok = psnr.size() == 4;
  std::ostringstream detail;
  if (ok) {
    const double inc1 = psnr[1] - psnr[0], inc2 = psnr[2] - psnr[1], inc3 = psnr[3] - psnr[2];
    ok = psnr[1] >= psnr[0] && psnr[2] >= psnr[1] && psnr[3] >= psnr[2] && inc1 >= inc2 &&
         inc1 >= inc3;
    detail << "psnr@2/4/6/8=" << fmt(psnr[0], 2) << "/" << fmt(psnr[1], 2) << "/" << fmt(psnr[2], 2)
           << "/" << fmt(psnr[3], 2);
  } else {
    detail << "sweep rows missing";
  }
  report(7, "view-count sweep monotone with the largest 2->4 increment", ok, detail.str());
}

// --------------------------------------------------------------------------
// 8. PnP robustness.

std::vector<Correspondence> synth_corrs(const Camera& cam, int n, uint64_t seed, double noise,
                                        double outlier_frac) {
  RngStream rng(seed, "corrs");
  std::vector<Correspondence> out;
  while (static_cast<int>(out.size()) < n) {
    Vec3 p{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    PixelDepth pd;
    try {
      pd = cam.project(p);
    } catch (const Error&) {
      continue;
    }
    if (pd.u < 2 || pd.v < 2 || pd.u >= cam.width() - 2 || pd.v >= cam.height() - 2) continue;
    Correspondence c;
    c.point = p;
    c.u = pd.u + noise * rng.normal();
    c.v = pd.v + noise * rng.normal();
    out.push_back(c);
  }
  for (int i = 0; i < static_cast<int>(outlier_frac * n); ++i) {
    out[i].u = rng.uniform(0, cam.width());
    out[i].v = rng.uniform(0, cam.height());
  }
  return out;
}

void criterion_8() {
  const auto t0 = Clock::now();
  // Noise-free recovery.
  Camera base = sample_cameras(1, CameraMode::kUniform, 81)[0];
  Camera clean_cam(240, 240, 128, 128, 256, 256, base.rotation(), base.translation());
  auto clean = synth_corrs(clean_cam, 20, 81, 0.0, 0.0);
  PoseEstimate clean_est = pnp_ransac(clean, clean_cam);
  const double clean_rre =
      rotation_geodesic_deg(clean_est.camera->rotation(), clean_cam.rotation());

  // 100-seed Monte Carlo at 0.5 px noise, 30% outliers.
  int pass = 0;
  for (int s = 0; s < 100; ++s) {
    Camera orbit = sample_cameras(1, CameraMode::kUniform, 100 + s)[0];
    Camera gt(240, 240, 128, 128, 256, 256, orbit.rotation(), orbit.translation());
    auto corrs = synth_corrs(gt, 50, 200 + s, 0.5, 0.3);
    PnPConfig cfg;
    cfg.seed = s;
    PoseEstimate est = pnp_ransac(corrs, gt, cfg);
    if (est.status != PoseStatus::kOk) continue;
    const double rre = rotation_geodesic_deg(est.camera->rotation(), gt.rotation());
    const double te = (est.camera->translation() - gt.translation()).norm();
    if (rre < 1.0 && te < 0.01) ++pass;
  }
  const double secs = elapsed_s(t0);
  const bool ok = clean_rre < 1e-3 && pass >= 95 && secs < 120.0;
  report(8, "PnP+RANSAC robustness (95/100 under noise+outliers; exact when clean)", ok,
         "clean_rre=" + fmt(clean_rre, 6) + " deg, pass=" + std::to_string(pass) + "/100, " +
             fmt(secs, 1) + "s");
}

// --------------------------------------------------------------------------
// 9. Pose-metric protocol.

void criterion_9() {
  auto cams = sample_cameras(5, CameraMode::kUniform, 91);
  PoseMetrics ident = pose_metrics(cams, cams);
  bool ok = ident.rre_deg < 1e-12 && ident.te < 1e-12 && ident.acc15 == 1.0 && ident.acc30 == 1.0;

  std::vector<Camera> pred = cams;
  {
    const Camera& c = cams[1];
    Mat3 rz = rotation_about_axis({0, 0, 1}, 10.0 * M_PI / 180.0);
    pred[1] = Camera(c.fx(), c.fy(), c.cx(), c.cy(), c.width(), c.height(), rz * c.rotation(),
                     rz * c.translation());
  }
  PoseMetrics pm = pose_metrics(pred, cams);
  ok = ok && std::abs(pm.per_view_rre[0] - 10.0) < 1e-6;

  Mat3 rx = rotation_about_axis({0.3, 1.0, -0.2}, 0.6);
  Vec3 tx{0.4, -0.6, 0.3};
  std::vector<Camera> moved;
  for (const auto& c : pred) {
    Mat3 r2 = c.rotation() * rx.transposed();
    Vec3 t2 = c.translation() - r2 * tx;
    moved.push_back(Camera(c.fx(), c.fy(), c.cx(), c.cy(), c.width(), c.height(), r2, t2));
  }
  PoseMetrics pm2 = pose_metrics(moved, cams);
  ok = ok && std::abs(pm2.rre_deg - pm.rre_deg) < 1e-9 && std::abs(pm2.te - pm.te) < 1e-9;
  report(9, "pose metric protocol (identity, 10-degree probe, rigid invariance)", ok,
         "rre_probe=" + fmt(pm.per_view_rre[0], 7));
}

// --------------------------------------------------------------------------
// 10. Metric oracles.

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  auto directed = [](const PointCloud& from, const PointCloud& to) {
    double s = 0;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      s += best;
    }
    return s / from.size();
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

double brute_fscore(const PointCloud& a, const PointCloud& b, double r) {
  auto frac = [&](const PointCloud& from, const PointCloud& to) {
    int n = 0;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      n += best < r;
    }
    return static_cast<double>(n) / from.size();
  };
  const double p = frac(a, b), q = frac(b, a);
  return p + q > 0 ? 2 * p * q / (p + q) : 0.0;
}

// Direct-window SSIM, coded independently of the production implementation.
double ssim_reference(const ImageBuffer& ia, const ImageBuffer& ib) {
  const auto a = ia.to_gray();
  const auto b = ib.to_gray();
  const int h = ia.height, w = ia.width, win = 11;
  std::vector<double> kernel(win * win);
  double ksum = 0;
  for (int y = 0; y < win; ++y)
    for (int x = 0; x < win; ++x) {
      const double dy = y - 5, dx = x - 5;
      kernel[y * win + x] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      ksum += kernel[y * win + x];
    }
  for (auto& k : kernel) k /= ksum;
  double total = 0;
  int count = 0;
  for (int oy = 0; oy + win <= h; ++oy)
    for (int ox = 0; ox + win <= w; ++ox) {
      double mu1 = 0, mu2 = 0;
      for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
          mu1 += kernel[y * win + x] * a[(size_t)(oy + y) * w + ox + x];
          mu2 += kernel[y * win + x] * b[(size_t)(oy + y) * w + ox + x];
        }
      double v1 = 0, v2 = 0, cov = 0;
      for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
          const double da = a[(size_t)(oy + y) * w + ox + x] - mu1;
          const double db = b[(size_t)(oy + y) * w + ox + x] - mu2;
          v1 += kernel[y * win + x] * da * da;
          v2 += kernel[y * win + x] * db * db;
          cov += kernel[y * win + x] * da * db;
        }
      total += ((2 * mu1 * mu2 + 1e-4) * (2 * cov + 9e-4)) /
               ((mu1 * mu1 + mu2 * mu2 + 1e-4) * (v1 + v2 + 9e-4));
      ++count;
    }
  return total / count;
}

void criterion_10() {
  RngStream rng(101, "clouds");
  bool cloud_ok = true;
  for (int pair = 0; pair < 50; ++pair) {
    PointCloud a, b;
    const int na = 3 + static_cast<int>(rng.uniform_index(97));
    const int nb = 3 + static_cast<int>(rng.uniform_index(97));
    for (int i = 0; i < na; ++i)
      a.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    for (int i = 0; i < nb; ++i)
      b.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    if (std::abs(chamfer(a, b) - brute_chamfer(a, b)) > 1e-12) cloud_ok = false;
    if (std::abs(fscore(a, b, 0.1) - brute_fscore(a, b, 0.1)) > 1e-12) cloud_ok = false;
  }

  double worst_ssim = 0;
  RngStream img_rng(102, "imgs");
  for (int pair = 0; pair < 8; ++pair) {
    ImageBuffer a = ImageBuffer::make(24, 30, 3);
    ImageBuffer b = ImageBuffer::make(24, 30, 3);
    for (auto& v : a.values) v = img_rng.uniform();
    for (auto& v : b.values) v = img_rng.uniform();
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - ssim_reference(a, b)));
  }
  ImageBuffer x = ImageBuffer::make(20, 20, 3);
  for (auto& v : x.values) v = img_rng.uniform();
  const double self = ssim(x, x);
  const bool ok = cloud_ok && worst_ssim < 1e-6 && std::abs(self - 1.0) < 1e-12;
  report(10, "metric oracles (chamfer/f-score exact, SSIM vs reference, SSIM(x,x)=1)", ok,
         "ssim_dev=" + fmt(worst_ssim, 9) + ", self=" + fmt(self, 9));
}

// --------------------------------------------------------------------------
// 11. Renderer differentiability + compositing conservation.

void criterion_11() {
  RngStream rng(111, "probe");
  double worst_rel = 0;
  for (int probe = 0; probe < 20; ++probe) {
    const int R = 4;
    const size_t cells = R * R * R;
    VoxelObject obj;
    obj.resolution = R;
    obj.occupancy.assign(cells, 0);
    obj.color.assign(cells * 3, 0.0);
    obj.opacity_logit.assign(cells, 0.0);
    for (int i = 0; i < 6; ++i) {
      const size_t id = rng.uniform_index(cells);
      obj.occupancy[id] = 1;
      obj.opacity_logit[id] = rng.uniform(-1.0, 3.0);
      for (int c = 0; c < 3; ++c) obj.color[id * 3 + c] = rng.uniform();
    }
    if (obj.occupied_count() == 0) continue;
    RenderConfig rc;
    rc.density_scale = 25.0;
    std::vector<double> density, pcolor;
    object_render_grids(obj, rc, density, pcolor);
    Camera cam = sample_cameras(1, CameraMode::kUniform, 200 + probe, 16)[0];

    // Pick one random (grid, channel) coordinate and a random pixel functional.
    std::vector<double> wdata(16 * 16 * 4);
    RngStream wrng(300 + probe, "w");
    for (auto& w : wdata) w = wrng.normal();
    Tensor weights = Tensor::from_data(16 * 16, 4, wdata);
    auto loss_of = [&](const std::vector<double>& dv, const std::vector<double>& pv, bool grad,
                       std::vector<double>* gd, std::vector<double>* gp) {
      Tensor d = Tensor::from_data((int)cells, 1, dv, grad);
      Tensor p = Tensor::from_data((int)cells, 3, pv, grad);
      Tensor img = render_diff(d, p, R, cam, 16, rc);
      Tensor loss = sum_all(mul(img, weights));
      if (grad) {
        loss.backward();
        *gd = d.grad();
        *gp = p.grad();
      }
      return loss.item();
    };
    std::vector<double> gd, gp;
    loss_of(density, pcolor, true, &gd, &gp);
    const double h = 1e-3;
    const bool use_density = probe % 2 == 0;
    // Probe a coordinate with non-trivial gradient when possible.
    size_t idx = 0;
    double best = -1;
    const auto& gvec = use_density ? gd : gp;
    for (size_t i = 0; i < gvec.size(); ++i)
      if (std::abs(gvec[i]) > best) {
        best = std::abs(gvec[i]);
        idx = i;
      }
    auto dv = density;
    auto pv = pcolor;
    auto& target = use_density ? dv : pv;
    target[idx] += h;
    const double fp = loss_of(dv, pv, false, nullptr, nullptr);
    target[idx] -= 2 * h;
    const double fm = loss_of(dv, pv, false, nullptr, nullptr);
    const double fd = (fp - fm) / (2 * h);
    const double analytic = gvec[idx];
    const double rel = std::abs(fd - analytic) / std::max(1e-9, std::abs(fd));
    worst_rel = std::max(worst_rel, rel);
  }

  // Compositing conservation: alpha + transmitted weight = 1.
  VoxelObject obj = make_object(7, 3);
  RenderConfig rc;
  double worst_cons = 0;
  for (const auto& cam : sample_cameras(2, CameraMode::kUniform, 7)) {
    std::vector<double> density, pcolor;
    object_render_grids(obj, rc, density, pcolor);
    // Render with a black background: rgb of a gray=1 object equals the
    // accumulated weights; check alpha directly against transmittance by
    // rendering an all-white object on black.
    VoxelObject white = obj;
    for (size_t i = 0; i < white.cell_count(); ++i)
      if (white.occupancy[i])
        for (int c = 0; c < 3; ++c) white.color[i * 3 + c] = 1.0;
    RenderConfig black = rc;
    black.background = 0.0;
    RenderOutput out = render(white, cam, 32, black);
    for (int i = 0; i < 32 * 32; ++i) {
      // For a pure-white emitter on black, rgb = sum of weights and alpha =
      // 1 - transmittance; conservation means they coincide.
      worst_cons = std::max(worst_cons, std::abs(out.rgb.values[(size_t)i * 3] - out.alpha[i]));
    }
  }
  const bool ok = worst_rel < 1e-2 && worst_cons < 1e-6;
  report(11, "renderer gradients match finite differences; compositing conserves", ok,
         "max_rel=" + fmt(worst_rel, 6) + ", conservation=" + fmt(worst_cons, 9));
}

// --------------------------------------------------------------------------
// 12. Structural invariants.

void criterion_12() {
  // Condition net permutation invariance.
  ParamStore ps;
  RngStream rng(121, "cn");
  ConditionNetConfig cc;
  ConditionNet net(cc, ps, "cond", rng);
  FeatureStack fs;
  fs.n_views = 4;
  fs.tokens = 16;
  fs.dim = 64;
  fs.feats.assign(4, {});
  for (int v = 0; v < 4; ++v)
    for (int s = 0; s < 4; ++s) fs.feats[v].push_back(Tensor::randn(16, 64, rng));
  Tensor tg = net.global_condition(fs);
  FeatureStack perm = fs;
  std::swap(perm.feats[0], perm.feats[2]);
  std::swap(perm.feats[1], perm.feats[3]);
  Tensor tg2 = net.global_condition(perm);
  double perm_dev = 0;
  for (size_t i = 0; i < tg.numel(); ++i)
    perm_dev = std::max(perm_dev, std::abs(tg.data()[i] - tg2.data()[i]));

  // Fusion weight normalization + N=1 reduction.
  FlowConfig fc;
  fc.width = 64;
  fc.blocks = 2;
  fc.mlp_hidden = 128;
  fc.cond_net.feat_dim = 64;
  SLATFlowModel slat(fc, 122);
  SparseStructure pos;
  pos.resolution = 8;
  RngStream prng(123, "pos");
  std::vector<uint8_t> used(512, 0);
  while (pos.count() < 24) {
    int x = static_cast<int>(prng.uniform_index(8)), y = static_cast<int>(prng.uniform_index(8)),
        z = static_cast<int>(prng.uniform_index(8));
    const size_t f = ((size_t)z * 8 + y) * 8 + x;
    if (used[f]) continue;
    used[f] = 1;
    pos.coords.push_back({x, y, z});
  }
  Tensor x = Tensor::randn(24, fc.latent_dim, rng);
  std::vector<Tensor> conds;
  for (int k = 0; k < 3; ++k) conds.push_back(Tensor::randn(fc.cond_len, fc.cond_dim, rng));
  Tensor w = slat.fusion_weights(x, pos, 0.5, conds);
  double worst_sum = 0;
  for (int i = 0; i < w.rows(); ++i) {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += w.data()[(size_t)i * 3 + k];
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  Tensor w1 = slat.fusion_weights(x, pos, 0.5, {conds[0]});
  double n1_dev = 0;
  for (double v : w1.data()) n1_dev = std::max(n1_dev, std::abs(v - 1.0));

  // LoRA zero-init identity.
  EncoderConfig ec;
  EncoderModel enc(ec, 124);
  RngStream irng(125, "imgs");
  std::vector<ImageBuffer> views;
  for (int i = 0; i < 2; ++i) {
    ImageBuffer img = ImageBuffer::make(64, 64, 3);
    for (auto& v : img.values) v = irng.uniform();
    views.push_back(img);
  }
  FeatureStack before = enc.encode(views);
  enc.apply_lora(8, 16.0, 0.0);
  FeatureStack after = enc.encode(views);
  double lora_dev = 0;
  for (int v = 0; v < 2; ++v)
    for (int s = 0; s < 4; ++s)
      for (size_t i = 0; i < before.feats[v][s].numel(); ++i)
        lora_dev = std::max(lora_dev, std::abs(before.feats[v][s].data()[i] -
                                               after.feats[v][s].data()[i]));

  // Frame-wise isolation.
  EncoderConfig fwc;
  fwc.layers = 1;
  fwc.selected_layers = {0, 0, 0, 0};
  EncoderModel fw(fwc, 126);
  auto views2 = views;
  for (auto& v : views2[1].values) v = std::min(1.0, v + 0.03);
  FeatureStack fa = fw.encode(views);
  FeatureStack fb = fw.encode(views2);
  double iso_dev = 0;
  for (size_t i = 0; i < fa.feats[0][0].numel(); ++i)
    iso_dev = std::max(iso_dev, std::abs(fa.feats[0][0].data()[i] - fb.feats[0][0].data()[i]));

  const bool ok = perm_dev < 1e-5 && worst_sum < 1e-6 && n1_dev == 0.0 && lora_dev < 1e-7 &&
                  iso_dev <= 1e-6;
  report(12, "structural invariants (perm-invariance, fusion norm, LoRA, isolation)", ok,
         "perm=" + fmt(perm_dev, 9) + ", fuse=" + fmt(worst_sum, 9) + ", lora=" +
             fmt(lora_dev, 9) + ", iso=" + fmt(iso_dev, 9));
}

// --------------------------------------------------------------------------
// 13. CLI determinism: each subcommand rerun with the same config + seed
//     produces byte-identical primary outputs.

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REVGEN_CHECK(f.good(), "criterion 13: missing output " + p.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void criterion_13(const std::string& work) {
  bool ok = true;
  std::string what;
  const fs::path root = fs::path(work) / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);

  RunConfig cfg = RunConfig::from_json_text(R"({
    "seed": 5,
    "dataset": {"n_objects": 2, "n_views": 4, "image_size": 32},
    "encoder": {"train_steps": 8, "image_size": 32, "dim": 32, "layers": 2, "mlp_hidden": 64},
    "flow": {"width": 32, "blocks": 2, "mlp_hidden": 64, "cond_dim": 32, "cond_len": 8,
             "ss_train_steps": 4, "slat_train_steps": 4, "codec_steps": 50},
    "sampler": {"ss_steps": 4, "slat_steps": 3}
  })");
  cfg.encoder.selected_layers = {0, 1, 0, 1};

  auto run_twice = [&](const std::string& name, auto body,
                       const std::vector<std::string>& outputs) {
    for (int round = 0; round < 2 && ok; ++round) {
      const fs::path dir = root / (name + "_" + std::to_string(round));
      fs::create_directories(dir);
      body(dir.string());
    }
    for (const auto& rel : outputs) {
      if (!ok) break;
      const std::string a = file_bytes(root / (name + "_0") / rel);
      const std::string b = file_bytes(root / (name + "_1") / rel);
      if (a != b) {
        ok = false;
        what = name + ":" + rel;
      }
    }
  };

  // make-dataset
  run_twice(
      "dataset",
      [&](const std::string& dir) {
        make_dataset(cfg.dataset.n_objects, cfg.dataset.n_views, dir, cfg.seed,
                     cfg.dataset.image_size, cfg.dataset.resolution);
      },
      {"manifest.json", "obj_0000/gt_voxels.bin", "obj_0000/views/view_000.png",
       "obj_0001/depths/view_001.bin"});

  // Stage training + generation + evaluation share per-round work dirs.
  auto stage_body = [&](const std::string& dir) {
    RunConfig c = cfg;
    c.paths.dataset_dir = (root / "dataset_0").string();
    c.paths.encoder_ckpt = dir + "/encoder";
    c.paths.ss_ckpt = dir + "/ss";
    c.paths.slat_ckpt = dir + "/slat";
    std::ofstream log(fs::path(dir) / "train.log");
    train_encoder_stage(c, log);
    train_ss_stage(c, log);
    train_slat_stage(c, log);
    Stages stages = load_stages(c.paths);
    GenerateResult res = generate_from_dir(c.paths.dataset_dir + "/obj_0000", stages, c.sampler,
                                           c.seed, 2);
    save_tensor(dir + "/object.bin", res.object.to_array());
    res.trajectory.write_jsonl(dir + "/trajectory.jsonl");
    // evaluate on the prediction
    fs::create_directories(fs::path(dir) / "pred" / "obj_0000");
    save_tensor(dir + "/pred/obj_0000/object.bin", res.object.to_array());
    EvalReport rep = evaluate_dirs(dir + "/pred", c.paths.dataset_dir);
    std::ofstream rf(fs::path(dir) / "report.json");
    rf << rep.to_json_text("{}") << "\n";
  };
  run_twice("pipeline", stage_body,
            {"encoder/manifest.json", "encoder/patch_embed_w.bin", "ss/block0_self_q_w.bin",
             "slat/flow/block0_cross_k_w.bin", "slat/codec/enc1_w.bin", "object.bin",
             "trajectory.jsonl", "report.json"});

  report(13, "CLI subcommands are byte-identical under identical config+seed", ok, what);
}

}  // namespace

int main() {
  g_suite_start = Clock::now();
  const char* dir_env = std::getenv("REVGEN_ACCEPT_DIR");
  const std::string work = dir_env && *dir_env ? dir_env : "acceptance_work";
  fs::create_directories(work);
  const bool fast = [] {
    const char* v = std::getenv("REVGEN_ACCEPT_FAST");
    return v && std::string(v) == "1";
  }();

  std::cout << "acceptance work directory: " << work << std::endl;
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  criterion_13(work);

  if (fast) {
    report(5, "ablation direction", false, "skipped: REVGEN_ACCEPT_FAST=1");
    report(6, "RVC benefit", false, "skipped: REVGEN_ACCEPT_FAST=1");
    report(7, "view-count monotonicity", false, "skipped: REVGEN_ACCEPT_FAST=1");
  } else {
    std::cout << "training the toy pipeline (single-core CPU; expect a few hours)..."
              << std::endl;
    TrainedPipeline tp = train_pipeline(work);
    criterion_5(tp);
    criterion_6(tp);
    criterion_7(work);
  }

  if (g_failures == 0)
    std::cout << "ALL CRITERIA PASSED";
  else
    std::cout << "FAILURES: " << g_failures;
  std::cout << " (total " << fmt(elapsed_s(g_suite_start) / 60, 1) << " min)" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
