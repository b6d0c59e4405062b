// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/encoder.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "revgen/common.hpp"

namespace revgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// 6d rotation parameterization -> orthonormal matrix rows, as autodiff graph.
// Input [N,6]; output [N,9] row-major rotation entries.
Tensor rot6d_to_matrix_rows(const Tensor& v6) {
  Tensor a1 = rows_normalize(slice_cols(v6, 0, 3));
  Tensor raw2 = slice_cols(v6, 3, 6);
  Tensor proj = rows_dot(a1, raw2);  // [N,1]
  Tensor a2 = rows_normalize(sub(raw2, mul_bcast_col(a1, proj)));
  Tensor a3 = rows_cross(a1, a2);
  return concat_cols({a1, a2, a3});  // rows of R stacked: [r00 r01 r02 r10 ...]
}

std::vector<double> image_patches(const ImageBuffer& img, int patch) {
  const int g = img.width / patch;
  std::vector<double> out((size_t)g * g * patch * patch * 3);
  size_t k = 0;
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px)
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          for (int c = 0; c < 3; ++c) out[k++] = img.at(py * patch + y, px * patch + x, c);
  return out;
}

}  // namespace

EncoderModel::EncoderModel(const EncoderConfig& cfg, uint64_t seed) : cfg_(cfg) {
  RngStream rng(seed, "encoder/init");
  const int patch_in = cfg.patch * cfg.patch * 3;
  patch_embed_ = Linear::make(ps_, "patch_embed", patch_in, cfg.dim, rng);
  pos_embed_ = sincos_grid_2d(cfg.image_size / cfg.patch, cfg.image_size / cfg.patch, cfg.dim);
  layers_.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    EncoderLayer layer;
    const std::string base = "layer" + std::to_string(l);
    layer.ln_attn = LayerNormLayer::make(ps_, base + ".ln_attn", cfg.dim);
    layer.ln_mlp = LayerNormLayer::make(ps_, base + ".ln_mlp", cfg.dim);
    layer.attn = MultiHeadAttention::make(ps_, base + ".attn", cfg.dim, cfg.dim, cfg.heads, rng);
    layer.mlp = Mlp::make(ps_, base + ".mlp", cfg.dim, cfg.mlp_hidden, rng);
    layer.framewise = (l % 2 == 0);
    layers_.push_back(layer);
  }
  const int head_in = cfg.dim * static_cast<int>(cfg.selected_layers.size());
  head_cam_reduce_ = Linear::make(ps_, "head_cam.reduce", head_in, 16, rng);
  head_cam_hidden_ = Linear::make(ps_, "head_cam.hidden", cfg.tokens_per_view() * 16, 128, rng);
  head_cam_out_ = Linear::make(ps_, "head_cam.out", 128, 10, rng);
  head_depth_ = Linear::make(ps_, "head_depth", head_in, cfg.patch * cfg.patch, rng);
  head_point_ = Linear::make(ps_, "head_point", head_in, cfg.patch * cfg.patch * 3, rng);
}

long EncoderModel::parameter_count() const {
  long n = 0;
  for (const auto& [name, t] : ps_.all()) n += static_cast<long>(t.numel());
  return n;
}

Tensor EncoderModel::trunk_tokens(const std::vector<ImageBuffer>& views) const {
  REVGEN_CHECK(!views.empty(), "encode: no views");
  const int tpv = cfg_.tokens_per_view();
  std::vector<Tensor> view_tokens;
  for (const auto& img : views) {
    REVGEN_CHECK(img.width == cfg_.image_size && img.height == cfg_.image_size,
                 "encode: view resolution does not match the model");
    Tensor patches =
        Tensor::from_data(tpv, cfg_.patch * cfg_.patch * 3, image_patches(img, cfg_.patch));
    view_tokens.push_back(add(patch_embed_.forward(patches), pos_embed_));
  }
  return concat_rows(view_tokens);
}

FeatureStack EncoderModel::encode(const std::vector<ImageBuffer>& views, int truncate_after_layer,
                                  RngStream* lora_drop) const {
  const int n = static_cast<int>(views.size());
  const int tpv = cfg_.tokens_per_view();
  Tensor x = trunk_tokens(views);

  FeatureStack fs;
  fs.n_views = n;
  fs.tokens = tpv;
  fs.dim = cfg_.dim;
  fs.feats.assign(n, {});

  const int last = truncate_after_layer < 0 ? cfg_.layers - 1 : truncate_after_layer;
  for (int l = 0; l <= last && l < cfg_.layers; ++l) {
    const auto& layer = layers_[l];
    Tensor normed = layer.ln_attn.forward(x);
    Tensor attn_out;
    if (layer.framewise && n > 1) {
      std::vector<Tensor> per_view;
      per_view.reserve(n);
      for (int v = 0; v < n; ++v) {
        Tensor slice = slice_rows(normed, v * tpv, (v + 1) * tpv);
        per_view.push_back(layer.attn.forward(slice, slice, lora_drop));
      }
      attn_out = concat_rows(per_view);
    } else {
      attn_out = layer.attn.forward(normed, normed, lora_drop);
    }
    x = add(x, attn_out);
    x = add(x, layer.mlp.forward(layer.ln_mlp.forward(x)));
    for (size_t s = 0; s < cfg_.selected_layers.size(); ++s) {
      if (cfg_.selected_layers[s] == l) {
        for (int v = 0; v < n; ++v) fs.feats[v].push_back(slice_rows(x, v * tpv, (v + 1) * tpv));
      }
    }
  }
  // When truncated, pad the missing taps with zeros so the stack stays
  // rectangular.
  for (int v = 0; v < n; ++v)
    while (fs.feats[v].size() < cfg_.selected_layers.size())
      fs.feats[v].push_back(Tensor::zeros(tpv, cfg_.dim));
  return fs;
}

EncoderModel::HeadOutputs EncoderModel::heads(const FeatureStack& fs,
                                              RngStream* lora_drop) const {
  HeadOutputs out;
  const int g = cfg_.image_size / cfg_.patch, patch = cfg_.patch;
  // Pixel gather maps are identical for every view; build once.
  auto dmap = std::make_shared<std::vector<int64_t>>((size_t)cfg_.image_size * cfg_.image_size);
  auto pmap =
      std::make_shared<std::vector<int64_t>>((size_t)cfg_.image_size * cfg_.image_size * 3);
  for (int y = 0; y < cfg_.image_size; ++y)
    for (int x = 0; x < cfg_.image_size; ++x) {
      const int token = (y / patch) * g + (x / patch);
      const int off = (y % patch) * patch + (x % patch);
      (*dmap)[(size_t)y * cfg_.image_size + x] = (int64_t)token * (patch * patch) + off;
      for (int c = 0; c < 3; ++c)
        (*pmap)[((size_t)y * cfg_.image_size + x) * 3 + c] =
            (int64_t)token * (patch * patch * 3) + off * 3 + c;
    }
  for (int v = 0; v < fs.n_views; ++v) {
    Tensor cat = concat_cols(fs.feats[v]);  // [tokens, S*dim]
    Tensor reduced = silu(head_cam_reduce_.forward(cat, lora_drop));
    Tensor flat = reshape(reduced, 1, reduced.rows() * reduced.cols());
    out.camera_raw.push_back(
        head_cam_out_.forward(silu(head_cam_hidden_.forward(flat, lora_drop)), lora_drop));
    Tensor d = head_depth_.forward(cat, lora_drop);  // [tokens, patch*patch]
    Tensor p = head_point_.forward(cat, lora_drop);  // [tokens, patch*patch*3]
    out.depth.push_back(gather_map(d, dmap, cfg_.image_size * cfg_.image_size, 1));
    out.points.push_back(gather_map(p, pmap, cfg_.image_size * cfg_.image_size, 3));
  }
  return out;
}

CameraPrediction prediction_from_raw(const std::vector<double>& raw10) {
  REVGEN_CHECK(raw10.size() == 10, "prediction_from_raw: expected 10 values");
  Vec3 a1{raw10[0], raw10[1], raw10[2]};
  Vec3 a2r{raw10[3], raw10[4], raw10[5]};
  a1 = a1.norm() > 1e-9 ? a1.normalized() : Vec3{1, 0, 0};
  Vec3 a2 = a2r - a1 * a1.dot(a2r);
  a2 = a2.norm() > 1e-9 ? a2.normalized() : (std::abs(a1.x) < 0.9 ? a1.cross({1, 0, 0}).normalized()
                                                                  : a1.cross({0, 1, 0}).normalized());
  Vec3 a3 = a1.cross(a2);
  CameraPrediction p;
  p.rotation(0, 0) = a1.x;
  p.rotation(0, 1) = a1.y;
  p.rotation(0, 2) = a1.z;
  p.rotation(1, 0) = a2.x;
  p.rotation(1, 1) = a2.y;
  p.rotation(1, 2) = a2.z;
  p.rotation(2, 0) = a3.x;
  p.rotation(2, 1) = a3.y;
  p.rotation(2, 2) = a3.z;
  p.translation = {raw10[6], raw10[7], raw10[8]};
  p.focal_norm = std::abs(raw10[9]) + 1e-3;
  return p;
}

Camera camera_from_prediction(const CameraPrediction& p, int image_size) {
  const double f = std::max(1e-3, p.focal_norm) * image_size;
  return Camera(f, f, image_size / 2.0, image_size / 2.0, image_size, image_size, p.rotation,
                p.translation);
}

std::vector<CameraPrediction> EncoderModel::predict_cameras(
    const std::vector<ImageBuffer>& views) const {
  std::vector<CameraPrediction> cams;
  FeatureStack fs = encode(views);
  HeadOutputs h = heads(fs);
  for (const auto& raw : h.camera_raw) cams.push_back(prediction_from_raw(raw.data()));
  return cams;
}

void EncoderModel::predict(const std::vector<ImageBuffer>& views,
                           std::vector<CameraPrediction>* cameras,
                           std::vector<std::vector<double>>* depths,
                           std::vector<std::vector<double>>* points) const {
  FeatureStack fs = encode(views);
  HeadOutputs h = heads(fs);
  if (cameras) {
    cameras->clear();
    for (const auto& raw : h.camera_raw) cameras->push_back(prediction_from_raw(raw.data()));
  }
  if (depths) {
    depths->clear();
    for (const auto& d : h.depth) depths->push_back(d.data());
  }
  if (points) {
    points->clear();
    for (const auto& p : h.points) points->push_back(p.data());
  }
}

void EncoderModel::apply_lora(int rank, double alpha, double dropout_p) {
  REVGEN_CHECK(rank >= 1, "apply_lora: rank must be >= 1");
  REVGEN_CHECK(dropout_p >= 0.0 && dropout_p < 1.0, "apply_lora: dropout out of range");
  RngStream rng(fnv1a("lora"), "encoder/lora");
  ps_.freeze_all();
  auto attach = [&](Linear& lin, const std::string& name) {
    const int in = lin.in_features(), out = lin.out_features();
    REVGEN_CHECK(rank <= std::min(in, out), "apply_lora: rank exceeds weight dimensions");
    lin.lora_a = ps_.create(name + ".lora_a", rank, in, 1.0 / std::sqrt((double)in), rng);
    lin.lora_b = ps_.create_zeros(name + ".lora_b", out, rank);
    lin.lora_scale = alpha / rank;
    lin.lora_dropout = dropout_p;
  };
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string base = "layer" + std::to_string(l) + ".attn";
    attach(layers_[l].attn.q, base + ".q");
    attach(layers_[l].attn.k, base + ".k");
    attach(layers_[l].attn.v, base + ".v");
    attach(layers_[l].attn.o, base + ".o");
  }
  lora_rank_ = rank;
}

void EncoderModel::save(const std::string& dir) const {
  json extra;
  extra["image_size"] = cfg_.image_size;
  extra["patch"] = cfg_.patch;
  extra["dim"] = cfg_.dim;
  extra["layers"] = cfg_.layers;
  extra["heads"] = cfg_.heads;
  extra["mlp_hidden"] = cfg_.mlp_hidden;
  extra["selected_layers"] = cfg_.selected_layers;
  extra["kind"] = "encoder";
  ps_.save(dir, extra.dump());
}

std::unique_ptr<EncoderModel> EncoderModel::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "EncoderModel::load: missing checkpoint manifest in '" + dir + "'");
  json manifest = json::parse(f);
  json extra = manifest.at("extra");
  EncoderConfig cfg;
  cfg.image_size = extra.at("image_size");
  cfg.patch = extra.at("patch");
  cfg.dim = extra.at("dim");
  cfg.layers = extra.at("layers");
  cfg.heads = extra.at("heads");
  cfg.mlp_hidden = extra.at("mlp_hidden");
  cfg.selected_layers = extra.at("selected_layers").get<std::vector<int>>();
  auto model = std::make_unique<EncoderModel>(cfg, 0);
  model->ps_.load(dir);
  return model;
}

EncoderTargets make_encoder_targets(const ViewSet& views, const std::vector<int>& pick) {
  REVGEN_CHECK(!pick.empty(), "make_encoder_targets: empty pick");
  REVGEN_CHECK(!views.cameras.empty() && !views.depths.empty(),
               "make_encoder_targets: views need cameras and depths");
  // Targets live in the canonical object/world frame: the trunk carries no
  // view-index marker (permutation equivariance is a module invariant), so a
  // first-view-relative convention would be structurally unlearnable.
  EncoderTargets t;
  for (int vi : pick) {
    const Camera& cam = views.cameras[vi];
    t.rotations.push_back(cam.rotation());
    t.translations.push_back(cam.translation());
    t.focal_norm.push_back(cam.fx() / cam.width());

    const auto& depth = views.depths[vi];
    t.depths.push_back(depth);
    std::vector<double> mask(depth.size());
    std::vector<double> pts(depth.size() * 3, 0.0);
    const int w = cam.width();
    for (size_t i = 0; i < depth.size(); ++i) {
      if (depth[i] > 0) {
        mask[i] = 1.0;
        const int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
        Vec3 world = cam.unproject(x + 0.5, y + 0.5, depth[i]);
        pts[i * 3 + 0] = world.x;
        pts[i * 3 + 1] = world.y;
        pts[i * 3 + 2] = world.z;
      } else {
        mask[i] = 0.0;
      }
    }
    t.masks.push_back(std::move(mask));
    t.points.push_back(std::move(pts));
  }
  return t;
}

TrainStats train_encoder(EncoderModel& model, const std::string& dataset_dir,
                         const EncoderTrainConfig& cfg) {
  DatasetManifest manifest = load_manifest(dataset_dir);
  REVGEN_CHECK(!manifest.objects.empty(), "train_encoder: empty dataset");

  // The toy corpus fits in memory; load every view set up front.
  std::vector<ViewSet> all_views;
  all_views.reserve(manifest.objects.size());
  for (const auto& e : manifest.objects)
    all_views.push_back(load_views((fs::path(dataset_dir) / e.dir).string()));

  RngStream data_rng(cfg.seed, "train_encoder/data");
  AdamW opt(model.params().trainable(), cfg.lr);
  TrainStats stats;

  const int hw = model.config().image_size * model.config().image_size;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto& vs = all_views[data_rng.uniform_index(all_views.size())];
    const int n = cfg.min_views +
                  static_cast<int>(data_rng.uniform_index(cfg.max_views - cfg.min_views + 1));
    std::vector<int> pick;
    for (int i = 0; i < n; ++i)
      pick.push_back(static_cast<int>(data_rng.uniform_index(vs.count())));
    EncoderTargets tg = make_encoder_targets(vs, pick);

    std::vector<ImageBuffer> imgs;
    for (int vi : pick) imgs.push_back(vs.images[vi]);
    FeatureStack fs = model.encode(imgs);
    EncoderModel::HeadOutputs heads = model.heads(fs);

    // Camera loss: geodesic rotation + L2 translation + L1 focal.
    Tensor cam_raw = concat_rows(heads.camera_raw);                     // [n,10]
    Tensor rot_pred = rot6d_to_matrix_rows(slice_cols(cam_raw, 0, 6));  // [n,9]
    std::vector<double> rot_gt((size_t)n * 9), trans_gt((size_t)n * 3), focal_gt(n);
    for (int i = 0; i < n; ++i) {
      std::copy(tg.rotations[i].m.begin(), tg.rotations[i].m.end(),
                rot_gt.begin() + (size_t)i * 9);
      trans_gt[(size_t)i * 3 + 0] = tg.translations[i].x;
      trans_gt[(size_t)i * 3 + 1] = tg.translations[i].y;
      trans_gt[(size_t)i * 3 + 2] = tg.translations[i].z;
      focal_gt[i] = tg.focal_norm[i];
    }
    Tensor rot_gt_t = Tensor::from_data(n, 9, rot_gt);
    Tensor tr = rows_dot(rot_pred, rot_gt_t);          // trace(R_pred R_gt^T) per row
    Tensor cosang = scale(add_scalar(tr, -1.0), 0.5);  // (tr-1)/2
    Tensor loss_rot = mean_all(acos_clamped(cosang, 1e-6));
    Tensor dtr = sub(slice_cols(cam_raw, 6, 9), Tensor::from_data(n, 3, trans_gt));
    Tensor loss_trans = mean_all(mul(dtr, dtr));
    Tensor dfoc = sub(slice_cols(cam_raw, 9, 10), Tensor::from_data(n, 1, focal_gt));
    Tensor loss_focal = mean_all(abs_t(dfoc));
    Tensor loss_cam = add(add(loss_rot, loss_trans), loss_focal);

    // Depth: masked L1. Point map: masked L2.
    std::vector<Tensor> dterms, pterms;
    for (int i = 0; i < n; ++i) {
      Tensor mask = Tensor::from_data(hw, 1, tg.masks[i]);
      double mask_count = 0;
      for (double m : tg.masks[i]) mask_count += m;
      if (mask_count < 1) continue;
      Tensor dd = mul(sub(heads.depth[i], Tensor::from_data(hw, 1, tg.depths[i])), mask);
      dterms.push_back(scale(sum_all(abs_t(dd)), 1.0 / mask_count));
      Tensor mask3 = concat_cols({mask, mask, mask});
      Tensor dp = mul(sub(heads.points[i], Tensor::from_data(hw, 3, tg.points[i])), mask3);
      pterms.push_back(scale(sum_all(mul(dp, dp)), 1.0 / (3.0 * mask_count)));
    }
    Tensor loss = loss_cam;
    if (!dterms.empty()) {
      Tensor ld = dterms[0];
      for (size_t i = 1; i < dterms.size(); ++i) ld = add(ld, dterms[i]);
      loss = add(loss, scale(ld, 1.0 / dterms.size()));
    }
    if (!pterms.empty()) {
      Tensor lp = pterms[0];
      for (size_t i = 1; i < pterms.size(); ++i) lp = add(lp, pterms[i]);
      loss = add(loss, scale(lp, 1.0 / pterms.size()));
    }

    const double lval = loss.item();
    if (!std::isfinite(lval)) {
      std::string term = !std::isfinite(loss_rot.item())    ? "rotation"
                         : !std::isfinite(loss_trans.item()) ? "translation"
                         : !std::isfinite(loss_focal.item()) ? "focal"
                                                             : "depth/point";
      REVGEN_FAIL("train_encoder: non-finite loss at step " + std::to_string(step) +
                  " (term: " + term + ")");
    }
    if (step == 0) stats.first_loss = lval;
    if (step % cfg.log_every == 0) stats.loss_history.push_back(lval);
    stats.final_loss = lval;

    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  return stats;
}

}  // namespace revgen
