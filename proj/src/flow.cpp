// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/flow.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "revgen/common.hpp"

namespace revgen {

namespace fs = std::filesystem;
using nlohmann::json;

SparseStructure sparsify(const Array& grid, double threshold) {
  REVGEN_CHECK(!grid.shape.empty(), "sparsify: empty grid");
  int R = grid.shape[0];
  size_t cells = 1;
  for (int d : grid.shape) cells *= static_cast<size_t>(d);
  REVGEN_CHECK(cells == (size_t)R * R * R, "sparsify: expected a cubic single-channel grid");
  SparseStructure ss;
  ss.resolution = R;
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x)
        if (grid.data[((size_t)z * R + y) * R + x] > threshold) ss.coords.push_back({x, y, z});
  REVGEN_CHECK(!ss.coords.empty(), "sparsify: empty structure (coarse generation failed)");
  return ss;
}

SparseStructure sparse_from_object(const VoxelObject& obj) {
  SparseStructure ss;
  ss.resolution = obj.resolution;
  const int R = obj.resolution;
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x)
        if (obj.occupied(x, y, z)) ss.coords.push_back({x, y, z});
  return ss;
}

Array dense_from_sparse(const SparseStructure& ss) {
  const int R = ss.resolution;
  Array a = Array::zeros({R, R, R});
  std::fill(a.data.begin(), a.data.end(), -1.0);
  for (int i = 0; i < ss.count(); ++i) a.data[ss.flat(i)] = 1.0;
  return a;
}

// ---------------------------------------------------------------------------
// Codec

SLATCodec::SLATCodec(const SLATCodecConfig& cfg, uint64_t seed) : cfg_(cfg) {
  RngStream rng(seed, "codec/init");
  enc1_ = Linear::make(ps_, "enc1", 4, cfg.hidden, rng);
  enc2_ = Linear::make(ps_, "enc2", cfg.hidden, cfg.latent_dim, rng);
  dec1_ = Linear::make(ps_, "dec1", cfg.latent_dim, cfg.hidden, rng);
  dec2_ = Linear::make(ps_, "dec2", cfg.hidden, 4, rng);
}

namespace {
// Opacity logits live on a wider scale than colors; normalize them so the
// reconstruction loss weighs all four channels comparably.
constexpr double kLogitScale = 8.0;
}  // namespace

Tensor SLATCodec::encode(const Tensor& attrs) const {
  REVGEN_CHECK(attrs.cols() == 4, "SLATCodec::encode: expects [V,4] attributes");
  Tensor rgb = slice_cols(attrs, 0, 3);
  Tensor logit = scale(slice_cols(attrs, 3, 4), 1.0 / kLogitScale);
  return enc2_.forward(silu(enc1_.forward(concat_cols({rgb, logit}))));
}

Tensor SLATCodec::decode(const Tensor& latents) const {
  REVGEN_CHECK(latents.cols() == cfg_.latent_dim, "SLATCodec::decode: latent dim mismatch");
  Tensor h = dec2_.forward(silu(dec1_.forward(latents)));
  // Sigmoid widened to [-0.1, 1.1] so exact 0/1 colors are reachable with
  // finite pre-activations; callers clamp when materializing objects.
  Tensor rgb = add_scalar(scale(sigmoid(slice_cols(h, 0, 3)), 1.2), -0.1);
  Tensor logit = scale(slice_cols(h, 3, 4), kLogitScale);
  return concat_cols({rgb, logit});
}

StructuredLatent SLATCodec::encode_appearance(const VoxelObject& obj,
                                              const SparseStructure& ss) const {
  REVGEN_CHECK(ss.resolution == obj.resolution, "encode_appearance: resolution mismatch");
  const int v = ss.count();
  std::vector<double> attrs((size_t)v * 4);
  for (int i = 0; i < v; ++i) {
    const auto& c = ss.coords[i];
    REVGEN_CHECK(c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < obj.resolution &&
                     c[1] < obj.resolution && c[2] < obj.resolution,
                 "encode_appearance: position outside grid");
    const size_t j = ss.flat(i);
    REVGEN_CHECK(obj.occupancy[j] != 0, "encode_appearance: position not occupied in object");
    attrs[(size_t)i * 4 + 0] = obj.color[j * 3 + 0];
    attrs[(size_t)i * 4 + 1] = obj.color[j * 3 + 1];
    attrs[(size_t)i * 4 + 2] = obj.color[j * 3 + 2];
    attrs[(size_t)i * 4 + 3] = obj.opacity_logit[j];
  }
  Tensor z = encode(Tensor::from_data(v, 4, std::move(attrs)));
  StructuredLatent out;
  out.positions = ss;
  out.dim = cfg_.latent_dim;
  out.latents = z.data();
  return out;
}

VoxelObject SLATCodec::decode_object(const StructuredLatent& x) const {
  const int v = x.count();
  REVGEN_CHECK(v > 0, "decode_object: empty latent");
  Tensor attrs = decode(Tensor::from_data(v, cfg_.latent_dim, x.latents));
  VoxelObject obj;
  obj.resolution = x.positions.resolution;
  const size_t cells = (size_t)obj.resolution * obj.resolution * obj.resolution;
  obj.occupancy.assign(cells, 0);
  obj.color.assign(cells * 3, 0.0);
  obj.opacity_logit.assign(cells, 0.0);
  for (int i = 0; i < v; ++i) {
    const size_t j = x.positions.flat(i);
    obj.occupancy[j] = 1;
    for (int c = 0; c < 3; ++c)
      obj.color[j * 3 + c] = std::clamp(attrs.data()[(size_t)i * 4 + c], 0.0, 1.0);
    obj.opacity_logit[j] = attrs.data()[(size_t)i * 4 + 3];
  }
  return obj;
}

void SLATCodec::save(const std::string& dir) const {
  json extra;
  extra["kind"] = "codec";
  extra["latent_dim"] = cfg_.latent_dim;
  extra["hidden"] = cfg_.hidden;
  ps_.save(dir, extra.dump());
}

std::unique_ptr<SLATCodec> SLATCodec::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "SLATCodec::load: missing manifest in '" + dir + "'");
  json manifest = json::parse(f);
  json extra = manifest.at("extra");
  SLATCodecConfig cfg;
  cfg.latent_dim = extra.at("latent_dim");
  cfg.hidden = extra.at("hidden");
  auto codec = std::make_unique<SLATCodec>(cfg, 0);
  codec->ps_.load(dir);
  return codec;
}

TrainStats train_codec(SLATCodec& codec, const std::string& dataset_dir,
                       const CodecTrainConfig& cfg) {
  DatasetManifest manifest = load_manifest(dataset_dir);
  std::vector<double> attr_pool;  // all occupied voxels of the corpus
  for (const auto& e : manifest.objects) {
    VoxelObject obj = load_gt_object((fs::path(dataset_dir) / e.dir).string());
    for (size_t i = 0; i < obj.cell_count(); ++i) {
      if (!obj.occupancy[i]) continue;
      attr_pool.push_back(obj.color[i * 3 + 0]);
      attr_pool.push_back(obj.color[i * 3 + 1]);
      attr_pool.push_back(obj.color[i * 3 + 2]);
      attr_pool.push_back(obj.opacity_logit[i]);
    }
  }
  const size_t pool = attr_pool.size() / 4;
  REVGEN_CHECK(pool > 0, "train_codec: no occupied voxels in dataset");

  RngStream rng(cfg.seed, "train_codec");
  AdamW opt(codec.params().trainable(), cfg.lr);
  TrainStats stats;
  for (int step = 0; step < cfg.steps; ++step) {
    if (step == cfg.steps * 3 / 4) opt.set_lr(cfg.lr * 0.1);  // polish phase
    // Half corpus voxels, half uniform draws over the attribute space so the
    // codec stays an identity map on unseen colors, not just corpus hues.
    std::vector<double> batch((size_t)cfg.batch * 4);
    for (int b = 0; b < cfg.batch; ++b) {
      if (b % 2 == 0) {
        const size_t pick = rng.uniform_index(pool);
        for (int c = 0; c < 4; ++c) batch[(size_t)b * 4 + c] = attr_pool[pick * 4 + c];
      } else {
        for (int c = 0; c < 3; ++c) batch[(size_t)b * 4 + c] = rng.uniform();
        batch[(size_t)b * 4 + 3] = rng.uniform(1.0, 7.0);
      }
    }
    Tensor in = Tensor::from_data(cfg.batch, 4, batch);
    Tensor rec = codec.decode(codec.encode(in));
    Tensor d = sub(rec, in);
    // Loss in normalized units (logit channel scaled down).
    std::vector<double> wrow((size_t)cfg.batch * 4, 1.0);
    for (int b = 0; b < cfg.batch; ++b) wrow[(size_t)b * 4 + 3] = 1.0 / kLogitScale;
    Tensor dw = mul(d, Tensor::from_data(cfg.batch, 4, wrow));
    Tensor loss = mean_all(mul(dw, dw));
    const double lval = loss.item();
    REVGEN_CHECK(std::isfinite(lval), "train_codec: non-finite loss");
    if (step == 0) stats.first_loss = lval;
    stats.final_loss = lval;
    if (step % 100 == 0) stats.loss_history.push_back(lval);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Flow transformers

namespace {

FlowBlock make_flow_block(ParamStore& ps, const std::string& base, const FlowConfig& cfg,
                          bool with_fusion, RngStream& rng) {
  FlowBlock b;
  b.ln_self = LayerNormLayer::make(ps, base + ".ln_self", cfg.width);
  b.ln_cross = LayerNormLayer::make(ps, base + ".ln_cross", cfg.width);
  b.ln_mlp = LayerNormLayer::make(ps, base + ".ln_mlp", cfg.width);
  b.self_attn = MultiHeadAttention::make(ps, base + ".self", cfg.width, cfg.width, cfg.heads, rng);
  b.cross_attn =
      MultiHeadAttention::make(ps, base + ".cross", cfg.width, cfg.cond_dim, cfg.heads, rng);
  b.mlp = Mlp::make(ps, base + ".mlp", cfg.width, cfg.mlp_hidden, rng);
  if (with_fusion) {
    b.fuse1 = Linear::make(ps, base + ".fuse1", cfg.width, 64, rng);
    b.fuse2 = Linear::make(ps, base + ".fuse2", 64, 1, rng);
  }
  return b;
}

Tensor timestep_tokens(const Linear& l1, const Linear& l2, double t, int dim_in) {
  Tensor emb = Tensor::from_data(1, dim_in, sincos_embedding_1d(t * 100.0, dim_in));
  return l2.forward(silu(l1.forward(emb)));  // [1, width]
}

json flow_config_json(const FlowConfig& cfg) {
  json j;
  j["width"] = cfg.width;
  j["blocks"] = cfg.blocks;
  j["heads"] = cfg.heads;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["cond_dim"] = cfg.cond_dim;
  j["cond_len"] = cfg.cond_len;
  j["ss_resolution"] = cfg.ss_resolution;
  j["ss_patch"] = cfg.ss_patch;
  j["latent_dim"] = cfg.latent_dim;
  j["cond_net_blocks"] = cfg.cond_net.blocks;
  j["cond_net_feat_dim"] = cfg.cond_net.feat_dim;
  j["cond_net_heads"] = cfg.cond_net.heads;
  j["cond_net_mlp_hidden"] = cfg.cond_net.mlp_hidden;
  return j;
}

FlowConfig flow_config_from_json(const json& j) {
  FlowConfig cfg;
  cfg.width = j.at("width");
  cfg.blocks = j.at("blocks");
  cfg.heads = j.at("heads");
  cfg.mlp_hidden = j.at("mlp_hidden");
  cfg.cond_dim = j.at("cond_dim");
  cfg.cond_len = j.at("cond_len");
  cfg.ss_resolution = j.at("ss_resolution");
  cfg.ss_patch = j.at("ss_patch");
  cfg.latent_dim = j.at("latent_dim");
  cfg.cond_net.blocks = j.at("cond_net_blocks");
  cfg.cond_net.feat_dim = j.at("cond_net_feat_dim");
  cfg.cond_net.heads = j.at("cond_net_heads");
  cfg.cond_net.mlp_hidden = j.at("cond_net_mlp_hidden");
  cfg.cond_net.token_len = cfg.cond_len;
  cfg.cond_net.dim = cfg.cond_dim;
  return cfg;
}

}  // namespace

SSFlowModel::SSFlowModel(const FlowConfig& cfg, uint64_t seed) : cfg_(cfg) {
  RngStream rng(seed, "ssflow/init");
  ConditionNetConfig cn = cfg.cond_net;
  cn.token_len = cfg.cond_len;
  cn.dim = cfg.cond_dim;
  cond_net_ = std::make_unique<ConditionNet>(cn, ps_, "cond", rng);

  const int R = cfg.ss_resolution, p = cfg.ss_patch;
  REVGEN_CHECK(R % p == 0, "SSFlowModel: patch must divide resolution");
  const int g = R / p;
  const int tokens = g * g * g;
  const int patch_ch = p * p * p;
  in_proj_ = Linear::make(ps_, "in_proj", patch_ch, cfg.width, rng);
  out_proj_ = Linear::make(ps_, "out_proj", cfg.width, patch_ch, rng);
  t_embed1_ = Linear::make(ps_, "t_embed1", 64, cfg.width, rng);
  t_embed2_ = Linear::make(ps_, "t_embed2", cfg.width, cfg.width, rng);
  for (int b = 0; b < cfg.blocks; ++b)
    blocks_.push_back(make_flow_block(ps_, "block" + std::to_string(b), cfg, false, rng));

  std::vector<std::array<double, 3>> centers;
  centers.reserve(tokens);
  for (int z = 0; z < g; ++z)
    for (int y = 0; y < g; ++y)
      for (int x = 0; x < g; ++x) centers.push_back({(double)x, (double)y, (double)z});
  pos_embed_ = sincos_positions_3d(centers, cfg.width);

  patchify_map_ = std::make_shared<std::vector<int64_t>>((size_t)tokens * patch_ch);
  unpatchify_map_ = std::make_shared<std::vector<int64_t>>((size_t)R * R * R);
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const int64_t flat = ((int64_t)z * R + y) * R + x;
        const int tok = ((z / p) * g + (y / p)) * g + (x / p);
        const int ch = ((z % p) * p + (y % p)) * p + (x % p);
        (*patchify_map_)[(size_t)tok * patch_ch + ch] = flat;
        (*unpatchify_map_)[flat] = (int64_t)tok * patch_ch + ch;
      }
}

Tensor SSFlowModel::velocity(const Tensor& x, double t, const Tensor& cond) const {
  const int R = cfg_.ss_resolution, p = cfg_.ss_patch;
  const int g = R / p;
  const int tokens = g * g * g, patch_ch = p * p * p;
  REVGEN_CHECK(x.numel() == (size_t)R * R * R && x.cols() == 1,
               "ss velocity: state must be [R^3,1]");
  REVGEN_CHECK(t >= 0.0 && t <= 1.0, "ss velocity: t outside [0,1]");
  REVGEN_CHECK(cond.defined() && cond.cols() == cfg_.cond_dim, "ss velocity: bad condition");

  Tensor tok = gather_map(x, patchify_map_, tokens, patch_ch);
  Tensor h = add(in_proj_.forward(tok), pos_embed_);
  h = add_bias(h, timestep_tokens(t_embed1_, t_embed2_, t, 64));
  for (const auto& b : blocks_) {
    Tensor n1 = b.ln_self.forward(h);
    h = add(h, b.self_attn.forward(n1, n1));
    h = add(h, b.cross_attn.forward(b.ln_cross.forward(h), cond));
    h = add(h, b.mlp.forward(b.ln_mlp.forward(h)));
  }
  Tensor out_tok = out_proj_.forward(h);  // [tokens, patch_ch]
  return gather_map(out_tok, unpatchify_map_, R * R * R, 1);
}

std::vector<double> SSFlowModel::velocity_plain(const std::vector<double>& x, double t,
                                                const Tensor& cond) const {
  Tensor xt = Tensor::from_data(static_cast<int>(x.size()), 1, x);
  return velocity(xt, t, cond).data();
}

void SSFlowModel::save(const std::string& dir) const {
  json extra = flow_config_json(cfg_);
  extra["kind"] = "ss_flow";
  ps_.save(dir, extra.dump());
}

std::unique_ptr<SSFlowModel> SSFlowModel::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "SSFlowModel::load: missing manifest in '" + dir + "'");
  json manifest = json::parse(f);
  auto model = std::make_unique<SSFlowModel>(flow_config_from_json(manifest.at("extra")), 0);
  model->ps_.load(dir);
  return model;
}

SLATFlowModel::SLATFlowModel(const FlowConfig& cfg, uint64_t seed) : cfg_(cfg) {
  RngStream rng(seed, "slatflow/init");
  ConditionNetConfig cn = cfg.cond_net;
  cn.token_len = cfg.cond_len;
  cn.dim = cfg.cond_dim;
  cond_net_ = std::make_unique<ConditionNet>(cn, ps_, "cond", rng);
  in_proj_ = Linear::make(ps_, "in_proj", cfg.latent_dim, cfg.width, rng);
  out_proj_ = Linear::make(ps_, "out_proj", cfg.width, cfg.latent_dim, rng);
  t_embed1_ = Linear::make(ps_, "t_embed1", 64, cfg.width, rng);
  t_embed2_ = Linear::make(ps_, "t_embed2", cfg.width, cfg.width, rng);
  for (int b = 0; b < cfg.blocks; ++b)
    blocks_.push_back(make_flow_block(ps_, "block" + std::to_string(b), cfg, true, rng));
}

Tensor SLATFlowModel::run(const Tensor& x, const SparseStructure& positions, double t,
                          const std::vector<Tensor>& conds, Tensor* first_block_weights) const {
  REVGEN_CHECK(!conds.empty(), "slat velocity: condition list is empty");
  REVGEN_CHECK(t >= 0.0 && t <= 1.0, "slat velocity: t outside [0,1]");
  const int v = positions.count();
  REVGEN_CHECK(x.rows() == v && x.cols() == cfg_.latent_dim,
               "slat velocity: state shape mismatch");
  const int n = static_cast<int>(conds.size());

  std::vector<std::array<double, 3>> centers;
  centers.reserve(v);
  for (int i = 0; i < v; ++i)
    centers.push_back({(double)positions.coords[i][0], (double)positions.coords[i][1],
                       (double)positions.coords[i][2]});
  Tensor h = add(in_proj_.forward(x), sincos_positions_3d(centers, cfg_.width));
  h = add_bias(h, timestep_tokens(t_embed1_, t_embed2_, t, 64));

  Tensor ones_row = Tensor::from_data(1, n, std::vector<double>(n, 1.0));
  for (size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& b = blocks_[bi];
    Tensor n1 = b.ln_self.forward(h);
    Tensor y_self = add(h, b.self_attn.forward(n1, n1));
    // Per-view cross-attention with normalized sigmoid fusion weights.
    Tensor qn = b.ln_cross.forward(y_self);
    std::vector<Tensor> branches, raw_w;
    branches.reserve(n);
    for (int k = 0; k < n; ++k) {
      Tensor ck = b.cross_attn.forward(qn, conds[k]);
      branches.push_back(ck);
      raw_w.push_back(sigmoid(b.fuse2.forward(silu(b.fuse1.forward(ck)))));  // [V,1] in (0,1)
    }
    Tensor w = n == 1 ? raw_w[0] : concat_cols(raw_w);  // [V,n]
    Tensor wsum = matmul(w, Tensor::from_data(n, 1, std::vector<double>(n, 1.0)));
    Tensor wnorm = div(w, matmul(wsum, ones_row));  // rows sum to 1
    if (first_block_weights && bi == 0) *first_block_weights = wnorm;
    Tensor fused;
    for (int k = 0; k < n; ++k) {
      Tensor contrib = mul_bcast_col(branches[k], slice_cols(wnorm, k, k + 1));
      fused = k == 0 ? contrib : add(fused, contrib);
    }
    h = add(y_self, fused);
    h = add(h, b.mlp.forward(b.ln_mlp.forward(h)));
  }
  return out_proj_.forward(h);
}

Tensor SLATFlowModel::velocity(const Tensor& x, const SparseStructure& positions, double t,
                               const std::vector<Tensor>& conds) const {
  return run(x, positions, t, conds, nullptr);
}

std::vector<double> SLATFlowModel::velocity_plain(const std::vector<double>& x,
                                                  const SparseStructure& positions, double t,
                                                  const std::vector<Tensor>& conds) const {
  Tensor xt = Tensor::from_data(positions.count(), cfg_.latent_dim, x);
  return velocity(xt, positions, t, conds).data();
}

Tensor SLATFlowModel::fusion_weights(const Tensor& x, const SparseStructure& positions, double t,
                                     const std::vector<Tensor>& conds) const {
  Tensor w;
  run(x, positions, t, conds, &w);
  return w;
}

void SLATFlowModel::save(const std::string& dir) const {
  json extra = flow_config_json(cfg_);
  extra["kind"] = "slat_flow";
  ps_.save(dir, extra.dump());
}

std::unique_ptr<SLATFlowModel> SLATFlowModel::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "SLATFlowModel::load: missing manifest in '" + dir + "'");
  json manifest = json::parse(f);
  auto model = std::make_unique<SLATFlowModel>(flow_config_from_json(manifest.at("extra")), 0);
  model->ps_.load(dir);
  return model;
}

// ---------------------------------------------------------------------------
// CFM

Tensor cfm_loss(const std::function<Tensor(const Tensor&, double)>& velocity,
                const std::vector<double>& x0, int rows, int cols, RngStream& stream) {
  REVGEN_CHECK(x0.size() == (size_t)rows * cols, "cfm_loss: x0 size mismatch");
  const double t = stream.uniform();
  std::vector<double> xt(x0.size()), target(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) {
    const double eps = stream.normal();
    xt[i] = (1.0 - t) * x0[i] + t * eps;
    target[i] = eps - x0[i];
  }
  Tensor v = velocity(Tensor::from_data(rows, cols, std::move(xt)), t);
  Tensor d = sub(v, Tensor::from_data(rows, cols, std::move(target)));
  return mean_all(mul(d, d));
}

// ---------------------------------------------------------------------------
// Stage training

namespace {

struct FlowCorpus {
  std::vector<ViewSet> views;
  std::vector<VoxelObject> objects;
};

FlowCorpus load_corpus(const std::string& dataset_dir) {
  DatasetManifest manifest = load_manifest(dataset_dir);
  REVGEN_CHECK(!manifest.objects.empty(), "train_flow: empty dataset");
  FlowCorpus c;
  for (const auto& e : manifest.objects) {
    const std::string dir = (fs::path(dataset_dir) / e.dir).string();
    c.views.push_back(load_views(dir));
    c.objects.push_back(load_gt_object(dir));
  }
  return c;
}

std::vector<int> pick_views(RngStream& rng, int available, int min_views, int max_views) {
  const int n = min_views + static_cast<int>(rng.uniform_index(max_views - min_views + 1));
  std::vector<int> pick;
  for (int i = 0; i < n; ++i) pick.push_back(static_cast<int>(rng.uniform_index(available)));
  return pick;
}

}  // namespace

TrainStats train_ss_flow(SSFlowModel& model, const EncoderModel& encoder,
                         const std::string& dataset_dir, const FlowTrainConfig& cfg) {
  FlowCorpus corpus = load_corpus(dataset_dir);
  RngStream rng(cfg.seed, "train_ss/data");
  RngStream drop_rng(cfg.seed, "train_ss/drop");
  RngStream cfm_rng(cfg.seed, "train_ss/cfm");
  AdamW opt(model.params().trainable(), cfg.lr);
  TrainStats stats;

  for (int step = 0; step < cfg.steps; ++step) {
    const size_t oi = rng.uniform_index(corpus.objects.size());
    const auto& vs = corpus.views[oi];
    std::vector<int> pick = pick_views(rng, vs.count(), cfg.min_views, cfg.max_views);
    std::vector<ImageBuffer> imgs;
    for (int vi : pick) imgs.push_back(vs.images[vi]);

    FeatureStack fs = encoder.encode(imgs);
    Tensor cond = model.cond_net().global_condition(fs);
    cond = drop_condition(cond, model.cond_net().null_condition(), drop_rng, cfg.drop_p, true);

    Array x0 = dense_from_sparse(sparse_from_object(corpus.objects[oi]));
    Tensor loss = cfm_loss(
        [&](const Tensor& x, double t) { return model.velocity(x, t, cond); }, x0.data,
        static_cast<int>(x0.data.size()), 1, cfm_rng);
    const double lval = loss.item();
    REVGEN_CHECK(std::isfinite(lval),
                 "train_ss_flow: non-finite loss at step " + std::to_string(step));
    if (step == 0) stats.first_loss = lval;
    stats.final_loss = lval;
    if (step % cfg.log_every == 0) stats.loss_history.push_back(lval);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  return stats;
}

TrainStats train_slat_flow(SLATFlowModel& model, const SLATCodec& codec,
                           const EncoderModel& encoder, const std::string& dataset_dir,
                           const FlowTrainConfig& cfg) {
  FlowCorpus corpus = load_corpus(dataset_dir);
  RngStream rng(cfg.seed, "train_slat/data");
  RngStream drop_rng(cfg.seed, "train_slat/drop");
  RngStream cfm_rng(cfg.seed, "train_slat/cfm");
  AdamW opt(model.params().trainable(), cfg.lr);
  TrainStats stats;

  // Codec targets are fixed; precompute latents per object.
  std::vector<StructuredLatent> targets;
  for (const auto& obj : corpus.objects)
    targets.push_back(codec.encode_appearance(obj, sparse_from_object(obj)));

  for (int step = 0; step < cfg.steps; ++step) {
    const size_t oi = rng.uniform_index(corpus.objects.size());
    const auto& vs = corpus.views[oi];
    std::vector<int> pick = pick_views(rng, vs.count(), cfg.min_views, cfg.max_views);
    std::vector<ImageBuffer> imgs;
    for (int vi : pick) imgs.push_back(vs.images[vi]);

    FeatureStack fs = encoder.encode(imgs);
    std::vector<Tensor> conds = model.cond_net().per_view_conditions(fs);
    if (drop_rng.uniform() < cfg.drop_p) conds = {model.cond_net().null_condition()};

    const StructuredLatent& target = targets[oi];
    Tensor loss = cfm_loss(
        [&](const Tensor& x, double t) {
          return model.velocity(x, target.positions, t, conds);
        },
        target.latents, target.count(), model.config().latent_dim, cfm_rng);
    const double lval = loss.item();
    REVGEN_CHECK(std::isfinite(lval),
                 "train_slat_flow: non-finite loss at step " + std::to_string(step));
    if (step == 0) stats.first_loss = lval;
    stats.final_loss = lval;
    if (step % cfg.log_every == 0) stats.loss_history.push_back(lval);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  return stats;
}

}  // namespace revgen
