// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"
#include "revgen/common.hpp"

namespace revgen {

using nlohmann::json;

namespace {

// Schema checks: every known key has a type and (for numbers) a range.
void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    REVGEN_CHECK(allowed.count(key) != 0, "config: unknown key '" + where + key + "'");
  }
}

int get_int(const json& j, const char* key, int fallback, int lo, int hi,
            const std::string& where) {
  if (!j.contains(key)) return fallback;
  REVGEN_CHECK(j[key].is_number_integer(), "config: '" + where + key + "' must be an integer");
  const int v = j[key].get<int>();
  REVGEN_CHECK(v >= lo && v <= hi, "config: '" + where + key + "' outside [" +
                                       std::to_string(lo) + "," + std::to_string(hi) + "]");
  return v;
}

double get_num(const json& j, const char* key, double fallback, double lo, double hi,
               const std::string& where) {
  if (!j.contains(key)) return fallback;
  REVGEN_CHECK(j[key].is_number(), "config: '" + where + key + "' must be a number");
  const double v = j[key].get<double>();
  REVGEN_CHECK(v >= lo && v <= hi, "config: '" + where + key + "' out of range");
  return v;
}

std::string get_str(const json& j, const char* key, const std::string& fallback,
                    const std::string& where) {
  if (!j.contains(key)) return fallback;
  REVGEN_CHECK(j[key].is_string(), "config: '" + where + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["dataset"] = {{"n_objects", dataset.n_objects},
                  {"n_views", dataset.n_views},
                  {"image_size", dataset.image_size},
                  {"resolution", dataset.resolution}};
  j["encoder"] = {{"image_size", encoder.image_size},
                  {"patch", encoder.patch},
                  {"dim", encoder.dim},
                  {"layers", encoder.layers},
                  {"heads", encoder.heads},
                  {"mlp_hidden", encoder.mlp_hidden},
                  {"train_steps", encoder_train.steps},
                  {"lr", encoder_train.lr},
                  {"min_views", encoder_train.min_views},
                  {"max_views", encoder_train.max_views},
                  {"lora_rank", lora_rank},
                  {"lora_alpha", lora_alpha},
                  {"lora_dropout", lora_dropout}};
  j["flow"] = {{"width", flow.width},
               {"blocks", flow.blocks},
               {"heads", flow.heads},
               {"mlp_hidden", flow.mlp_hidden},
               {"cond_dim", flow.cond_dim},
               {"cond_len", flow.cond_len},
               {"ss_resolution", flow.ss_resolution},
               {"ss_patch", flow.ss_patch},
               {"latent_dim", flow.latent_dim},
               {"ss_train_steps", ss_train.steps},
               {"slat_train_steps", slat_train.steps},
               {"lr", ss_train.lr},
               {"drop_p", ss_train.drop_p},
               {"codec_hidden", codec.hidden},
               {"codec_steps", codec_train.steps},
               {"codec_lr", codec_train.lr}};
  j["sampler"] = {{"ss_steps", sampler.ss_steps},
                  {"slat_steps", sampler.slat_steps},
                  {"ss_cfg", sampler.ss_cfg},
                  {"slat_cfg", sampler.slat_cfg},
                  {"alpha", sampler.alpha},
                  {"rvc_start", sampler.rvc_start},
                  {"view_discard_threshold", sampler.view_discard_threshold},
                  {"loss_plugin", sampler.loss_plugin},
                  {"density_scale", sampler.render.density_scale}};
  j["paths"] = {{"dataset_dir", paths.dataset_dir},
                {"eval_dataset_dir", paths.eval_dataset_dir},
                {"encoder_ckpt", paths.encoder_ckpt},
                {"ss_ckpt", paths.ss_ckpt},
                {"slat_ckpt", paths.slat_ckpt}};
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    REVGEN_FAIL(std::string("config: invalid JSON (") + e.what() + ")");
  }
  RunConfig c;
  check_keys(j, "", {"seed", "dataset", "encoder", "flow", "sampler", "paths"});
  if (j.contains("seed")) {
    REVGEN_CHECK(j["seed"].is_number_unsigned() || j["seed"].is_number_integer(),
                 "config: 'seed' must be an integer");
    c.seed = j["seed"].get<uint64_t>();
  }
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, "dataset.", {"n_objects", "n_views", "image_size", "resolution"});
    c.dataset.n_objects = get_int(d, "n_objects", c.dataset.n_objects, 1, 100000, "dataset.");
    c.dataset.n_views = get_int(d, "n_views", c.dataset.n_views, 1, 256, "dataset.");
    c.dataset.image_size = get_int(d, "image_size", c.dataset.image_size, 16, 512, "dataset.");
    c.dataset.resolution = get_int(d, "resolution", c.dataset.resolution, 4, 64, "dataset.");
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e, "encoder.",
               {"image_size", "patch", "dim", "layers", "heads", "mlp_hidden", "train_steps",
                "lr", "min_views", "max_views", "lora_rank", "lora_alpha", "lora_dropout"});
    c.encoder.image_size = get_int(e, "image_size", c.encoder.image_size, 16, 512, "encoder.");
    c.encoder.patch = get_int(e, "patch", c.encoder.patch, 2, 64, "encoder.");
    c.encoder.dim = get_int(e, "dim", c.encoder.dim, 8, 1024, "encoder.");
    c.encoder.layers = get_int(e, "layers", c.encoder.layers, 2, 48, "encoder.");
    c.encoder.heads = get_int(e, "heads", c.encoder.heads, 1, 16, "encoder.");
    c.encoder.mlp_hidden = get_int(e, "mlp_hidden", c.encoder.mlp_hidden, 8, 4096, "encoder.");
    c.encoder_train.steps = get_int(e, "train_steps", c.encoder_train.steps, 0, 1000000,
                                    "encoder.");
    c.encoder_train.lr = get_num(e, "lr", c.encoder_train.lr, 0.0, 1.0, "encoder.");
    c.encoder_train.min_views = get_int(e, "min_views", c.encoder_train.min_views, 1, 16,
                                        "encoder.");
    c.encoder_train.max_views = get_int(e, "max_views", c.encoder_train.max_views, 1, 16,
                                        "encoder.");
    c.lora_rank = get_int(e, "lora_rank", c.lora_rank, 0, 1024, "encoder.");
    c.lora_alpha = get_num(e, "lora_alpha", c.lora_alpha, 0.0, 4096.0, "encoder.");
    c.lora_dropout = get_num(e, "lora_dropout", c.lora_dropout, 0.0, 0.999, "encoder.");
  }
  if (j.contains("flow")) {
    const json& f = j["flow"];
    check_keys(f, "flow.",
               {"width", "blocks", "heads", "mlp_hidden", "cond_dim", "cond_len",
                "ss_resolution", "ss_patch", "latent_dim", "ss_train_steps", "slat_train_steps",
                "lr", "drop_p", "codec_hidden", "codec_steps", "codec_lr"});
    c.flow.width = get_int(f, "width", c.flow.width, 8, 2048, "flow.");
    c.flow.blocks = get_int(f, "blocks", c.flow.blocks, 1, 48, "flow.");
    c.flow.heads = get_int(f, "heads", c.flow.heads, 1, 16, "flow.");
    c.flow.mlp_hidden = get_int(f, "mlp_hidden", c.flow.mlp_hidden, 8, 8192, "flow.");
    c.flow.cond_dim = get_int(f, "cond_dim", c.flow.cond_dim, 8, 1024, "flow.");
    c.flow.cond_len = get_int(f, "cond_len", c.flow.cond_len, 1, 1024, "flow.");
    c.flow.ss_resolution = get_int(f, "ss_resolution", c.flow.ss_resolution, 4, 64, "flow.");
    c.flow.ss_patch = get_int(f, "ss_patch", c.flow.ss_patch, 1, 8, "flow.");
    c.flow.latent_dim = get_int(f, "latent_dim", c.flow.latent_dim, 1, 256, "flow.");
    c.ss_train.steps = get_int(f, "ss_train_steps", c.ss_train.steps, 0, 10000000, "flow.");
    c.slat_train.steps = get_int(f, "slat_train_steps", c.slat_train.steps, 0, 10000000, "flow.");
    c.ss_train.lr = get_num(f, "lr", c.ss_train.lr, 0.0, 1.0, "flow.");
    c.slat_train.lr = c.ss_train.lr;
    c.ss_train.drop_p = get_num(f, "drop_p", c.ss_train.drop_p, 0.0, 1.0, "flow.");
    c.slat_train.drop_p = c.ss_train.drop_p;
    c.codec.hidden = get_int(f, "codec_hidden", c.codec.hidden, 4, 1024, "flow.");
    c.codec.latent_dim = c.flow.latent_dim;
    c.codec_train.steps = get_int(f, "codec_steps", c.codec_train.steps, 0, 10000000, "flow.");
    c.codec_train.lr = get_num(f, "codec_lr", c.codec_train.lr, 0.0, 1.0, "flow.");
  }
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    check_keys(s, "sampler.",
               {"ss_steps", "slat_steps", "ss_cfg", "slat_cfg", "alpha", "rvc_start",
                "view_discard_threshold", "loss_plugin", "density_scale"});
    c.sampler.ss_steps = get_int(s, "ss_steps", c.sampler.ss_steps, 1, 10000, "sampler.");
    c.sampler.slat_steps = get_int(s, "slat_steps", c.sampler.slat_steps, 1, 10000, "sampler.");
    c.sampler.ss_cfg = get_num(s, "ss_cfg", c.sampler.ss_cfg, 0.0, 100.0, "sampler.");
    c.sampler.slat_cfg = get_num(s, "slat_cfg", c.sampler.slat_cfg, 0.0, 100.0, "sampler.");
    c.sampler.alpha = get_num(s, "alpha", c.sampler.alpha, 0.0, 100.0, "sampler.");
    c.sampler.rvc_start = get_num(s, "rvc_start", c.sampler.rvc_start, 0.0, 1.0, "sampler.");
    c.sampler.view_discard_threshold = get_num(s, "view_discard_threshold",
                                               c.sampler.view_discard_threshold, 1e-308, 1.0,
                                               "sampler.");
    c.sampler.loss_plugin = get_str(s, "loss_plugin", c.sampler.loss_plugin, "sampler.");
    c.sampler.render.density_scale =
        get_num(s, "density_scale", c.sampler.render.density_scale, 1.0, 10000.0, "sampler.");
  }
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths.",
               {"dataset_dir", "eval_dataset_dir", "encoder_ckpt", "ss_ckpt", "slat_ckpt"});
    c.paths.dataset_dir = get_str(p, "dataset_dir", c.paths.dataset_dir, "paths.");
    c.paths.eval_dataset_dir = get_str(p, "eval_dataset_dir", c.paths.eval_dataset_dir, "paths.");
    c.paths.encoder_ckpt = get_str(p, "encoder_ckpt", c.paths.encoder_ckpt, "paths.");
    c.paths.ss_ckpt = get_str(p, "ss_ckpt", c.paths.ss_ckpt, "paths.");
    c.paths.slat_ckpt = get_str(p, "slat_ckpt", c.paths.slat_ckpt, "paths.");
  }
  // Cross-field constraints.
  REVGEN_CHECK(c.encoder.image_size % c.encoder.patch == 0,
               "config: encoder.patch must divide encoder.image_size");
  REVGEN_CHECK(c.encoder.dim % c.encoder.heads == 0,
               "config: encoder.heads must divide encoder.dim");
  REVGEN_CHECK(c.flow.width % c.flow.heads == 0, "config: flow.heads must divide flow.width");
  REVGEN_CHECK(c.flow.ss_resolution % c.flow.ss_patch == 0,
               "config: flow.ss_patch must divide flow.ss_resolution");
  REVGEN_CHECK(c.encoder_train.min_views <= c.encoder_train.max_views,
               "config: encoder.min_views must not exceed encoder.max_views");
  c.flow.cond_net.feat_dim = c.encoder.dim;
  c.sampler.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  if (path.empty()) return RunConfig::from_json_text("{}");
  std::ifstream f(path);
  REVGEN_CHECK(f.good(), "config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path);
  REVGEN_CHECK(f.good(), "config: cannot write '" + path + "'");
  f << to_json() << "\n";
}

std::string runs_root() {
  const char* env = std::getenv("REVGEN_RUNS");
  return env && *env ? env : "runs";
}

}  // namespace revgen
