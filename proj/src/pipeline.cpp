// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "revgen/common.hpp"
#include "revgen/plot.hpp"

namespace revgen {

namespace fs = std::filesystem;
using nlohmann::json;

GenerateModels Stages::models() const {
  GenerateModels m;
  m.encoder = encoder.get();
  m.ss_flow = ss.get();
  m.slat_flow = slat.get();
  m.codec = codec.get();
  return m;
}

void train_encoder_stage(const RunConfig& cfg, std::ostream& log) {
  EncoderModel model(cfg.encoder, cfg.seed);
  if (cfg.lora_rank > 0) model.apply_lora(cfg.lora_rank, cfg.lora_alpha, cfg.lora_dropout);
  EncoderTrainConfig tc = cfg.encoder_train;
  tc.seed = cfg.seed;
  TrainStats stats = train_encoder(model, cfg.paths.dataset_dir, tc);
  model.save(cfg.paths.encoder_ckpt);
  log << "encoder: steps=" << tc.steps << " first_loss=" << stats.first_loss
      << " final_loss=" << stats.final_loss << "\n";
}

void train_ss_stage(const RunConfig& cfg, std::ostream& log) {
  auto encoder = EncoderModel::load(cfg.paths.encoder_ckpt);
  encoder->params().freeze_all();
  FlowConfig fc = cfg.flow;
  fc.cond_net.feat_dim = cfg.encoder.dim;
  SSFlowModel model(fc, cfg.seed + 1);
  FlowTrainConfig tc = cfg.ss_train;
  tc.seed = cfg.seed;
  TrainStats stats = train_ss_flow(model, *encoder, cfg.paths.dataset_dir, tc);
  model.save(cfg.paths.ss_ckpt);
  log << "ss_flow: steps=" << tc.steps << " first_loss=" << stats.first_loss
      << " final_loss=" << stats.final_loss << "\n";
}

void train_slat_stage(const RunConfig& cfg, std::ostream& log) {
  auto encoder = EncoderModel::load(cfg.paths.encoder_ckpt);
  encoder->params().freeze_all();
  SLATCodecConfig cc = cfg.codec;
  cc.latent_dim = cfg.flow.latent_dim;
  SLATCodec codec(cc, cfg.seed + 2);
  CodecTrainConfig ctc = cfg.codec_train;
  ctc.seed = cfg.seed;
  TrainStats cstats = train_codec(codec, cfg.paths.dataset_dir, ctc);
  codec.save((fs::path(cfg.paths.slat_ckpt) / "codec").string());
  log << "codec: steps=" << ctc.steps << " first_loss=" << cstats.first_loss
      << " final_loss=" << cstats.final_loss << "\n";

  codec.params().freeze_all();
  FlowConfig fc = cfg.flow;
  fc.cond_net.feat_dim = cfg.encoder.dim;
  SLATFlowModel model(fc, cfg.seed + 3);
  FlowTrainConfig tc = cfg.slat_train;
  tc.seed = cfg.seed;
  TrainStats stats = train_slat_flow(model, codec, *encoder, cfg.paths.dataset_dir, tc);
  model.save((fs::path(cfg.paths.slat_ckpt) / "flow").string());
  log << "slat_flow: steps=" << tc.steps << " first_loss=" << stats.first_loss
      << " final_loss=" << stats.final_loss << "\n";
}

Stages load_stages(const RunConfig::Paths& paths) {
  Stages s;
  s.encoder = EncoderModel::load(paths.encoder_ckpt);
  s.encoder->params().freeze_all();
  s.ss = SSFlowModel::load(paths.ss_ckpt);
  s.slat = SLATFlowModel::load((fs::path(paths.slat_ckpt) / "flow").string());
  s.codec = SLATCodec::load((fs::path(paths.slat_ckpt) / "codec").string());
  return s;
}

const std::vector<Mat3>& octahedral_rotations() {
  static const std::vector<Mat3> rots = [] {
    std::vector<Mat3> out;
    out.push_back(Mat3::identity());
    // Enumerate signed permutation matrices with determinant +1.
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms)
      for (int sx = -1; sx <= 1; sx += 2)
        for (int sy = -1; sy <= 1; sy += 2)
          for (int sz = -1; sz <= 1; sz += 2) {
            Mat3 r;
            std::fill(r.m.begin(), r.m.end(), 0.0);
            r(0, p[0]) = sx;
            r(1, p[1]) = sy;
            r(2, p[2]) = sz;
            if (r.det() < 0.5) continue;
            bool dup = false;
            for (const auto& q : out) {
              double d = 0;
              for (int i = 0; i < 9; ++i) d += std::abs(q.m[i] - r.m[i]);
              if (d < 1e-9) dup = true;
            }
            if (!dup) out.push_back(r);
          }
    return out;
  }();
  return rots;
}

VoxelObject rotate_object(const VoxelObject& obj, const Mat3& rot) {
  const int R = obj.resolution;
  VoxelObject out;
  out.resolution = R;
  out.occupancy.assign(obj.cell_count(), 0);
  out.color.assign(obj.cell_count() * 3, 0.0);
  out.opacity_logit.assign(obj.cell_count(), 0.0);
  const double c = (R - 1) / 2.0;
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const size_t src = obj.idx(x, y, z);
        if (!obj.occupancy[src]) continue;
        const Vec3 v{x - c, y - c, z - c};
        const Vec3 r = rot * v;
        const int nx = static_cast<int>(std::lround(r.x + c));
        const int ny = static_cast<int>(std::lround(r.y + c));
        const int nz = static_cast<int>(std::lround(r.z + c));
        if (nx < 0 || ny < 0 || nz < 0 || nx >= R || ny >= R || nz >= R) continue;
        const size_t dst = out.idx(nx, ny, nz);
        out.occupancy[dst] = 1;
        for (int ch = 0; ch < 3; ++ch) out.color[dst * 3 + ch] = obj.color[src * 3 + ch];
        out.opacity_logit[dst] = obj.opacity_logit[src];
      }
  return out;
}

int best_alignment_rotation(const VoxelObject& gen, const VoxelObject& gt) {
  const auto& rots = octahedral_rotations();
  int best = 0;
  double best_iou = -1;
  for (size_t i = 0; i < rots.size(); ++i) {
    const double iou = occupancy_iou(rotate_object(gen, rots[i]), gt);
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(i);
    }
  }
  return best;
}

ObjectEval evaluate_object(const VoxelObject& gen, const VoxelObject& gt,
                           const DatasetObjectEntry& entry, int image_size,
                           const RenderConfig& rc) {
  ObjectEval ev;
  ev.id = entry.id;
  VoxelObject aligned = rotate_object(gen, octahedral_rotations()[best_alignment_rotation(gen, gt)]);
  const auto cams = novel_cameras(entry, image_size);
  double psnr_sum = 0, ssim_sum = 0;
  for (const auto& cam : cams) {
    ImageBuffer a = render(aligned, cam, image_size, rc).rgb;
    ImageBuffer b = render(gt, cam, image_size, rc).rgb;
    psnr_sum += psnr(a, b);
    ssim_sum += ssim(a, b);
  }
  ev.psnr = psnr_sum / cams.size();
  ev.ssim = ssim_sum / cams.size();
  PointCloud pa = sample_surface(aligned, 10000, entry.seed);
  PointCloud pb = sample_surface(gt, 10000, entry.seed + 1);
  ev.cd = chamfer(pa, pb);
  ev.fscore = fscore(pa, pb, 0.1);
  return ev;
}

namespace {

json object_eval_json(const ObjectEval& ev) {
  json j;
  j["id"] = ev.id;
  j["psnr"] = ev.psnr;
  j["ssim"] = ev.ssim;
  j["perceptual"] = "n/a";
  j["cd"] = ev.cd;
  j["fscore"] = ev.fscore;
  if (ev.pose.has_value()) {
    j["rre_deg"] = ev.pose->rre_deg;
    j["acc15"] = ev.pose->acc15;
    j["acc30"] = ev.pose->acc30;
    j["te"] = ev.pose->te;
  }
  return j;
}

}  // namespace

std::string EvalReport::to_json_text(const std::string& config_echo) const {
  json j;
  j["objects"] = json::array();
  for (const auto& ev : objects) j["objects"].push_back(object_eval_json(ev));
  j["aggregate"] = object_eval_json(aggregate);
  j["count"] = objects.size();
  j["config"] = json::parse(config_echo.empty() ? "{}" : config_echo);
  return j.dump(2);
}

EvalReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir) {
  DatasetManifest manifest = load_manifest(gt_dir);
  EvalReport report;
  ObjectEval agg;
  agg.id = "mean";
  PoseMetrics agg_pose;
  int pose_count = 0;
  RenderConfig rc;
  for (const auto& entry : manifest.objects) {
    const fs::path pdir = fs::path(pred_dir) / entry.id;
    if (!fs::exists(pdir / "object.bin")) continue;
    VoxelObject gen = VoxelObject::from_array(load_tensor((pdir / "object.bin").string()));
    VoxelObject gt = load_gt_object((fs::path(gt_dir) / entry.dir).string());
    ObjectEval ev = evaluate_object(gen, gt, entry, manifest.image_size, rc);
    if (fs::exists(pdir / "poses.json") &&
        fs::exists(fs::path(gt_dir) / entry.dir / "cameras.json")) {
      std::ifstream pf(pdir / "poses.json");
      json pj = json::parse(pf);
      std::vector<Camera> pred_cams, gt_cams;
      std::vector<int> used;
      for (const auto& e : pj.at("poses")) {
        if (!e.contains("camera")) continue;
        const auto& cj = e["camera"];
        Mat3 r;
        const auto rot = cj.at("rotation").get<std::vector<double>>();
        std::copy(rot.begin(), rot.end(), r.m.begin());
        const auto t = cj.at("translation").get<std::vector<double>>();
        pred_cams.push_back(Camera(cj.at("fx"), cj.at("fy"), cj.at("cx"), cj.at("cy"),
                                   cj.at("width"), cj.at("height"), r, Vec3{t[0], t[1], t[2]}));
        used.push_back(e.at("view").get<int>());
      }
      auto all_gt = load_cameras_json((fs::path(gt_dir) / entry.dir / "cameras.json").string());
      for (int vi : used)
        if (vi >= 0 && vi < static_cast<int>(all_gt.size())) gt_cams.push_back(all_gt[vi]);
      if (pred_cams.size() >= 2 && pred_cams.size() == gt_cams.size()) {
        ev.pose = pose_metrics(pred_cams, gt_cams);
        agg_pose.rre_deg += ev.pose->rre_deg;
        agg_pose.acc15 += ev.pose->acc15;
        agg_pose.acc30 += ev.pose->acc30;
        agg_pose.te += ev.pose->te;
        ++pose_count;
      }
    }
    agg.psnr += ev.psnr;
    agg.ssim += ev.ssim;
    agg.cd += ev.cd;
    agg.fscore += ev.fscore;
    report.objects.push_back(std::move(ev));
  }
  REVGEN_CHECK(!report.objects.empty(), "evaluate: no matching predictions in '" + pred_dir + "'");
  const double n = static_cast<double>(report.objects.size());
  agg.psnr /= n;
  agg.ssim /= n;
  agg.cd /= n;
  agg.fscore /= n;
  if (pose_count > 0) {
    agg_pose.rre_deg /= pose_count;
    agg_pose.acc15 /= pose_count;
    agg_pose.acc30 /= pose_count;
    agg_pose.te /= pose_count;
    agg.pose = agg_pose;
  }
  report.aggregate = agg;
  return report;
}

std::vector<int> strided_view_pick(int available, int wanted) {
  REVGEN_CHECK(available >= 1, "strided_view_pick: no views");
  wanted = std::min(wanted, available);
  std::vector<int> pick;
  for (int i = 0; i < wanted; ++i)
    pick.push_back(static_cast<int>((size_t)i * available / wanted));
  return pick;
}

GenerateResult generate_from_dir(const std::string& object_dir, const Stages& stages,
                                 const SamplerConfig& cfg, uint64_t seed, int n_views) {
  ViewSet all = load_views(object_dir);
  ViewSet subset;
  for (int vi : strided_view_pick(all.count(), n_views)) {
    subset.images.push_back(all.images[vi]);
    if (!all.cameras.empty()) subset.cameras.push_back(all.cameras[vi]);
    if (!all.depths.empty()) subset.depths.push_back(all.depths[vi]);
  }
  return generate(subset, stages.models(), cfg, seed);
}

double input_view_psnr(const VoxelObject& obj, const std::vector<PoseEstimate>& poses,
                       const ViewSet& inputs, const RenderConfig& rc) {
  REVGEN_CHECK(poses.size() == inputs.images.size(), "input_view_psnr: count mismatch");
  double acc = 0;
  int n = 0;
  for (size_t i = 0; i < poses.size(); ++i) {
    if (!poses[i].camera.has_value()) continue;
    ImageBuffer r = render(obj, *poses[i].camera, inputs.images[i].width, rc).rgb;
    acc += psnr(r, inputs.images[i]);
    ++n;
  }
  return n > 0 ? acc / n : 0.0;
}

namespace {

AblationRow eval_row(const std::string& name, const RunConfig& cfg, const Stages& stages,
                     const DatasetManifest& manifest, const std::string& eval_dir, int n_objects,
                     int n_views, bool ggc, bool pvc, bool rvc, std::ostream& log) {
  AblationRow row;
  row.name = name;
  row.ggc = ggc;
  row.pvc = pvc;
  row.rvc = rvc;
  SamplerConfig sc = cfg.sampler;
  sc.ggc_enabled = ggc;
  sc.pvc_enabled = pvc;
  sc.rvc_enabled = rvc;
  if (!rvc) sc.alpha = 0.0;
  int count = 0;
  for (int i = 0; i < n_objects && i < static_cast<int>(manifest.objects.size()); ++i) {
    const auto& entry = manifest.objects[i];
    const std::string odir = (fs::path(eval_dir) / entry.dir).string();
    GenerateResult res = generate_from_dir(odir, stages, sc, cfg.seed + entry.seed, n_views);
    VoxelObject gt = load_gt_object(odir);
    ObjectEval ev = evaluate_object(res.object, gt, entry, manifest.image_size, sc.render);
    ViewSet all = load_views(odir);
    ViewSet subset;
    for (int vi : strided_view_pick(all.count(), n_views))
      subset.images.push_back(all.images[vi]);
    row.psnr += ev.psnr;
    row.ssim += ev.ssim;
    row.cd += ev.cd;
    row.fscore += ev.fscore;
    row.input_psnr += input_view_psnr(res.object, res.poses, subset, sc.render);
    ++count;
  }
  REVGEN_CHECK(count > 0, "ablate: no evaluation objects found");
  row.psnr /= count;
  row.ssim /= count;
  row.cd /= count;
  row.fscore /= count;
  row.input_psnr /= count;
  log << "ablation row " << name << ": psnr=" << row.psnr << " ssim=" << row.ssim
      << " cd=" << row.cd << " fscore=" << row.fscore << " input_psnr=" << row.input_psnr
      << "\n";
  return row;
}

}  // namespace

AblationResult run_ablation(const RunConfig& cfg, const Stages& stages,
                            const std::string& eval_dir, int n_objects, int n_views,
                            const std::string& out_dir, std::ostream& log) {
  DatasetManifest manifest = load_manifest(eval_dir);
  AblationResult result;

  struct Toggle {
    const char* name;
    bool ggc, pvc, rvc;
  };
  const Toggle toggles[4] = {{"(a)", false, false, false},
                             {"(b)", true, false, false},
                             {"(c)", true, true, false},
                             {"(d)", true, true, true}};
  // Automated config-diff check: after normalizing the declared toggles the
  // row configs must be identical to the base config.
  {
    const SamplerConfig& base = cfg.sampler;
    for (const auto& t : toggles) {
      SamplerConfig sc = base;
      sc.ggc_enabled = t.ggc;
      sc.pvc_enabled = t.pvc;
      sc.rvc_enabled = t.rvc;
      if (!t.rvc) sc.alpha = 0.0;
      auto fingerprint = [](const SamplerConfig& s) {
        std::ostringstream os;
        os << s.ss_steps << '/' << s.slat_steps << '/' << s.ss_cfg << '/' << s.slat_cfg << '/'
           << s.rvc_start << '/' << s.view_discard_threshold << '/' << s.loss_plugin << '/'
           << s.render.density_scale << '/' << s.render.steps_per_axis;
        return os.str();
      };
      REVGEN_CHECK(fingerprint(sc) == fingerprint(base),
                   "ablate: row config drifted outside the declared toggles");
    }
  }
  for (const auto& t : toggles)
    result.rows.push_back(eval_row(t.name, cfg, stages, manifest, eval_dir, n_objects, n_views,
                                   t.ggc, t.pvc, t.rvc, log));

  for (int views : {2, 4, 6, 8}) {
    SweepPoint pt;
    pt.views = views;
    int count = 0;
    SamplerConfig sc = cfg.sampler;
    for (int i = 0; i < n_objects && i < static_cast<int>(manifest.objects.size()); ++i) {
      const auto& entry = manifest.objects[i];
      const std::string odir = (fs::path(eval_dir) / entry.dir).string();
      GenerateResult res = generate_from_dir(odir, stages, sc, cfg.seed + entry.seed, views);
      VoxelObject gt = load_gt_object(odir);
      ObjectEval ev = evaluate_object(res.object, gt, entry, manifest.image_size, sc.render);
      pt.psnr += ev.psnr;
      pt.ssim += ev.ssim;
      pt.cd += ev.cd;
      pt.fscore += ev.fscore;
      ++count;
    }
    pt.psnr /= count;
    pt.ssim /= count;
    pt.cd /= count;
    pt.fscore /= count;
    log << "view sweep n=" << views << ": psnr=" << pt.psnr << " fscore=" << pt.fscore << "\n";
    result.sweep.push_back(pt);
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    // Table.
    std::ofstream table(fs::path(out_dir) / "table.txt");
    table << std::fixed << std::setprecision(3);
    table << "row   GGC PVC RVC    PSNR    SSIM      CD  F-score  in-PSNR\n";
    for (const auto& r : result.rows)
      table << std::setw(4) << r.name << "  " << (r.ggc ? " on" : "off") << " "
            << (r.pvc ? " on" : "off") << " " << (r.rvc ? " on" : "off") << "  " << std::setw(7)
            << r.psnr << " " << std::setw(7) << r.ssim << " " << std::setw(7) << r.cd << " "
            << std::setw(7) << r.fscore << "  " << std::setw(7) << r.input_psnr << "\n";
    table << "\nviews    PSNR    SSIM      CD  F-score\n";
    for (const auto& p : result.sweep)
      table << std::setw(5) << p.views << " " << std::setw(7) << p.psnr << " " << std::setw(7)
            << p.ssim << " " << std::setw(7) << p.cd << " " << std::setw(7) << p.fscore << "\n";
    // JSON.
    json j;
    j["rows"] = json::array();
    for (const auto& r : result.rows)
      j["rows"].push_back({{"name", r.name},
                           {"ggc", r.ggc},
                           {"pvc", r.pvc},
                           {"rvc", r.rvc},
                           {"psnr", r.psnr},
                           {"ssim", r.ssim},
                           {"cd", r.cd},
                           {"fscore", r.fscore},
                           {"input_psnr", r.input_psnr}});
    j["sweep"] = json::array();
    for (const auto& p : result.sweep)
      j["sweep"].push_back({{"views", p.views},
                            {"psnr", p.psnr},
                            {"ssim", p.ssim},
                            {"cd", p.cd},
                            {"fscore", p.fscore}});
    std::ofstream jf(fs::path(out_dir) / "ablation.json");
    jf << j.dump(2) << "\n";
    // Plots.
    {
      PlotSeries s;
      s.label = "PSNR";
      for (const auto& p : result.sweep) {
        s.x.push_back(p.views);
        s.y.push_back(p.psnr);
      }
      save_png((fs::path(out_dir) / "psnr_vs_views.png").string(),
               line_plot({s}, "PSNR VS VIEW COUNT", "VIEWS", "PSNR"));
    }
    {
      std::vector<std::string> labels;
      std::vector<double> values;
      for (const auto& r : result.rows) {
        labels.push_back(r.name);
        values.push_back(r.psnr);
      }
      save_png((fs::path(out_dir) / "ablation_psnr.png").string(),
               bar_chart(labels, values, "ABLATION PSNR", "PSNR"));
    }
  }
  return result;
}

std::string start_run(const std::string& subcommand, const RunConfig& cfg) {
  const std::string cfg_text = cfg.to_json();
  std::ostringstream id;
  id << subcommand << "-" << std::hex << std::setw(8) << std::setfill('0')
     << (fnv1a(cfg_text) ^ fnv1a(subcommand)) % 0x100000000ull;
  const fs::path dir = fs::path(runs_root()) / id.str();
  fs::create_directories(dir);
  std::ofstream f(dir / "config.json");
  f << cfg_text << "\n";
  return dir.string();
}

void write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  fs::create_directories(out_dir);
  // Collect rows: any run dir with report.json (evaluate) or ablation.json.
  struct Row {
    std::string id;
    json data;
  };
  std::vector<Row> rows;
  std::vector<std::string> missing;
  for (const auto& dir : run_dirs) {
    bool found = false;
    for (const char* name : {"report.json", "ablation.json", "summary.json"}) {
      const fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) {
        std::ifstream f(p);
        rows.push_back({fs::path(dir).filename().string(), json::parse(f)});
        found = true;
        break;
      }
    }
    if (!found) missing.push_back(dir);
  }
  if (!missing.empty()) {
    std::string all;
    for (const auto& m : missing) all += m + " ";
    REVGEN_FAIL("report: missing metric reports in: " + all);
  }

  // Union of scalar metric columns.
  std::vector<std::string> columns;
  auto add_col = [&](const std::string& c) {
    if (std::find(columns.begin(), columns.end(), c) == columns.end()) columns.push_back(c);
  };
  auto scalars_of = [](const json& j) {
    json out = json::object();
    const json* agg = j.contains("aggregate") ? &j["aggregate"] : &j;
    for (const auto& [k, v] : agg->items())
      if (v.is_number()) out[k] = v;
    return out;
  };
  std::vector<json> row_scalars;
  for (const auto& r : rows) {
    json s = scalars_of(r.data);
    row_scalars.push_back(s);
    for (const auto& [k, v] : s.items()) {
      (void)v;
      add_col(k);
    }
  }

  std::ofstream table(fs::path(out_dir) / "report.txt");
  table << std::setw(28) << std::left << "run";
  for (const auto& c : columns) table << std::setw(12) << std::right << c;
  table << "\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    table << std::setw(28) << std::left << rows[i].id;
    for (const auto& c : columns) {
      if (row_scalars[i].contains(c)) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(4) << row_scalars[i][c].get<double>();
        table << std::setw(12) << std::right << v.str();
      } else {
        table << std::setw(12) << std::right << "n/a";
      }
    }
    table << "\n";
  }

  // Plots: PSNR bar over runs; any sweep found becomes a line plot; RVC
  // trajectory losses if a trajectory file sits alongside.
  {
    std::vector<std::string> labels;
    std::vector<double> values;
    for (size_t i = 0; i < rows.size(); ++i)
      if (row_scalars[i].contains("psnr")) {
        labels.push_back(std::to_string(i));
        values.push_back(row_scalars[i]["psnr"].get<double>());
      }
    if (!values.empty())
      save_png((fs::path(out_dir) / "psnr_runs.png").string(),
               bar_chart(labels, values, "PSNR BY RUN", "PSNR"));
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].data.contains("sweep")) continue;
    PlotSeries s;
    s.label = "PSNR";
    for (const auto& p : rows[i].data["sweep"]) {
      s.x.push_back(p.at("views").get<double>());
      s.y.push_back(p.at("psnr").get<double>());
    }
    save_png((fs::path(out_dir) / ("sweep_" + rows[i].id + ".png")).string(),
             line_plot({s}, "PSNR VS VIEW COUNT", "VIEWS", "PSNR"));
  }
  for (const auto& dir : run_dirs) {
    const fs::path traj = fs::path(dir) / "trajectory.jsonl";
    if (!fs::exists(traj)) continue;
    std::ifstream f(traj);
    PlotSeries s;
    s.label = "RVC LOSS";
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      if (j.contains("per_view_loss") && j.contains("t")) {
        double mean = 0;
        for (const auto& v : j["per_view_loss"]) mean += v.get<double>();
        mean /= std::max<size_t>(1, j["per_view_loss"].size());
        s.x.push_back(j["t"].get<double>());
        s.y.push_back(mean);
      }
    }
    if (!s.x.empty())
      save_png((fs::path(out_dir) / ("rvc_" + fs::path(dir).filename().string() + ".png")).string(),
               line_plot({s}, "RVC LOSS ALONG THE TRAJECTORY", "T", "LOSS"));
  }
}

}  // namespace revgen
