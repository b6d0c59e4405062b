// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/nn.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "revgen/common.hpp"
#include "revgen/tensor_io.hpp"

namespace revgen {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor ParamStore::create(const std::string& name, int rows, int cols, double stddev,
                          RngStream& rng, bool trainable) {
  RngStream sub = rng.fork(name);
  Tensor t = Tensor::randn(rows, cols, sub, stddev, trainable);
  params_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::create_zeros(const std::string& name, int rows, int cols, bool trainable) {
  Tensor t = Tensor::zeros(rows, cols, trainable);
  params_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::create_const(const std::string& name, int rows, int cols, double value,
                                bool trainable) {
  Tensor t = Tensor::from_data(rows, cols, std::vector<double>((size_t)rows * cols, value),
                               trainable);
  params_.emplace_back(name, t);
  return t;
}

std::vector<Tensor> ParamStore::trainable() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_)
    if (t.requires_grad()) out.push_back(t);
  return out;
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  REVGEN_FAIL("ParamStore: no parameter named '" + name + "'");
}

namespace {
std::string tensor_filename(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (!isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s + ".bin";
}
}  // namespace

void ParamStore::save(const std::string& dir, const std::string& extra_json) const {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "revgen-ckpt-1";
  manifest["extra"] = json::parse(extra_json);
  json tensors = json::array();
  for (const auto& [name, t] : params_) {
    Array a;
    a.shape = {t.rows(), t.cols()};
    a.data = t.data();
    const std::string file = tensor_filename(name);
    save_tensor((fs::path(dir) / file).string(), a);
    tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"file", file}});
  }
  manifest["tensors"] = tensors;
  std::ofstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "ParamStore::save: cannot write manifest in '" + dir + "'");
  f << manifest.dump(2) << "\n";
}

std::string ParamStore::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  REVGEN_CHECK(f.good(), "ParamStore::load: missing manifest in '" + dir + "'");
  json manifest = json::parse(f);
  REVGEN_CHECK(manifest.value("format", "") == "revgen-ckpt-1",
               "ParamStore::load: unknown checkpoint format in '" + dir + "'");
  for (const auto& entry : manifest["tensors"]) {
    const std::string name = entry["name"];
    Tensor t = find(name);
    Array a = load_tensor((fs::path(dir) / entry["file"].get<std::string>()).string());
    REVGEN_CHECK(a.shape.size() == 2 && a.shape[0] == t.rows() && a.shape[1] == t.cols(),
                 "ParamStore::load: shape mismatch for '" + name + "'");
    t.data() = a.data;
  }
  return manifest["extra"].dump();
}

uint64_t ParamStore::checksum() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& [name, t] : params_) {
    h = fnv1a(name.data(), name.size(), h);
    for (double v : t.data()) {
      float x = static_cast<float>(v);
      h = fnv1a(&x, sizeof(x), h);
    }
  }
  return h;
}

void ParamStore::freeze_all() {
  for (auto& [name, t] : params_) t.node()->requires_grad = false;
}

Linear Linear::make(ParamStore& ps, const std::string& name, int in, int out, RngStream& rng) {
  Linear l;
  l.w = ps.create(name + ".w", out, in, 1.0 / std::sqrt((double)in), rng);
  l.b = ps.create_zeros(name + ".b", 1, out);
  return l;
}

Tensor Linear::forward(const Tensor& x, RngStream* lora_drop) const {
  Tensor y = add_bias(matmul_nt(x, w), b);
  if (lora_a.defined()) {
    Tensor xin = x;
    if (lora_dropout > 0.0 && lora_drop) xin = dropout(xin, lora_dropout, *lora_drop);
    y = add(y, scale(matmul_nt(matmul_nt(xin, lora_a), lora_b), lora_scale));
  }
  return y;
}

LayerNormLayer LayerNormLayer::make(ParamStore& ps, const std::string& name, int dim) {
  LayerNormLayer ln;
  ln.gamma = ps.create_const(name + ".gamma", 1, dim, 1.0);
  ln.beta = ps.create_zeros(name + ".beta", 1, dim);
  return ln;
}

Mlp Mlp::make(ParamStore& ps, const std::string& name, int dim, int hidden, RngStream& rng) {
  Mlp m;
  m.fc1 = Linear::make(ps, name + ".fc1", dim, hidden, rng);
  m.fc2 = Linear::make(ps, name + ".fc2", hidden, dim, rng);
  return m;
}

MultiHeadAttention MultiHeadAttention::make(ParamStore& ps, const std::string& name, int dim,
                                            int kv_dim, int heads, RngStream& rng) {
  REVGEN_CHECK(dim % heads == 0, "MultiHeadAttention: dim must divide by heads");
  MultiHeadAttention a;
  a.heads = heads;
  a.q = Linear::make(ps, name + ".q", dim, dim, rng);
  a.k = Linear::make(ps, name + ".k", kv_dim, dim, rng);
  a.v = Linear::make(ps, name + ".v", kv_dim, dim, rng);
  a.o = Linear::make(ps, name + ".o", dim, dim, rng);
  return a;
}

Tensor MultiHeadAttention::forward(const Tensor& qx, const Tensor& kvx,
                                   RngStream* lora_drop) const {
  const int dim = q.out_features();
  const int dh = dim / heads;
  Tensor Q = q.forward(qx, lora_drop);
  Tensor K = k.forward(kvx, lora_drop);
  Tensor V = v.forward(kvx, lora_drop);
  const double inv_sqrt = 1.0 / std::sqrt((double)dh);
  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor Qh = slice_cols(Q, h * dh, (h + 1) * dh);
    Tensor Kh = slice_cols(K, h * dh, (h + 1) * dh);
    Tensor Vh = slice_cols(V, h * dh, (h + 1) * dh);
    Tensor scores = scale(matmul_nt(Qh, Kh), inv_sqrt);
    Tensor p = softmax_rows(scores);
    head_outs.push_back(matmul(p, Vh));
  }
  return o.forward(concat_cols(head_outs), lora_drop);
}

AdamW::AdamW(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps,
             double weight_decay)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      wd_(weight_decay) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].numel(), 0.0);
    v_[i].assign(params_[i].numel(), 0.0);
  }
}

void AdamW::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, step_);
  const double bc2 = 1.0 - std::pow(beta2_, step_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (p.grad().size() != p.numel()) continue;  // never touched this step
    auto& val = p.data();
    auto& g = p.grad();
    for (size_t j = 0; j < val.size(); ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      val[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * val[j]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Tensor dropout(const Tensor& x, double p, RngStream& stream) {
  REVGEN_CHECK(p >= 0.0 && p < 1.0, "dropout: p out of range");
  if (p == 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  const double keep = 1.0 - p;
  for (auto& m : *mask) m = stream.uniform() < p ? 0.0 : 1.0 / keep;
  std::vector<double> out(x.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * (*mask)[i];
  return custom_op(x.rows(), x.cols(), std::move(out), {x}, [mask](TensorNode& self) {
    auto& par = self.parents[0];
    if (!par->requires_grad) return;
    for (size_t i = 0; i < self.numel(); ++i) par->grad[i] += self.grad[i] * (*mask)[i];
  });
}

std::vector<double> sincos_embedding_1d(double pos, int dim, double max_period) {
  std::vector<double> out(dim, 0.0);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(max_period) * i / std::max(1, half - 1));
    out[i] = std::sin(pos * freq);
    out[half + i] = std::cos(pos * freq);
  }
  return out;
}

Tensor sincos_grid_2d(int h, int w, int dim) {
  const int half = dim / 2;
  std::vector<double> data((size_t)h * w * dim, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto ey = sincos_embedding_1d(y, half);
      auto ex = sincos_embedding_1d(x, dim - half);
      double* row = data.data() + ((size_t)y * w + x) * dim;
      std::copy(ey.begin(), ey.end(), row);
      std::copy(ex.begin(), ex.end(), row + half);
    }
  return Tensor::from_data(h * w, dim, std::move(data));
}

Tensor sincos_positions_3d(const std::vector<std::array<double, 3>>& pos, int dim) {
  const int per_axis = dim / 3;
  std::vector<double> data(pos.size() * dim, 0.0);
  for (size_t i = 0; i < pos.size(); ++i) {
    double* row = data.data() + i * dim;
    for (int ax = 0; ax < 3; ++ax) {
      auto e = sincos_embedding_1d(pos[i][ax], per_axis);
      std::copy(e.begin(), e.end(), row + ax * per_axis);
    }
  }
  return Tensor::from_data(static_cast<int>(pos.size()), dim, std::move(data));
}

}  // namespace revgen
