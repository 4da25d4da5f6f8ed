// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "svcdiff/error.hpp"
#include "svcdiff/rng.hpp"

namespace svcdiff {
namespace {

using Eigen::Index;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor silu(const Tensor& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Tensor silu_grad(const Tensor& x) {
  return x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

Eigen::MatrixXd uniform_matrix(CounterRng& rng, Index rows, Index cols, double bound) {
  Eigen::MatrixXd m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

DenseLayer make_dense(CounterRng& rng, int out, int in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {uniform_matrix(rng, out, in, bound), Eigen::VectorXd::Zero(out)};
}

void append(std::vector<std::span<double>>& out, Eigen::MatrixXd& m) { out.emplace_back(m.data(), m.size()); }
void append(std::vector<std::span<double>>& out, Eigen::VectorXd& v) { out.emplace_back(v.data(), v.size()); }

struct SoftmaxCache {
  Tensor query, key, value, weights, mixed;
};

struct ForwardCache {
  Tensor z0;
  Tensor pre0;
  Tensor h0;  // after input activation (before attention)
  std::vector<SoftmaxCache> attention;
  std::vector<Tensor> stream;  // stream[k] enters block k; stream.back() feeds the output
  std::vector<Tensor> pre;     // block pre-activations
};

void check_batch(const DenoiserParams& p, const FrameBatch& b) {
  if (b.inputs.cols() != p.data_dim)
    throw Error(Errc::kShapeMismatch, "latent width " + std::to_string(b.inputs.cols()) + " != data_dim " +
                                          std::to_string(p.data_dim));
  if (b.taus.size() != b.inputs.rows()) throw Error(Errc::kShapeMismatch, "one time per row required");
  if (b.cond.size() > 0 && (b.cond.rows() != b.inputs.rows() || b.cond.cols() != p.cond_dim))
    throw Error(Errc::kShapeMismatch, "conditioning is " + std::to_string(b.cond.rows()) + "x" +
                                          std::to_string(b.cond.cols()) + ", expected " +
                                          std::to_string(b.inputs.rows()) + "x" + std::to_string(p.cond_dim));
}

std::vector<std::pair<Index, Index>> segments_of(const FrameBatch& b) {
  std::vector<std::pair<Index, Index>> segs;
  const Index rows = b.inputs.rows();
  if (b.segment_starts.empty()) {
    segs.emplace_back(0, rows);
    return segs;
  }
  for (std::size_t i = 0; i < b.segment_starts.size(); ++i) {
    const Index begin = b.segment_starts[i];
    const Index end = i + 1 < b.segment_starts.size() ? b.segment_starts[i + 1] : rows;
    if (end > begin) segs.emplace_back(begin, end);
  }
  return segs;
}

Tensor run_forward(const DenoiserParams& p, const FrameBatch& b, ForwardCache* cache) {
  check_batch(p, b);
  const Index rows = b.inputs.rows();
  Tensor z0(rows, p.data_dim + p.time_embed);
  z0.leftCols(p.data_dim) = b.inputs;
  for (Index r = 0; r < rows; ++r) {
    if (r > 0 && b.taus(r) == b.taus(r - 1))
      z0.row(r).tail(p.time_embed) = z0.row(r - 1).tail(p.time_embed);
    else
      z0.row(r).tail(p.time_embed) = time_embedding(b.taus(r), p.time_embed);
  }
  Tensor pre0 = z0 * p.input.weight.transpose();
  pre0.rowwise() += p.input.bias.transpose();
  if (b.cond.size() > 0) pre0.noalias() += b.cond * p.cond_proj.transpose();
  Tensor h = silu(pre0);
  if (cache) {
    cache->z0 = std::move(z0);
    cache->pre0 = pre0;
    cache->h0 = h;
  }

  if (p.attention && b.cond.size() > 0) {
    const auto& a = *p.attention;
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.hidden()));
    Tensor delta = Tensor::Zero(rows, p.hidden());
    for (auto [begin, end] : segments_of(b)) {
      const Index n = end - begin;
      SoftmaxCache sc;
      sc.query = h.middleRows(begin, n) * a.query.transpose();
      sc.key = b.cond.middleRows(begin, n) * a.key.transpose();
      sc.value = b.cond.middleRows(begin, n) * a.value.transpose();
      Tensor scores = scale * sc.query * sc.key.transpose();
      for (Index r = 0; r < n; ++r) {
        const double m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp().matrix();
        scores.row(r) /= scores.row(r).sum();
      }
      sc.weights = std::move(scores);
      sc.mixed = sc.weights * sc.value;
      delta.middleRows(begin, n) = sc.mixed * a.output.transpose();
      if (cache) cache->attention.push_back(std::move(sc));
    }
    h += delta;
  }

  for (const auto& block : p.blocks) {
    Tensor u = h * block.expand.weight.transpose();
    u.rowwise() += block.expand.bias.transpose();
    Tensor next = h + silu(u) * block.contract.weight.transpose();
    next.rowwise() += block.contract.bias.transpose();
    if (cache) {
      cache->stream.push_back(std::move(h));
      cache->pre.push_back(std::move(u));
    }
    h = std::move(next);
  }
  Tensor out = h * p.output.weight.transpose();
  out.rowwise() += p.output.bias.transpose();
  if (cache) cache->stream.push_back(std::move(h));
  return out;
}

void add_dense_grad(DenseLayer& g, const Tensor& d_out, const Tensor& in) {
  g.weight.noalias() += d_out.transpose() * in;
  g.bias += d_out.colwise().sum().transpose();
}

void run_backward(const DenoiserParams& p, const FrameBatch& b, const ForwardCache& cache, const Tensor& d_out,
                  DenoiserParams& g) {
  add_dense_grad(g.output, d_out, cache.stream.back());
  Tensor dh = d_out * p.output.weight;
  for (std::size_t k = p.blocks.size(); k-- > 0;) {
    const auto& block = p.blocks[k];
    const Tensor& u = cache.pre[k];
    const Tensor act = silu(u);
    add_dense_grad(g.blocks[k].contract, dh, act);
    Tensor du = (dh * block.contract.weight).cwiseProduct(silu_grad(u));
    add_dense_grad(g.blocks[k].expand, du, cache.stream[k]);
    dh.noalias() += du * block.expand.weight;
  }

  if (p.attention && b.cond.size() > 0) {
    const auto& a = *p.attention;
    auto& ga = *g.attention;
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.hidden()));
    Tensor dh_attn = Tensor::Zero(dh.rows(), dh.cols());
    std::size_t si = 0;
    for (auto [begin, end] : segments_of(b)) {
      const Index n = end - begin;
      const SoftmaxCache& sc = cache.attention[si++];
      const Tensor d_delta = dh.middleRows(begin, n);
      ga.output.noalias() += d_delta.transpose() * sc.mixed;
      const Tensor d_mixed = d_delta * a.output;
      const Tensor d_weights = d_mixed * sc.value.transpose();
      const Tensor d_value = sc.weights.transpose() * d_mixed;
      Tensor d_scores = sc.weights.cwiseProduct(d_weights);
      const Eigen::VectorXd row_dot = d_scores.rowwise().sum();
      d_scores -= sc.weights.cwiseProduct(row_dot.replicate(1, n));
      d_scores *= scale;
      const Tensor d_query = d_scores * sc.key;
      const Tensor d_key = d_scores.transpose() * sc.query;
      const auto cond = b.cond.middleRows(begin, n);
      ga.query.noalias() += d_query.transpose() * cache.h0.middleRows(begin, n);
      ga.key.noalias() += d_key.transpose() * cond;
      ga.value.noalias() += d_value.transpose() * cond;
      dh_attn.middleRows(begin, n) = d_query * a.query;
    }
    dh += dh_attn;
  }

  const Tensor d_pre0 = dh.cwiseProduct(silu_grad(cache.pre0));
  add_dense_grad(g.input, d_pre0, cache.z0);
  if (b.cond.size() > 0) g.cond_proj.noalias() += d_pre0.transpose() * b.cond;
}

void check_arch(const DenoiserArch& arch) {
  if (arch.widths.empty()) throw Error(Errc::kInvalidArch, "empty width list");
  for (int w : arch.widths)
    if (w < 1) throw Error(Errc::kInvalidArch, "widths must be >= 1");
  if (arch.data_dim < 1) throw Error(Errc::kInvalidArch, "data_dim must be >= 1");
  if (arch.cond_dim < 1) throw Error(Errc::kInvalidArch, "cond_dim must be >= 1");
  if (arch.time_embed < 2 || arch.time_embed % 2 != 0)
    throw Error(Errc::kInvalidArch, "time_embed must be even and >= 2");
}

}  // namespace

DenoiserArch DenoiserParams::arch() const {
  DenoiserArch a;
  a.data_dim = data_dim;
  a.time_embed = time_embed;
  a.cond_dim = cond_dim;
  a.attention = attention.has_value();
  a.widths = {hidden()};
  for (const auto& b : blocks) a.widths.push_back(static_cast<int>(b.expand.weight.rows()));
  return a;
}

std::size_t DenoiserParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

std::vector<std::span<double>> DenoiserParams::tensors() {
  std::vector<std::span<double>> out;
  append(out, input.weight);
  append(out, input.bias);
  append(out, cond_proj);
  if (attention) {
    append(out, attention->query);
    append(out, attention->key);
    append(out, attention->value);
    append(out, attention->output);
  }
  for (auto& b : blocks) {
    append(out, b.expand.weight);
    append(out, b.expand.bias);
    append(out, b.contract.weight);
    append(out, b.contract.bias);
  }
  append(out, output.weight);
  append(out, output.bias);
  return out;
}

std::vector<std::span<const double>> DenoiserParams::tensors() const {
  auto mut = const_cast<DenoiserParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

DenoiserParams init_denoiser(const DenoiserArch& arch, std::uint64_t seed) {
  check_arch(arch);
  CounterRng rng(seed, 0x1417);
  const int hidden = arch.widths.front();
  DenoiserParams p;
  p.data_dim = arch.data_dim;
  p.time_embed = arch.time_embed;
  p.cond_dim = arch.cond_dim;
  p.input = make_dense(rng, hidden, arch.data_dim + arch.time_embed);
  p.cond_proj = uniform_matrix(rng, hidden, arch.cond_dim, 1.0 / std::sqrt(static_cast<double>(arch.cond_dim)));
  if (arch.attention) {
    const double hb = 1.0 / std::sqrt(static_cast<double>(hidden));
    const double cb = 1.0 / std::sqrt(static_cast<double>(arch.cond_dim));
    CrossAttention a;
    a.query = uniform_matrix(rng, hidden, hidden, hb);
    a.key = uniform_matrix(rng, hidden, arch.cond_dim, cb);
    a.value = uniform_matrix(rng, hidden, arch.cond_dim, cb);
    a.output = uniform_matrix(rng, hidden, hidden, hb);
    p.attention = std::move(a);
  }
  for (std::size_t i = 1; i < arch.widths.size(); ++i) {
    ResidualBlock b;
    b.expand = make_dense(rng, arch.widths[i], hidden);
    b.contract = make_dense(rng, hidden, arch.widths[i]);
    p.blocks.push_back(std::move(b));
  }
  p.output = make_dense(rng, arch.data_dim, hidden);
  return p;
}

DenoiserParams zeros_like(const DenoiserParams& p) {
  DenoiserParams z = p;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

DenoiserParams point_mass_denoiser(const DenoiserArch& arch, const Eigen::VectorXd& x0) {
  if (x0.size() != arch.data_dim) throw Error(Errc::kShapeMismatch, "x0 length must equal data_dim");
  DenoiserParams p = zeros_like(init_denoiser(arch, 0));
  p.output.bias = x0;
  return p;
}

Eigen::VectorXd flatten(const DenoiserParams& p) {
  Eigen::VectorXd flat(static_cast<Index>(p.parameter_count()));
  Index at = 0;
  for (auto t : p.tensors()) {
    std::copy(t.begin(), t.end(), flat.data() + at);
    at += static_cast<Index>(t.size());
  }
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, DenoiserParams& p) {
  if (flat.size() != static_cast<Index>(p.parameter_count()))
    throw Error(Errc::kShapeMismatch, "flat parameter vector has wrong length");
  Index at = 0;
  for (auto t : p.tensors()) {
    std::copy(flat.data() + at, flat.data() + at + static_cast<Index>(t.size()), t.begin());
    at += static_cast<Index>(t.size());
  }
}

Eigen::RowVectorXd time_embedding(double tau, int width) {
  Eigen::RowVectorXd e(width);
  const int half = width / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / std::max(half - 1, 1));
    const double angle = 1000.0 * tau * freq;
    e(k) = std::sin(angle);
    e(half + k) = std::cos(angle);
  }
  return e;
}

Tensor forward(const DenoiserParams& p, const FrameBatch& batch) { return run_forward(p, batch, nullptr); }

Tensor predict_x(const DenoiserParams& p, const LatentState& y, const ConditioningTrack* cond) {
  FrameBatch b;
  b.inputs = y.values;
  b.taus = Eigen::VectorXd::Constant(y.values.rows(), y.tau);
  if (cond) {
    if (cond->vectors.rows() != y.values.rows())
      throw Error(Errc::kShapeMismatch, "conditioning has " + std::to_string(cond->vectors.rows()) +
                                            " frames, latent has " + std::to_string(y.values.rows()));
    b.cond = cond->vectors;
  }
  return run_forward(p, b, nullptr);
}

Tensor MlpDenoiser::predict_x(const LatentState& y, const ConditioningTrack* cond) const {
  return svcdiff::predict_x(params_, y, cond);
}

double regression_loss(const DenoiserParams& p, std::span<const RegressionTerm> terms, DenoiserParams* grad) {
  if (terms.empty()) throw Error(Errc::kEmptyBatch, "no regression terms");
  Index rows = 0;
  bool any_cond = false;
  for (const auto& t : terms) {
    if (t.target.rows() != t.input.values.rows() || t.target.cols() != t.input.values.cols())
      throw Error(Errc::kShapeMismatch, "target shape differs from input");
    if (t.cond && t.cond->vectors.rows() != t.input.values.rows())
      throw Error(Errc::kShapeMismatch, "conditioning frame count differs from latent");
    rows += t.input.values.rows();
    any_cond = any_cond || t.cond != nullptr;
  }
  FrameBatch b;
  b.inputs.resize(rows, p.data_dim);
  b.taus.resize(rows);
  if (any_cond) b.cond = Tensor::Zero(rows, p.cond_dim);
  Tensor targets(rows, p.data_dim);
  Eigen::VectorXd weights(rows);
  Index at = 0;
  for (const auto& t : terms) {
    const Index n = t.input.values.rows();
    if (t.input.values.cols() != p.data_dim) throw Error(Errc::kShapeMismatch, "latent width != data_dim");
    b.segment_starts.push_back(at);
    b.inputs.middleRows(at, n) = t.input.values;
    b.taus.segment(at, n).setConstant(t.input.tau);
    if (t.cond) {
      if (t.cond->vectors.cols() != p.cond_dim) throw Error(Errc::kShapeMismatch, "conditioning width");
      b.cond.middleRows(at, n) = t.cond->vectors;
    }
    targets.middleRows(at, n) = t.target;
    weights.segment(at, n).setConstant(t.weight);
    at += n;
  }
  ForwardCache cache;
  const Tensor out = run_forward(p, b, grad ? &cache : nullptr);
  const Tensor diff = out - targets;
  const double value = (diff.array().square().rowwise().sum() * weights.array()).sum();
  if (grad) {
    const Tensor d_out = 2.0 * (diff.array().colwise() * weights.array()).matrix();
    run_backward(p, b, cache, d_out, *grad);
  }
  return value;
}

LossWeight parse_loss_weight(std::string_view name) {
  if (name == "unit") return LossWeight::kUnit;
  if (name == "snr") return LossWeight::kSnr;
  throw Error(Errc::kInvalidArgument, "unknown loss weighting '" + std::string(name) + "'");
}

std::string_view to_string(LossWeight w) noexcept { return w == LossWeight::kUnit ? "unit" : "snr"; }

DiffusionDraws draw_diffusion(std::span<const Example> batch, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  DiffusionDraws d;
  for (const auto& ex : batch) {
    d.taus.push_back(rng.uniform(kTauMin, kTauMax));
    d.noise.push_back(rng.normal_tensor(ex.x.values.rows(), ex.x.values.cols()));
  }
  return d;
}

double loss_weight(const NoiseSchedule& s, LossWeight w, double tau) {
  return w == LossWeight::kUnit ? 1.0 : std::exp(s.log_snr(tau));
}

namespace {

std::vector<RegressionTerm> diffusion_terms(std::span<const Example> batch, const NoiseSchedule& s,
                                            const LossConfig& cfg, const DiffusionDraws& draws) {
  if (batch.empty()) throw Error(Errc::kEmptyBatch, "loss over an empty batch");
  if (draws.taus.size() != batch.size() || draws.noise.size() != batch.size())
    throw Error(Errc::kShapeMismatch, "draws do not match batch size");
  std::vector<RegressionTerm> terms;
  terms.reserve(batch.size());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    RegressionTerm t;
    t.input = forward_marginal(s, batch[i].x, draws.taus[i], draws.noise[i]);
    t.cond = batch[i].cond ? &*batch[i].cond : nullptr;
    t.target = batch[i].x.values;
    t.weight = loss_weight(s, cfg.weight, draws.taus[i]) * inv_batch;
    terms.push_back(std::move(t));
  }
  return terms;
}

}  // namespace

double loss(const DenoiserParams& p, std::span<const Example> batch, const NoiseSchedule& s,
            const LossConfig& cfg, const DiffusionDraws& draws) {
  const auto terms = diffusion_terms(batch, s, cfg, draws);
  return regression_loss(p, terms, nullptr);
}

DenoiserParams grad(const DenoiserParams& p, std::span<const Example> batch, const NoiseSchedule& s,
                    const LossConfig& cfg, const DiffusionDraws& draws) {
  DenoiserParams g = zeros_like(p);
  loss_and_grad(p, batch, s, cfg, draws, g);
  return g;
}

double loss_and_grad(const DenoiserParams& p, std::span<const Example> batch, const NoiseSchedule& s,
                     const LossConfig& cfg, const DiffusionDraws& draws, DenoiserParams& grad_out) {
  const auto terms = diffusion_terms(batch, s, cfg, draws);
  return regression_loss(p, terms, &grad_out);
}

Adam::Adam(const DenoiserParams& like, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(zeros_like(like)), v_(zeros_like(like)) {
  if (!(lr >= 0.0)) throw Error(Errc::kInvalidArgument, "learning rate must be >= 0");
}

void Adam::step(DenoiserParams& p, const DenoiserParams& g) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto pt = p.tensors();
  auto gt = g.tensors();
  auto mt = m_.tensors();
  auto vt = v_.tensors();
  if (pt.size() != gt.size()) throw Error(Errc::kShapeMismatch, "gradient layout differs from parameters");
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (std::size_t i = 0; i < pt[k].size(); ++i) {
      const double gi = gt[k][i];
      mt[k][i] = beta1_ * mt[k][i] + (1.0 - beta1_) * gi;
      vt[k][i] = beta2_ * vt[k][i] + (1.0 - beta2_) * gi * gi;
      pt[k][i] -= lr_ * (mt[k][i] / c1) / (std::sqrt(vt[k][i] / c2) + eps_);
    }
  }
}

Example crop_example(const Example& ex, int frames, std::uint64_t offset_draw) {
  const Index total = ex.x.values.rows();
  if (frames <= 0 || total <= frames) return ex;
  const Index start = static_cast<Index>(offset_draw % static_cast<std::uint64_t>(total - frames + 1));
  Example out;
  out.x.values = ex.x.values.middleRows(start, frames);
  if (ex.cond) out.cond = ConditioningTrack{ex.cond->vectors.middleRows(start, frames)};
  return out;
}

TrainResult train(DenoiserParams p, std::span<const Example> dataset, const NoiseSchedule& s,
                  const TrainConfig& cfg, int steps) {
  if (steps < 1) throw Error(Errc::kInvalidArgument, "training needs >= 1 step");
  if (dataset.empty()) throw Error(Errc::kEmptyBatch, "empty training set");
  if (cfg.loss.batch < 1) throw Error(Errc::kInvalidArgument, "batch must be >= 1");
  Adam opt(p, cfg.loss);
  TrainResult result;
  result.losses.reserve(static_cast<std::size_t>(steps));
  CounterRng pick(cfg.seed, 0xBA7C4);
  std::vector<Example> batch(static_cast<std::size_t>(cfg.loss.batch));
  DenoiserParams g = zeros_like(p);
  for (int step = 0; step < steps; ++step) {
    for (auto& ex : batch) ex = crop_example(dataset[pick.below(dataset.size())], cfg.crop_frames, pick.next_u64());
    const DiffusionDraws draws = draw_diffusion(batch, cfg.seed, 0x10000 + static_cast<std::uint64_t>(step));
    for (auto t : g.tensors()) std::fill(t.begin(), t.end(), 0.0);
    const double value = loss_and_grad(p, batch, s, cfg.loss, draws, g);
    if (!std::isfinite(value))
      throw Error(Errc::kNonFiniteLoss, "loss became non-finite at step " + std::to_string(step));
    result.losses.push_back(value);
    opt.step(p, g);
  }
  result.params = std::move(p);
  return result;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'V', 'C', 'D', 'N', 'S', 'R', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& at) {
  if (at + 4 > in.size()) throw Error(Errc::kFormat, "truncated checkpoint header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  at += 4;
  return v;
}

}  // namespace

// Layout (little-endian): magic "SVCDNSR1", u32 data_dim, u32 time_embed,
// u32 cond_dim, u32 attention, u32 n_widths, u32 widths[n], then every
// parameter tensor in DenoiserParams::tensors() order as float32.
std::vector<std::uint8_t> serialize(const DenoiserParams& p) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  const DenoiserArch arch = p.arch();
  put_u32(out, static_cast<std::uint32_t>(arch.data_dim));
  put_u32(out, static_cast<std::uint32_t>(arch.time_embed));
  put_u32(out, static_cast<std::uint32_t>(arch.cond_dim));
  put_u32(out, arch.attention ? 1u : 0u);
  put_u32(out, static_cast<std::uint32_t>(arch.widths.size()));
  for (int w : arch.widths) put_u32(out, static_cast<std::uint32_t>(w));
  for (auto t : p.tensors()) {
    for (double v : t) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  return out;
}

DenoiserParams deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw Error(Errc::kFormat, "not a denoiser checkpoint");
  std::size_t at = sizeof kCheckpointMagic;
  DenoiserArch arch;
  arch.data_dim = static_cast<int>(get_u32(bytes, at));
  arch.time_embed = static_cast<int>(get_u32(bytes, at));
  arch.cond_dim = static_cast<int>(get_u32(bytes, at));
  arch.attention = get_u32(bytes, at) != 0;
  const std::uint32_t n = get_u32(bytes, at);
  if (n == 0 || n > 4096) throw Error(Errc::kFormat, "bad width count in checkpoint");
  arch.widths.clear();
  for (std::uint32_t i = 0; i < n; ++i) arch.widths.push_back(static_cast<int>(get_u32(bytes, at)));
  DenoiserParams p = zeros_like(init_denoiser(arch, 0));
  if (bytes.size() - at != 4 * p.parameter_count())
    throw Error(Errc::kFormat, "checkpoint payload size does not match its architecture");
  for (auto t : p.tensors()) {
    for (double& v : t) {
      const std::uint32_t bits = get_u32(bytes, at);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      v = f;
    }
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const DenoiserParams& p) {
  const auto bytes = serialize(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIo, "short write to " + path.string());
}

DenoiserParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace svcdiff
