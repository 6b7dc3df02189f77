#include "legsafe/estimator/network.hpp"

#include <cmath>
#include <stdexcept>

namespace legsafe::estimator {

void NetworkConfig::validate() const {
  if (d_in <= 0 || d_model <= 0 || heads <= 0 || layers < 0 || k <= 0 || seq_len <= 0 || d_ff <= 0) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  if (d_model % heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
  if (!(ln_eps > 0.0)) throw std::invalid_argument("layer norm epsilon must be positive");
}

std::vector<Parameters::Entry> Parameters::tensors() {
  std::vector<Entry> out{{"w_in", &w_in}, {"b_in", &b_in}, {"pos", &pos}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    out.push_back({p + "wq", &l.wq});
    out.push_back({p + "wk", &l.wk});
    out.push_back({p + "wv", &l.wv});
    out.push_back({p + "e", &l.e});
    out.push_back({p + "f", &l.f});
    out.push_back({p + "wo", &l.wo});
    out.push_back({p + "bo", &l.bo});
    out.push_back({p + "ln1_g", &l.ln1_g});
    out.push_back({p + "ln1_b", &l.ln1_b});
    out.push_back({p + "w1", &l.w1});
    out.push_back({p + "c1", &l.c1});
    out.push_back({p + "w2", &l.w2});
    out.push_back({p + "c2", &l.c2});
    out.push_back({p + "ln2_g", &l.ln2_g});
    out.push_back({p + "ln2_b", &l.ln2_b});
  }
  out.push_back({"head_w", &head_w});
  out.push_back({"head_b", &head_b});
  return out;
}

std::vector<Parameters::ConstEntry> Parameters::tensors() const {
  std::vector<ConstEntry> out;
  for (auto& e : const_cast<Parameters*>(this)->tensors()) out.push_back({e.name, e.tensor});
  return out;
}

Parameters Parameters::zeros_like() const {
  Parameters z = *this;
  for (auto& e : z.tensors()) e.tensor->setZero();
  return z;
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for (const auto& e : tensors()) n += static_cast<std::size_t>(e.tensor->size());
  return n;
}

bool Parameters::all_finite() const {
  for (const auto& e : tensors()) {
    if (!e.tensor->allFinite()) return false;
  }
  return true;
}

Parameters zero_parameters(const NetworkConfig& c) {
  c.validate();
  using M = Eigen::MatrixXd;
  Parameters p;
  p.w_in = M::Zero(c.d_model, c.d_in);
  p.b_in = M::Zero(c.d_model, 1);
  p.pos = M::Zero(c.seq_len, c.d_model);
  for (int i = 0; i < c.layers; ++i) {
    LayerParams l;
    l.wq = l.wk = l.wv = l.wo = M::Zero(c.d_model, c.d_model);
    l.e = l.f = M::Zero(c.k, c.seq_len);
    l.bo = l.ln1_b = l.ln2_b = l.c2 = M::Zero(c.d_model, 1);
    l.ln1_g = l.ln2_g = M::Ones(c.d_model, 1);
    l.w1 = M::Zero(c.d_ff, c.d_model);
    l.c1 = M::Zero(c.d_ff, 1);
    l.w2 = M::Zero(c.d_model, c.d_ff);
    p.layers.push_back(l);
  }
  p.head_w = M::Zero(c.d_model, 1);
  p.head_b = M::Zero(1, 1);
  return p;
}

Parameters init_parameters(const NetworkConfig& c, std::mt19937_64& rng) {
  Parameters p = zero_parameters(c);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto fill = [&](Eigen::MatrixXd& m, double scale) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * n01(rng);
    }
  };
  fill(p.w_in, 1.0 / std::sqrt(c.d_in));
  fill(p.pos, 0.1);
  for (auto& l : p.layers) {
    const double s = 1.0 / std::sqrt(c.d_model);
    fill(l.wq, s);
    fill(l.wk, s);
    fill(l.wv, s);
    fill(l.e, 1.0 / std::sqrt(c.seq_len));
    fill(l.f, 1.0 / std::sqrt(c.seq_len));
    fill(l.wo, s);
    fill(l.w1, s);
    fill(l.w2, 1.0 / std::sqrt(c.d_ff));
  }
  fill(p.head_w, 0.1 / std::sqrt(c.d_model));
  return p;
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

struct LayerNormCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_sigma;
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                           double eps, LayerNormCache* cache) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd xhat(x.rows(), d);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const Eigen::RowVectorXd c = x.row(i).array() - mean;
    const double var = c.squaredNorm() / static_cast<double>(d);
    inv[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = c * inv[i];
  }
  Eigen::MatrixXd out = (xhat.array().rowwise() * g.col(0).transpose().array()).rowwise() +
                        b.col(0).transpose().array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_sigma = std::move(inv);
  }
  return out;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dout, const LayerNormCache& cache,
                                    const Eigen::MatrixXd& g, Eigen::MatrixXd& dg, Eigen::MatrixXd& db) {
  dg.col(0) += (dout.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  db.col(0) += dout.colwise().sum().transpose();
  const Eigen::MatrixXd dxhat = dout.array().rowwise() * g.col(0).transpose().array();
  const double d = static_cast<double>(dout.cols());
  Eigen::MatrixXd dx(dout.rows(), dout.cols());
  for (Eigen::Index i = 0; i < dout.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / d;
    const double m2 = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.inv_sigma[i] * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

void softmax_rows(Eigen::MatrixXd& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
}

struct LayerCache {
  Eigen::MatrixXd x;  // block input
  Eigen::MatrixXd k, v, q, kp, vp;
  std::vector<Eigen::MatrixXd> attn;
  Eigen::MatrixXd heads;
  LayerNormCache ln1;
  Eigen::MatrixXd z;
  Eigen::MatrixXd f1, gact;
  LayerNormCache ln2;
};

AttentionOutput attention_impl(const LayerParams& l, const NetworkConfig& c, const Eigen::MatrixXd& x,
                               LayerCache* cache) {
  if (x.cols() != c.d_model || x.rows() != l.e.cols()) {
    throw std::invalid_argument("attention input has the wrong shape");
  }
  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Eigen::MatrixXd q = x * l.wq.transpose();
  Eigen::MatrixXd kk = x * l.wk.transpose();
  Eigen::MatrixXd v = x * l.wv.transpose();
  Eigen::MatrixXd kp = l.e * kk;
  Eigen::MatrixXd vp = l.f * v;

  AttentionOutput out;
  out.heads.resize(x.rows(), c.d_model);
  for (int h = 0; h < c.heads; ++h) {
    Eigen::MatrixXd s = scale * q.middleCols(h * dh, dh) * kp.middleCols(h * dh, dh).transpose();
    softmax_rows(s);
    out.heads.middleCols(h * dh, dh).noalias() = s * vp.middleCols(h * dh, dh);
    out.weights.push_back(std::move(s));
  }
  Eigen::MatrixXd y = (out.heads * l.wo.transpose()).rowwise() + l.bo.col(0).transpose();
  out.output = layer_norm(x + y, l.ln1_g, l.ln1_b, c.ln_eps, cache ? &cache->ln1 : nullptr);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(kk);
    cache->v = std::move(v);
    cache->kp = std::move(kp);
    cache->vp = std::move(vp);
    cache->attn = out.weights;
    cache->heads = out.heads;
    cache->z = out.output;
  }
  return out;
}

Eigen::MatrixXd block_impl(const LayerParams& l, const NetworkConfig& c, const Eigen::MatrixXd& x,
                           LayerCache* cache) {
  const Eigen::MatrixXd z = attention_impl(l, c, x, cache).output;
  Eigen::MatrixXd f1 = (z * l.w1.transpose()).rowwise() + l.c1.col(0).transpose();
  Eigen::MatrixXd g = f1.unaryExpr([](double t) { return gelu(t); });
  const Eigen::MatrixXd f2 = (g * l.w2.transpose()).rowwise() + l.c2.col(0).transpose();
  Eigen::MatrixXd out = layer_norm(z + f2, l.ln2_g, l.ln2_b, c.ln_eps, cache ? &cache->ln2 : nullptr);
  if (cache) {
    cache->f1 = std::move(f1);
    cache->gact = std::move(g);
  }
  return out;
}

Eigen::MatrixXd embed(const Parameters& p, const Eigen::MatrixXd& tokens) {
  return ((tokens * p.w_in.transpose()).rowwise() + p.b_in.col(0).transpose()) + p.pos;
}

void check_tokens(const Parameters& p, const NetworkConfig& c, const Eigen::MatrixXd& tokens) {
  if (tokens.rows() != c.seq_len || tokens.cols() != c.d_in || p.pos.rows() != c.seq_len) {
    throw std::invalid_argument("token matrix does not match the network sequence shape");
  }
}

// Backward through one block. Accumulates parameter gradients and returns the
// gradient with respect to the block input.
Eigen::MatrixXd block_backward(const LayerParams& l, const NetworkConfig& c, const LayerCache& k,
                               const Eigen::MatrixXd& dout, LayerParams& g) {
  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Eigen::MatrixXd dr2 = layer_norm_backward(dout, k.ln2, l.ln2_g, g.ln2_g, g.ln2_b);
  Eigen::MatrixXd dz = dr2;
  g.w2.noalias() += dr2.transpose() * k.gact;
  g.c2.col(0) += dr2.colwise().sum().transpose();
  Eigen::MatrixXd df1 = dr2 * l.w2;
  df1.array() *= k.f1.unaryExpr([](double t) { return gelu_grad(t); }).array();
  g.w1.noalias() += df1.transpose() * k.z;
  g.c1.col(0) += df1.colwise().sum().transpose();
  dz.noalias() += df1 * l.w1;

  const Eigen::MatrixXd dr1 = layer_norm_backward(dz, k.ln1, l.ln1_g, g.ln1_g, g.ln1_b);
  Eigen::MatrixXd dx = dr1;
  g.wo.noalias() += dr1.transpose() * k.heads;
  g.bo.col(0) += dr1.colwise().sum().transpose();
  const Eigen::MatrixXd dheads = dr1 * l.wo;

  Eigen::MatrixXd dq(k.q.rows(), k.q.cols());
  Eigen::MatrixXd dkp(k.kp.rows(), k.kp.cols());
  Eigen::MatrixXd dvp(k.vp.rows(), k.vp.cols());
  for (int h = 0; h < c.heads; ++h) {
    const Eigen::MatrixXd& a = k.attn[static_cast<std::size_t>(h)];
    const auto dO = dheads.middleCols(h * dh, dh);
    const Eigen::MatrixXd da = dO * k.vp.middleCols(h * dh, dh).transpose();
    dvp.middleCols(h * dh, dh).noalias() = a.transpose() * dO;
    Eigen::MatrixXd ds = a.array() * (da.colwise() - (da.array() * a.array()).rowwise().sum().matrix()).array();
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * k.kp.middleCols(h * dh, dh);
    dkp.middleCols(h * dh, dh).noalias() = ds.transpose() * k.q.middleCols(h * dh, dh);
  }
  g.e.noalias() += dkp * k.k.transpose();
  g.f.noalias() += dvp * k.v.transpose();
  const Eigen::MatrixXd dk = l.e.transpose() * dkp;
  const Eigen::MatrixXd dv = l.f.transpose() * dvp;
  g.wq.noalias() += dq.transpose() * k.x;
  g.wk.noalias() += dk.transpose() * k.x;
  g.wv.noalias() += dv.transpose() * k.x;
  dx.noalias() += dq * l.wq + dk * l.wk + dv * l.wv;
  return dx;
}

}  // namespace

AttentionOutput attention_forward(const LayerParams& layer, const NetworkConfig& config,
                                  const Eigen::MatrixXd& x) {
  return attention_impl(layer, config, x, nullptr);
}

Eigen::MatrixXd block_forward(const LayerParams& layer, const NetworkConfig& config, const Eigen::MatrixXd& x) {
  return block_impl(layer, config, x, nullptr);
}

double forward(const Parameters& params, const NetworkConfig& config, const Eigen::MatrixXd& tokens) {
  check_tokens(params, config, tokens);
  Eigen::MatrixXd h = embed(params, tokens);
  for (const auto& l : params.layers) h = block_impl(l, config, h, nullptr);
  const Eigen::VectorXd pool = h.colwise().mean().transpose();
  return params.head_w.col(0).dot(pool) + params.head_b(0, 0);
}

LossAndGradients loss_and_gradients(const Parameters& params, const NetworkConfig& config,
                                    const std::vector<const Eigen::MatrixXd*>& batch,
                                    const std::vector<double>& labels) {
  if (batch.empty() || batch.size() != labels.size()) {
    throw std::invalid_argument("batch and labels must be non-empty and equally long");
  }
  LossAndGradients out;
  out.grad = params.zeros_like();
  Parameters& g = out.grad;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<LayerCache> caches(params.layers.size());

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Eigen::MatrixXd& tokens = *batch[s];
    check_tokens(params, config, tokens);
    Eigen::MatrixXd h = embed(params, tokens);
    for (std::size_t i = 0; i < params.layers.size(); ++i) h = block_impl(params.layers[i], config, h, &caches[i]);
    const Eigen::VectorXd pool = h.colwise().mean().transpose();
    const double y = params.head_w.col(0).dot(pool) + params.head_b(0, 0);
    out.predictions.push_back(y);
    const double err = y - labels[s];
    out.loss += err * err * inv_b;

    const double dy = 2.0 * err * inv_b;
    g.head_w.col(0) += dy * pool;
    g.head_b(0, 0) += dy;
    Eigen::MatrixXd dh =
        Eigen::MatrixXd::Ones(h.rows(), 1) * (dy / static_cast<double>(h.rows()) * params.head_w.col(0).transpose());
    for (std::size_t i = params.layers.size(); i-- > 0;) {
      dh = block_backward(params.layers[i], config, caches[i], dh, g.layers[i]);
    }
    g.pos += dh;
    g.w_in.noalias() += dh.transpose() * tokens;
    g.b_in.col(0) += dh.colwise().sum().transpose();
  }
  return out;
}

}  // namespace legsafe::estimator
