#include "copolab/transformer.hpp"

#include <cmath>
#include <limits>

#include "copolab/error.hpp"
#include "copolab/random.hpp"

namespace copolab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatMap = Eigen::Map<MatrixXd>;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

// Offsets of every tensor inside the flat parameter vector.
struct LayerOffsets {
  std::size_t ln1_g, ln1_b, wqkv, bqkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct Layout {
  std::size_t tok_emb, pos_emb;
  std::vector<LayerOffsets> layers;
  std::size_t lnf_g, lnf_b, w_out, b_out;
  std::size_t total;

  explicit Layout(const ModelConfig& c) {
    const std::size_t d = c.d_model, f = c.d_ff, v = c.vocab_size;
    std::size_t at = 0;
    auto take = [&at](std::size_t n) {
      const std::size_t here = at;
      at += n;
      return here;
    };
    tok_emb = take(v * d);
    pos_emb = take(static_cast<std::size_t>(c.context_length) * d);
    for (int l = 0; l < c.n_layers; ++l) {
      LayerOffsets o;
      o.ln1_g = take(d);
      o.ln1_b = take(d);
      o.wqkv = take(d * 3 * d);
      o.bqkv = take(3 * d);
      o.wo = take(d * d);
      o.bo = take(d);
      o.ln2_g = take(d);
      o.ln2_b = take(d);
      o.w1 = take(d * f);
      o.b1 = take(f);
      o.w2 = take(f * d);
      o.b2 = take(d);
      layers.push_back(o);
    }
    lnf_g = take(d);
    lnf_b = take(d);
    w_out = take(d * v);
    b_out = take(v);
    total = at;
  }
};

ConstMatMap cmat(const VectorXd& p, std::size_t off, Eigen::Index r,
                 Eigen::Index c) {
  return ConstMatMap(p.data() + off, r, c);
}
ConstVecMap cvec(const VectorXd& p, std::size_t off, Eigen::Index n) {
  return ConstVecMap(p.data() + off, n);
}
MatMap mat(VectorXd& p, std::size_t off, Eigen::Index r, Eigen::Index c) {
  return MatMap(p.data() + off, r, c);
}
VecMap vec(VectorXd& p, std::size_t off, Eigen::Index n) {
  return VecMap(p.data() + off, n);
}

// Row-wise layer norm. Writes the normalized input and reciprocal std.
MatrixXd layer_norm(const MatrixXd& x, const ConstVecMap& g,
                    const ConstVecMap& b, MatrixXd& xhat, VectorXd& rstd) {
  const VectorXd mean = x.rowwise().mean();
  xhat = x.colwise() - mean;
  rstd = (xhat.array().square().rowwise().mean() + kLayerNormEps).rsqrt();
  xhat = xhat.array().colwise() * rstd.array();
  MatrixXd out = xhat.array().rowwise() * g.transpose().array();
  out.rowwise() += b.transpose();
  return out;
}

// Returns dL/dx and accumulates gain and bias gradients.
MatrixXd layer_norm_backward(const MatrixXd& dout, const MatrixXd& xhat,
                             const VectorXd& rstd, const ConstVecMap& g,
                             VecMap dg, VecMap db) {
  dg += (dout.array() * xhat.array()).colwise().sum().transpose().matrix();
  db += dout.colwise().sum().transpose();
  const MatrixXd dxhat = dout.array().rowwise() * g.transpose().array();
  const VectorXd m1 = dxhat.rowwise().mean();
  const VectorXd m2 = (dxhat.array() * xhat.array()).rowwise().mean();
  MatrixXd dx = dxhat.colwise() - m1;
  dx -= (xhat.array().colwise() * m2.array()).matrix();
  return dx.array().colwise() * rstd.array();
}

double gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
}

double gelu_grad(double u) {
  const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + t) +
         0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

void log_softmax_rows(MatrixXd& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    z.row(r).array() -= lse;
  }
}

double normal(Rng& rng) {
  // Box-Muller keeps initialization identical across standard libraries.
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
  if (context_length <= 1) throw ConfigError("context_length must exceed 1");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model must be divisible by n_heads");
  }
}

std::size_t ModelConfig::num_parameters() const { return Layout(*this).total; }

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"context_length", c.context_length},
          {"d_model", c.d_model},       {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_ff", c.d_ff}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.context_length = j.at("context_length").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.validate();
  return c;
}

Transformer::Transformer(ModelConfig config) : config_(config) {
  config_.validate();
  theta_ = VectorXd::Zero(config_.num_parameters());
  const Layout lay(config_);
  for (const auto& o : lay.layers) {
    vec(theta_, o.ln1_g, config_.d_model).setOnes();
    vec(theta_, o.ln2_g, config_.d_model).setOnes();
  }
  vec(theta_, lay.lnf_g, config_.d_model).setOnes();
}

void Transformer::init_parameters(std::uint64_t seed) {
  const Layout lay(config_);
  const int d = config_.d_model, f = config_.d_ff, v = config_.vocab_size;
  Rng rng(mix_seed(seed, 0x5eedULL));
  auto fill = [&](std::size_t off, std::size_t n, double scale) {
    for (std::size_t i = 0; i < n; ++i) theta_[off + i] = scale * normal(rng);
  };
  const double base = 0.02;
  const double resid = base / std::sqrt(2.0 * config_.n_layers);
  theta_.setZero();
  fill(lay.tok_emb, static_cast<std::size_t>(v) * d, base);
  fill(lay.pos_emb, static_cast<std::size_t>(config_.context_length) * d, base);
  for (const auto& o : lay.layers) {
    vec(theta_, o.ln1_g, d).setOnes();
    vec(theta_, o.ln2_g, d).setOnes();
    fill(o.wqkv, static_cast<std::size_t>(d) * 3 * d, base);
    fill(o.wo, static_cast<std::size_t>(d) * d, resid);
    fill(o.w1, static_cast<std::size_t>(d) * f, base);
    fill(o.w2, static_cast<std::size_t>(f) * d, resid);
  }
  vec(theta_, lay.lnf_g, d).setOnes();
  fill(lay.w_out, static_cast<std::size_t>(d) * v, base);
}

MatrixXd Transformer::forward(std::span<const int> tokens,
                              std::span<const int> rows, Activations* cache,
                              const AttentionMask* mask) const {
  const Layout lay(config_);
  const Eigen::Index T = static_cast<Eigen::Index>(tokens.size());
  const int d = config_.d_model, f = config_.d_ff, v = config_.vocab_size;
  const int nh = config_.n_heads, dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (T == 0) throw ContextOverflow("empty token sequence");
  const bool packed = mask && !mask->segment.empty();
  if (packed && (mask->segment.size() != tokens.size() ||
                 mask->position.size() != tokens.size())) {
    throw ContextOverflow("packing layout does not match the sequence");
  }
  if (!packed && T > config_.context_length) {
    throw ContextOverflow("sequence of " + std::to_string(T) +
                          " tokens exceeds context length " +
                          std::to_string(config_.context_length));
  }

  const auto tok = cmat(theta_, lay.tok_emb, v, d);
  const auto pos = cmat(theta_, lay.pos_emb, config_.context_length, d);
  MatrixXd x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const int id = tokens[t];
    const int p = packed ? mask->position[t] : static_cast<int>(t);
    if (id < 0 || id >= v) throw ContextOverflow("token id out of range");
    if (p < 0 || p >= config_.context_length) {
      throw ContextOverflow("position exceeds context length");
    }
    x.row(t) = tok.row(id) + pos.row(p);
  }

  Activations local;
  Activations& a = cache ? *cache : local;
  const bool keep = cache != nullptr;
  a.layers.assign(config_.n_layers, {});

  for (int l = 0; l < config_.n_layers; ++l) {
    const LayerOffsets& o = lay.layers[l];
    Activations::Layer& L = a.layers[l];
    if (keep) L.x_in = x;
    L.h1 = layer_norm(x, cvec(theta_, o.ln1_g, d), cvec(theta_, o.ln1_b, d),
                      L.xhat1, L.rstd1);
    L.qkv = L.h1 * cmat(theta_, o.wqkv, d, 3 * d);
    L.qkv.rowwise() += cvec(theta_, o.bqkv, 3 * d).transpose();
    L.attn_out.resize(T, d);
    L.probs.resize(keep ? nh : 0);
    for (int h = 0; h < nh; ++h) {
      const auto Q = L.qkv.middleCols(h * dh, dh);
      const auto K = L.qkv.middleCols(d + h * dh, dh);
      const auto V = L.qkv.middleCols(2 * d + h * dh, dh);
      RowMatrix P = (Q * K.transpose()) * scale;
      for (Eigen::Index i = 0; i < T; ++i) {
        auto row = P.row(i).head(i + 1);
        if (mask && static_cast<std::size_t>(i) >= mask->from) {
          for (std::size_t j = mask->hidden.begin;
               j < mask->hidden.end && static_cast<Eigen::Index>(j) <= i; ++j) {
            row(static_cast<Eigen::Index>(j)) =
                -std::numeric_limits<double>::infinity();
          }
        }
        if (packed && mask->segment[i] != 0) {
          for (Eigen::Index j = 0; j < i; ++j) {
            const int sj = mask->segment[j];
            if (sj != 0 && sj != mask->segment[i]) {
              row(j) = -std::numeric_limits<double>::infinity();
            }
          }
        }
        const double m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= row.sum();
        P.row(i).tail(T - i - 1).setZero();
      }
      L.attn_out.middleCols(h * dh, dh).noalias() =
          P.triangularView<Eigen::Lower>() * V;
      if (keep) L.probs[h] = std::move(P);
    }
    x += L.attn_out * cmat(theta_, o.wo, d, d);
    x.rowwise() += cvec(theta_, o.bo, d).transpose();
    if (keep) L.x_mid = x;
    L.h2 = layer_norm(x, cvec(theta_, o.ln2_g, d), cvec(theta_, o.ln2_b, d),
                      L.xhat2, L.rstd2);
    L.u = L.h2 * cmat(theta_, o.w1, d, f);
    L.u.rowwise() += cvec(theta_, o.b1, f).transpose();
    L.z = L.u.unaryExpr([](double u) { return gelu(u); });
    x += L.z * cmat(theta_, o.w2, f, d);
    x.rowwise() += cvec(theta_, o.b2, d).transpose();
    if (!keep) L = {};
  }

  MatrixXd hf = layer_norm(x, cvec(theta_, lay.lnf_g, d),
                           cvec(theta_, lay.lnf_b, d), a.xhat_f, a.rstd_f);
  const Eigen::Index R = static_cast<Eigen::Index>(rows.size());
  MatrixXd hsel(R, d);
  for (Eigen::Index r = 0; r < R; ++r) {
    if (rows[r] < 0 || rows[r] >= T) {
      throw ContextOverflow("scored row outside the sequence");
    }
    hsel.row(r) = hf.row(rows[r]);
  }
  MatrixXd logits = hsel * cmat(theta_, lay.w_out, d, v);
  logits.rowwise() += cvec(theta_, lay.b_out, v).transpose();
  log_softmax_rows(logits);

  if (keep) {
    a.tokens.assign(tokens.begin(), tokens.end());
    if (packed) {
      a.positions = mask->position;
    } else {
      a.positions.resize(tokens.size());
      for (std::size_t t = 0; t < tokens.size(); ++t) a.positions[t] = static_cast<int>(t);
    }
    a.rows.assign(rows.begin(), rows.end());
    a.x_final = std::move(x);
    a.h_final_rows = std::move(hsel);
    a.logp = logits;
  }
  return logits;
}

void Transformer::backward(const Activations& a, const MatrixXd& dlogp,
                           VectorXd& grad) const {
  const Layout lay(config_);
  const Eigen::Index T = static_cast<Eigen::Index>(a.tokens.size());
  const int d = config_.d_model, f = config_.d_ff, v = config_.vocab_size;
  const int nh = config_.n_heads, dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (grad.size() != theta_.size()) grad = VectorXd::Zero(theta_.size());

  // Through log-softmax: dz = dlogp - softmax * rowsum(dlogp).
  const MatrixXd probs = a.logp.array().exp();
  const VectorXd rowsum = dlogp.rowwise().sum();
  const MatrixXd dz = dlogp - (probs.array().colwise() * rowsum.array()).matrix();

  mat(grad, lay.w_out, d, v).noalias() += a.h_final_rows.transpose() * dz;
  vec(grad, lay.b_out, v) += dz.colwise().sum().transpose();
  const MatrixXd dhsel = dz * cmat(theta_, lay.w_out, d, v).transpose();
  MatrixXd dhf = MatrixXd::Zero(T, d);
  for (std::size_t r = 0; r < a.rows.size(); ++r) dhf.row(a.rows[r]) += dhsel.row(r);

  MatrixXd dx = layer_norm_backward(dhf, a.xhat_f, a.rstd_f,
                                    cvec(theta_, lay.lnf_g, d),
                                    vec(grad, lay.lnf_g, d),
                                    vec(grad, lay.lnf_b, d));

  for (int l = config_.n_layers - 1; l >= 0; --l) {
    const LayerOffsets& o = lay.layers[l];
    const Activations::Layer& L = a.layers[l];

    // Feed-forward block.
    mat(grad, o.w2, f, d).noalias() += L.z.transpose() * dx;
    vec(grad, o.b2, d) += dx.colwise().sum().transpose();
    MatrixXd du = dx * cmat(theta_, o.w2, f, d).transpose();
    du.array() *= L.u.unaryExpr([](double u) { return gelu_grad(u); }).array();
    mat(grad, o.w1, d, f).noalias() += L.h2.transpose() * du;
    vec(grad, o.b1, f) += du.colwise().sum().transpose();
    const MatrixXd dh2 = du * cmat(theta_, o.w1, d, f).transpose();
    dx += layer_norm_backward(dh2, L.xhat2, L.rstd2, cvec(theta_, o.ln2_g, d),
                              vec(grad, o.ln2_g, d), vec(grad, o.ln2_b, d));

    // Attention block.
    mat(grad, o.wo, d, d).noalias() += L.attn_out.transpose() * dx;
    vec(grad, o.bo, d) += dx.colwise().sum().transpose();
    const MatrixXd dattn = dx * cmat(theta_, o.wo, d, d).transpose();
    MatrixXd dqkv(T, 3 * d);
    for (int h = 0; h < nh; ++h) {
      const auto Q = L.qkv.middleCols(h * dh, dh);
      const auto K = L.qkv.middleCols(d + h * dh, dh);
      const auto V = L.qkv.middleCols(2 * d + h * dh, dh);
      const RowMatrix& P = L.probs[h];
      const auto dO = dattn.middleCols(h * dh, dh);
      dqkv.middleCols(2 * d + h * dh, dh).noalias() =
          P.triangularView<Eigen::Lower>().transpose() * dO;
      RowMatrix dP = dO * V.transpose();
      const VectorXd inner = (dP.array() * P.array()).rowwise().sum();
      dP = (P.array() * (dP.colwise() - inner).array()).matrix() * scale;
      dqkv.middleCols(h * dh, dh).noalias() =
          dP.triangularView<Eigen::Lower>() * K;
      dqkv.middleCols(d + h * dh, dh).noalias() =
          dP.triangularView<Eigen::Lower>().transpose() * Q;
    }
    mat(grad, o.wqkv, d, 3 * d).noalias() += L.h1.transpose() * dqkv;
    vec(grad, o.bqkv, 3 * d) += dqkv.colwise().sum().transpose();
    const MatrixXd dh1 = dqkv * cmat(theta_, o.wqkv, d, 3 * d).transpose();
    dx += layer_norm_backward(dh1, L.xhat1, L.rstd1, cvec(theta_, o.ln1_g, d),
                              vec(grad, o.ln1_g, d), vec(grad, o.ln1_b, d));
  }

  auto dtok = mat(grad, lay.tok_emb, v, d);
  auto dpos = mat(grad, lay.pos_emb, config_.context_length, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    dtok.row(a.tokens[t]) += dx.row(t);
    dpos.row(a.positions[t]) += dx.row(t);
  }
}

// ---------------------------------------------------------------------------

IncrementalDecoder::IncrementalDecoder(const Transformer& model)
    : model_(&model) {
  const auto& c = model.config();
  keys_.assign(c.n_layers, MatrixXd(c.context_length, c.d_model));
  values_.assign(c.n_layers, MatrixXd(c.context_length, c.d_model));
}

std::size_t IncrementalDecoder::capacity() const {
  return static_cast<std::size_t>(model_->config().context_length);
}

VectorXd IncrementalDecoder::feed(std::span<const int> tokens) {
  if (tokens.empty()) throw ContextOverflow("feed needs at least one token");
  if (length_ + tokens.size() > capacity()) {
    throw ContextOverflow("decoder context exhausted");
  }
  if (length_ == 0 && tokens.size() > 1) {
    // Prefill with one batched pass and keep its keys and values.
    const int d = model_->config().d_model;
    const int last = static_cast<int>(tokens.size()) - 1;
    Transformer::Activations acts;
    const MatrixXd logp =
        model_->forward(tokens, std::span<const int>(&last, 1), &acts);
    for (std::size_t l = 0; l < keys_.size(); ++l) {
      keys_[l].topRows(tokens.size()) = acts.layers[l].qkv.middleCols(d, d);
      values_[l].topRows(tokens.size()) = acts.layers[l].qkv.middleCols(2 * d, d);
    }
    length_ = tokens.size();
    return logp.row(0).transpose();
  }
  VectorXd out;
  for (int t : tokens) out = step(t);
  return out;
}

VectorXd IncrementalDecoder::step(int token) {
  const Transformer& m = *model_;
  const ModelConfig& c = m.config();
  const Layout lay(c);
  const VectorXd& th = m.theta_;
  const int d = c.d_model, f = c.d_ff, v = c.vocab_size;
  const int nh = c.n_heads, dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (token < 0 || token >= v) throw ContextOverflow("token id out of range");
  const Eigen::Index t = static_cast<Eigen::Index>(length_);

  auto norm = [d](const Eigen::RowVectorXd& x, const ConstVecMap& g,
                  const ConstVecMap& b) {
    const double mean = x.mean();
    const Eigen::RowVectorXd c0 = x.array() - mean;
    const double rstd = 1.0 / std::sqrt(c0.squaredNorm() / d + kLayerNormEps);
    return Eigen::RowVectorXd((c0.array() * rstd * g.transpose().array() +
                               b.transpose().array()).matrix());
  };

  Eigen::RowVectorXd x = cmat(th, lay.tok_emb, v, d).row(token) +
                         cmat(th, lay.pos_emb, c.context_length, d).row(t);
  for (int l = 0; l < c.n_layers; ++l) {
    const LayerOffsets& o = lay.layers[l];
    const Eigen::RowVectorXd h =
        norm(x, cvec(th, o.ln1_g, d), cvec(th, o.ln1_b, d));
    Eigen::RowVectorXd qkv = h * cmat(th, o.wqkv, d, 3 * d);
    qkv += cvec(th, o.bqkv, 3 * d).transpose();
    keys_[l].row(t) = qkv.segment(d, d);
    values_[l].row(t) = qkv.segment(2 * d, d);
    Eigen::RowVectorXd att(d);
    for (int hd = 0; hd < nh; ++hd) {
      const auto K = keys_[l].block(0, hd * dh, t + 1, dh);
      const auto V = values_[l].block(0, hd * dh, t + 1, dh);
      VectorXd s = (K * qkv.segment(hd * dh, dh).transpose()) * scale;
      s = (s.array() - s.maxCoeff()).exp();
      s /= s.sum();
      att.segment(hd * dh, dh) = s.transpose() * V;
    }
    x += att * cmat(th, o.wo, d, d);
    x += cvec(th, o.bo, d).transpose();
    const Eigen::RowVectorXd h2 =
        norm(x, cvec(th, o.ln2_g, d), cvec(th, o.ln2_b, d));
    Eigen::RowVectorXd u = h2 * cmat(th, o.w1, d, f);
    u += cvec(th, o.b1, f).transpose();
    const Eigen::RowVectorXd z = u.unaryExpr([](double w) { return gelu(w); });
    x += z * cmat(th, o.w2, f, d);
    x += cvec(th, o.b2, d).transpose();
  }
  const Eigen::RowVectorXd hf =
      norm(x, cvec(th, lay.lnf_g, d), cvec(th, lay.lnf_b, d));
  MatrixXd logits = hf * cmat(th, lay.w_out, d, v);
  logits.row(0) += cvec(th, lay.b_out, v).transpose();
  log_softmax_rows(logits);
  ++length_;
  return logits.row(0).transpose();
}

}  // namespace copolab
