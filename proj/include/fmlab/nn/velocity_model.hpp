#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/core/condition.hpp"
#include "fmlab/core/error.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/nn/embedding.hpp"

namespace fmlab::nn {

enum class ConditioningMode { class_conditional, mask_conditional };

inline std::string to_string(ConditioningMode m) {
  return m == ConditioningMode::class_conditional ? "class" : "mask";
}

struct ModelConfig {
  ConditioningMode mode = ConditioningMode::class_conditional;
  Shape data_shape = Shape::vector(2);
  /// Class mode: number of sparsity classes C; the label table has C + 1 rows, the
  /// last one being the null token. Mask mode keeps a single (null) row.
  int num_classes = 2;
  /// Mask mode: length of the conditioning map (2 * H * W for a one-hot mask).
  std::size_t cond_dim = 0;
  std::size_t time_dim = 32;
  std::size_t hidden = 128;
  int hidden_layers = 3;
  bool zero_init_output = false;
  /// Adds c * x to the output, with the scalar c = w_c . z + b_c learned from the
  /// conditioning vector. Lets a narrow network represent the x-proportional part of
  /// the velocity when data_dim exceeds the hidden width.
  bool gated_skip = false;
  std::uint64_t init_seed = 0;

  std::size_t data_dim() const { return data_shape.size(); }
  std::size_t input_dim() const { return data_dim() + (mode == ConditioningMode::mask_conditional ? cond_dim : 0); }
  std::size_t label_rows() const {
    return mode == ConditioningMode::class_conditional ? static_cast<std::size_t>(num_classes) + 1 : 1;
  }
  std::size_t null_row() const { return label_rows() - 1; }

  void validate() const {
    if (time_dim == 0 || time_dim % 2) throw ConfigError("time_dim must be even and positive");
    if (hidden == 0 || hidden_layers < 1) throw ConfigError("model needs hidden >= 1 and hidden_layers >= 1");
    if (mode == ConditioningMode::class_conditional && num_classes < 1) throw ConfigError("class mode needs num_classes >= 1");
    if (mode == ConditioningMode::mask_conditional && cond_dim == 0) throw ConfigError("mask mode needs cond_dim > 0");
  }
};

/// Offsets of every tensor inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    Eigen::Index offset = 0, rows = 0, cols = 0;
    Eigen::Index size() const { return rows * cols; }
  };
  Block label_table;            // time_dim x label_rows (one column per label)
  Block cond_w1, cond_b1;       // hidden x time_dim, hidden
  Block cond_w2, cond_b2;       // hidden x hidden, hidden
  std::vector<Block> w, b;      // hidden layers
  Block out_w, out_b;           // data_dim x hidden, data_dim
  Block skip_w, skip_b;         // hidden, 1 (empty without gated_skip)
  Eigen::Index total = 0;

  explicit ParamLayout(const ModelConfig& c) {
    auto add = [this](Eigen::Index rows, Eigen::Index cols) {
      Block blk{total, rows, cols};
      total += rows * cols;
      return blk;
    };
    const auto h = static_cast<Eigen::Index>(c.hidden);
    const auto d = static_cast<Eigen::Index>(c.time_dim);
    label_table = add(d, static_cast<Eigen::Index>(c.label_rows()));
    cond_w1 = add(h, d);
    cond_b1 = add(h, 1);
    cond_w2 = add(h, h);
    cond_b2 = add(h, 1);
    for (int l = 0; l < c.hidden_layers; ++l) {
      w.push_back(add(h, l == 0 ? static_cast<Eigen::Index>(c.input_dim()) : h));
      b.push_back(add(h, 1));
    }
    out_w = add(static_cast<Eigen::Index>(c.data_dim()), h);
    out_b = add(static_cast<Eigen::Index>(c.data_dim()), 1);
    skip_w = add(c.gated_skip ? h : 0, 1);
    skip_b = add(c.gated_skip ? 1 : 0, 1);
  }
};

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

/// Velocity field v(x, t, y): an MLP with SiLU activations.
///
/// The conditioning vector z = MLP(psi(t) + E(y)) (psi the sinusoidal time
/// embedding, E the label table) is added to the pre-activation of every hidden
/// layer. In mask mode the flattened one-hot mask is concatenated to x at the
/// input and E holds only the null row. The null condition selects the last row
/// of E and, in mask mode, an all-zeros map.
class VelocityModel {
 public:
  struct Cache {
    Eigen::MatrixXd input;     // input_dim x B
    Eigen::MatrixXd embed;     // time_dim x B, psi + E
    Eigen::MatrixXd cond_pre;  // hidden x B
    Eigen::MatrixXd cond_act;
    Eigen::MatrixXd z;
    std::vector<Eigen::MatrixXd> pre, act;
    std::vector<std::size_t> rows;  // label row used per column
    Eigen::RowVectorXd skip;   // gated skip scale per column
    Eigen::MatrixXd output;
  };

  explicit VelocityModel(ModelConfig cfg) : cfg_(std::move(cfg)), layout_((cfg_.validate(), cfg_)) {
    params_ = Eigen::VectorXd::Zero(layout_.total);
    initialize(cfg_.init_seed);
  }
  VelocityModel(ModelConfig cfg, Eigen::VectorXd params) : cfg_(std::move(cfg)), layout_((cfg_.validate(), cfg_)) {
    set_params(std::move(params));
  }

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t param_count() const { return static_cast<std::size_t>(layout_.total); }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& mutable_params() { return params_; }
  void set_params(Eigen::VectorXd p) {
    if (p.size() != layout_.total) {
      throw DimensionError("model expects " + std::to_string(layout_.total) + " parameters, got " +
                           std::to_string(p.size()));
    }
    params_ = std::move(p);
  }

  /// Zeroes the label table so the conditioning vector no longer depends on y.
  void clear_label_table() { block(params_, layout_.label_table).setZero(); }

  /// Conditioning vector z for one (t, y).
  Eigen::VectorXd conditioning_vector(double t, const Condition& y) const {
    const std::vector<Condition> ys{y};
    Cache c;
    embed_and_condition(std::vector<double>{t}, ys, c);
    return c.z.col(0);
  }

  /// Batched forward pass: columns of x are samples, ts and ys give each column's
  /// time and condition.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, std::span<const double> ts, std::span<const Condition> ys,
                          Cache* cache = nullptr) const {
    const auto batch = x.cols();
    if (x.rows() != static_cast<Eigen::Index>(cfg_.data_dim())) {
      throw DimensionError("forward: model expects " + std::to_string(cfg_.data_dim()) + " values per sample, got " +
                           std::to_string(x.rows()));
    }
    if (ts.size() != static_cast<std::size_t>(batch) || ys.size() != static_cast<std::size_t>(batch)) {
      throw DimensionError("forward: need one time and one condition per column");
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    build_input(x, ys, c.input);
    embed_and_condition(ts, ys, c);

    c.pre.resize(static_cast<std::size_t>(cfg_.hidden_layers));
    c.act.resize(static_cast<std::size_t>(cfg_.hidden_layers));
    const Eigen::MatrixXd* prev = &c.input;
    for (int l = 0; l < cfg_.hidden_layers; ++l) {
      const auto li = static_cast<std::size_t>(l);
      c.pre[li] = block(params_, layout_.w[li]) * *prev + c.z;
      c.pre[li].colwise() += vec(params_, layout_.b[li]);
      c.act[li] = c.pre[li].unaryExpr([](double v) { return silu(v); });
      prev = &c.act[li];
    }
    c.output = block(params_, layout_.out_w) * *prev;
    c.output.colwise() += vec(params_, layout_.out_b);
    if (cfg_.gated_skip) {
      c.skip = vec(params_, layout_.skip_w).transpose() * c.z;
      c.skip.array() += params_(layout_.skip_b.offset);
      c.output += x * c.skip.asDiagonal();
    }
    return c.output;
  }

  /// Same time for every column.
  Eigen::MatrixXd velocity(const Eigen::MatrixXd& x, double t, std::span<const Condition> ys) const {
    const std::vector<double> ts(static_cast<std::size_t>(x.cols()), t);
    return forward(x, ts, ys);
  }

  /// Reverse-mode gradient of sum(grad_out .* forward(...)) with respect to every
  /// parameter. `cache` must come from forward() on the same inputs.
  Eigen::VectorXd backward(const Cache& c, const Eigen::MatrixXd& grad_out) const {
    if (grad_out.rows() != c.output.rows() || grad_out.cols() != c.output.cols()) {
      throw DimensionError("backward: grad_out shape differs from the forward output");
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(layout_.total);
    const auto last = static_cast<std::size_t>(cfg_.hidden_layers - 1);
    block(g, layout_.out_w) = grad_out * c.act[last].transpose();
    vec(g, layout_.out_b) = grad_out.rowwise().sum();

    Eigen::MatrixXd d_act = block(params_, layout_.out_w).transpose() * grad_out;
    Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(c.z.rows(), c.z.cols());
    if (cfg_.gated_skip) {
      const auto dd = static_cast<Eigen::Index>(cfg_.data_dim());
      const Eigen::RowVectorXd d_skip = grad_out.cwiseProduct(c.input.topRows(dd)).colwise().sum();
      vec(g, layout_.skip_w) = c.z * d_skip.transpose();
      g(layout_.skip_b.offset) = d_skip.sum();
      d_z += vec(params_, layout_.skip_w) * d_skip;
    }
    for (int l = cfg_.hidden_layers - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      const Eigen::MatrixXd d_pre = d_act.cwiseProduct(c.pre[li].unaryExpr([](double v) { return silu_grad(v); }));
      d_z += d_pre;
      const Eigen::MatrixXd& layer_in = l == 0 ? c.input : c.act[li - 1];
      block(g, layout_.w[li]) = d_pre * layer_in.transpose();
      vec(g, layout_.b[li]) = d_pre.rowwise().sum();
      if (l > 0) d_act = block(params_, layout_.w[li]).transpose() * d_pre;
    }

    block(g, layout_.cond_w2) = d_z * c.cond_act.transpose();
    vec(g, layout_.cond_b2) = d_z.rowwise().sum();
    const Eigen::MatrixXd d_cond_pre = (block(params_, layout_.cond_w2).transpose() * d_z)
                                           .cwiseProduct(c.cond_pre.unaryExpr([](double v) { return silu_grad(v); }));
    block(g, layout_.cond_w1) = d_cond_pre * c.embed.transpose();
    vec(g, layout_.cond_b1) = d_cond_pre.rowwise().sum();
    const Eigen::MatrixXd d_embed = block(params_, layout_.cond_w1).transpose() * d_cond_pre;
    auto table = block(g, layout_.label_table);
    for (Eigen::Index col = 0; col < d_embed.cols(); ++col) {
      table.col(static_cast<Eigen::Index>(c.rows[static_cast<std::size_t>(col)])) += d_embed.col(col);
    }
    return g;
  }

  /// Single-sample forward pass.
  Sample forward(const Sample& x, double t, const Condition& y) const {
    check_sample(x);
    const Eigen::MatrixXd out = forward(as_column(x), std::vector<double>{t}, std::vector<Condition>{y});
    return Sample(cfg_.data_shape, std::vector<double>(out.data(), out.data() + out.size()));
  }

  /// Single-sample parameter gradient of <grad_out, forward(x, t, y)>.
  Eigen::VectorXd backward(const Sample& x, double t, const Condition& y, const Sample& grad_out) const {
    check_sample(x);
    check_sample(grad_out);
    Cache c;
    forward(as_column(x), std::vector<double>{t}, std::vector<Condition>{y}, &c);
    return backward(c, as_column(grad_out));
  }

  static MatMap block(Eigen::VectorXd& v, const ParamLayout::Block& b) { return MatMap(v.data() + b.offset, b.rows, b.cols); }
  static ConstMatMap block(const Eigen::VectorXd& v, const ParamLayout::Block& b) {
    return ConstMatMap(v.data() + b.offset, b.rows, b.cols);
  }

 private:
  static Eigen::Map<Eigen::VectorXd> vec(Eigen::VectorXd& v, const ParamLayout::Block& b) {
    return Eigen::Map<Eigen::VectorXd>(v.data() + b.offset, b.rows);
  }
  static Eigen::Map<const Eigen::VectorXd> vec(const Eigen::VectorXd& v, const ParamLayout::Block& b) {
    return Eigen::Map<const Eigen::VectorXd>(v.data() + b.offset, b.rows);
  }

  static Eigen::MatrixXd as_column(const Sample& s) {
    return Eigen::Map<const Eigen::VectorXd>(s.data().data(), static_cast<Eigen::Index>(s.size()));
  }

  void check_sample(const Sample& x) const {
    if (!(x.shape() == cfg_.data_shape)) {
      throw DimensionError("model data shape is " + cfg_.data_shape.to_string() + ", got " + x.shape().to_string());
    }
  }

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](const ParamLayout::Block& b, double stddev) {
      auto m = block(params_, b);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = stddev * normal(rng);
    };
    fill(layout_.label_table, 1.0);
    fill(layout_.cond_w1, 1.0 / std::sqrt(static_cast<double>(layout_.cond_w1.cols)));
    fill(layout_.cond_w2, 1.0 / std::sqrt(static_cast<double>(layout_.cond_w2.cols)));
    for (const auto& w : layout_.w) fill(w, 1.0 / std::sqrt(static_cast<double>(w.cols)));
    if (!cfg_.zero_init_output) fill(layout_.out_w, 1.0 / std::sqrt(static_cast<double>(layout_.out_w.cols)));
  }

  std::size_t label_row(const Condition& y) const {
    if (y.is_null()) return cfg_.null_row();
    if (y.is_label()) {
      if (cfg_.mode != ConditioningMode::class_conditional) throw DomainError("mask-conditioned model got a class label");
      if (y.label() >= cfg_.num_classes) {
        throw DomainError("class label " + std::to_string(y.label()) + " out of range [0, " +
                          std::to_string(cfg_.num_classes) + ")");
      }
      return static_cast<std::size_t>(y.label());
    }
    if (cfg_.mode != ConditioningMode::mask_conditional) throw DomainError("class-conditioned model got a mask map");
    return cfg_.null_row();
  }

  void build_input(const Eigen::MatrixXd& x, std::span<const Condition> ys, Eigen::MatrixXd& input) const {
    if (cfg_.mode == ConditioningMode::class_conditional) {
      input = x;
      return;
    }
    const auto dd = static_cast<Eigen::Index>(cfg_.data_dim());
    const auto cd = static_cast<Eigen::Index>(cfg_.cond_dim);
    input.resize(dd + cd, x.cols());
    input.topRows(dd) = x;
    for (Eigen::Index col = 0; col < x.cols(); ++col) {
      const Condition& y = ys[static_cast<std::size_t>(col)];
      if (y.is_map()) {
        if (y.map().size() != cfg_.cond_dim) {
          throw DimensionError("conditioning map has " + std::to_string(y.map().size()) + " values, model expects " +
                               std::to_string(cfg_.cond_dim));
        }
        input.block(dd, col, cd, 1) = Eigen::Map<const Eigen::VectorXd>(y.map().data(), cd);
      } else {
        label_row(y);  // rejects labels
        input.block(dd, col, cd, 1).setZero();
      }
    }
  }

  void embed_and_condition(std::span<const double> ts, std::span<const Condition> ys, Cache& c) const {
    const auto batch = static_cast<Eigen::Index>(ts.size());
    const auto d = static_cast<Eigen::Index>(cfg_.time_dim);
    c.embed.resize(d, batch);
    c.rows.resize(ts.size());
    const auto table = block(params_, layout_.label_table);
    for (Eigen::Index col = 0; col < batch; ++col) {
      const double t = ts[static_cast<std::size_t>(col)];
      if (!(t >= 0.0 && t <= 1.0)) throw DomainError("forward: t must lie in [0, 1], got " + std::to_string(t));
      time_embedding_into(t, cfg_.time_dim, c.embed.col(col).data());
      const std::size_t row = label_row(ys[static_cast<std::size_t>(col)]);
      c.rows[static_cast<std::size_t>(col)] = row;
      c.embed.col(col) += table.col(static_cast<Eigen::Index>(row));
    }
    c.cond_pre = block(params_, layout_.cond_w1) * c.embed;
    c.cond_pre.colwise() += vec(params_, layout_.cond_b1);
    c.cond_act = c.cond_pre.unaryExpr([](double v) { return silu(v); });
    c.z = block(params_, layout_.cond_w2) * c.cond_act;
    c.z.colwise() += vec(params_, layout_.cond_b2);
  }

  ModelConfig cfg_;
  ParamLayout layout_;
  Eigen::VectorXd params_;
};

}  // namespace fmlab::nn
