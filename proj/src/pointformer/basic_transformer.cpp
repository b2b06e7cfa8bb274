#include "catdet/pointformer/basic_transformer.hpp"

#include <string>

#include "catdet/errors.hpp"
#include "catdet/numerics/eigen_view.hpp"

namespace catdet::pointformer {

using num::detail::MatrixRM;
using num::detail::view;

void BtParams::validate() const {
  phi.validate();
  psi.validate();
  alpha.validate();
  gamma.validate();
  theta.validate();
  const std::size_t d = width();
  if (psi.out_dim() != d || alpha.out_dim() != d || gamma.out_dim() != d || theta.out_dim() != d) {
    throw ShapeError("basic transformer output widths must all equal " + std::to_string(d));
  }
  if (psi.in_dim() != in_dim() || alpha.in_dim() != in_dim()) throw ShapeError("basic transformer input widths differ");
  if (gamma.in_dim() != d) throw ShapeError("gamma must consume the layer width");
  if (theta.in_dim() != 3) throw ShapeError("theta must consume 3-d offsets");
}

BtParams init_bt(std::size_t in_dim, std::size_t width, std::size_t projection_dim, num::Rng& rng) {
  BtParams p;
  p.phi = num::init_linear(in_dim, width, rng);
  p.psi = num::init_linear(in_dim, width, rng);
  p.alpha = num::init_linear(in_dim, width, rng);
  p.gamma = num::init_mlp(width, projection_dim, width, rng);
  p.theta = num::init_mlp(3, width, width, rng);
  return p;
}

BtEvaluator::BtEvaluator(const BtParams& params, const Tensor& coords, const Tensor& feats)
    : params_(params), coords_(coords) {
  params_.validate();
  if (coords.rank() != 2 || coords.dim(1) != 3) throw ShapeError("basic transformer coords must be [n,3]");
  if (feats.rank() != 2 || feats.dim(0) != coords.dim(0) || feats.dim(1) != params.in_dim()) {
    throw ShapeError("basic transformer feats " + feats.shape_string() + " do not match coords/params");
  }
  phi_ = num::linear_forward(params.phi, feats);
  psi_ = num::linear_forward(params.psi, feats);
  alpha_ = num::linear_forward(params.alpha, feats);
  theta_pre_ = num::matmul_transposed(coords, params.theta.first.weight);
}

void BtEvaluator::evaluate(std::size_t center, std::span<const std::size_t> members, std::span<double> out,
                           Tensor* attention) const {
  if (members.empty()) throw ArgumentError("basic transformer: empty member set");
  const std::size_t n = coords_.dim(0);
  if (center >= n) throw ArgumentError("basic transformer: centre index out of range");
  const std::size_t k = members.size(), d = params_.width();
  const std::size_t hidden = params_.theta.hidden_dim();

  // theta(p_i - p_j) first layer: W(p_i - p_j) + b = (W p_i + b) - W p_j.
  MatrixRM theta_hidden(k, hidden);
  MatrixRM psi_rows(k, d), alpha_rows(k, d);
  const auto pre = view(theta_pre_);
  const Eigen::Map<const Eigen::RowVectorXd> theta_b1(params_.theta.first.bias.data().data(), hidden);
  const Eigen::RowVectorXd center_pre = pre.row(center) + theta_b1;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t m = members[j];
    if (m >= n) throw ArgumentError("basic transformer: member index out of range");
    theta_hidden.row(j) = center_pre - pre.row(m);
    psi_rows.row(j) = view(psi_).row(m);
    alpha_rows.row(j) = view(alpha_).row(m);
  }
  theta_hidden = theta_hidden.cwiseMax(0.0);
  MatrixRM delta = theta_hidden * view(params_.theta.second.weight).transpose();
  delta.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params_.theta.second.bias.data().data(), d);

  MatrixRM relation = (-psi_rows + delta);
  relation.rowwise() += view(phi_).row(center);
  const std::size_t proj = params_.gamma.hidden_dim();
  MatrixRM gamma_hidden = relation * view(params_.gamma.first.weight).transpose();
  gamma_hidden.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params_.gamma.first.bias.data().data(), proj);
  gamma_hidden = gamma_hidden.cwiseMax(0.0);
  MatrixRM logits = gamma_hidden * view(params_.gamma.second.weight).transpose();
  logits.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params_.gamma.second.bias.data().data(), d);

  // Per-channel softmax over the members.
  const Eigen::RowVectorXd peak = logits.colwise().maxCoeff();
  logits.rowwise() -= peak;
  logits = logits.array().exp().matrix();
  const Eigen::RowVectorXd total = logits.colwise().sum();
  for (Eigen::Index c = 0; c < logits.cols(); ++c) logits.col(c) /= total(c);

  const MatrixRM values = alpha_rows + delta;
  Eigen::Map<Eigen::RowVectorXd> y(out.data(), d);
  y = logits.cwiseProduct(values).colwise().sum();
  if (attention) *attention = num::detail::to_tensor(logits);
}

Tensor basic_transformer(const BtParams& params, const Tensor& coords, const Tensor& feats, std::size_t center,
                         std::span<const std::size_t> members) {
  BtEvaluator eval(params, coords, feats);
  Tensor out({params.width()});
  eval.evaluate(center, members, out.data());
  out.check_finite("basic_transformer");
  return out;
}

Tensor basic_transformer_attention(const BtParams& params, const Tensor& coords, const Tensor& feats,
                                   std::size_t center, std::span<const std::size_t> members) {
  BtEvaluator eval(params, coords, feats);
  std::vector<double> scratch(params.width());
  Tensor attention;
  eval.evaluate(center, members, scratch, &attention);
  return attention;
}

}  // namespace catdet::pointformer
