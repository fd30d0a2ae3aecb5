#include "kernels_common.hpp"
#include "kgap/glmfit.hpp"

namespace kgap::glmfit::kernels {

Accumulation accumulate_serial(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& theta) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Accumulation acc{Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p), 0.0};

  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) eta += x(i, j) * theta(j);
    const double mu = detail::sigmoid(eta);
    const double w = mu * (1.0 - mu);
    const double resid = y(i) - mu;
    acc.log_likelihood += y(i) * eta - detail::softplus(eta);
    for (Eigen::Index j = 0; j < p; ++j) {
      acc.score(j) += x(i, j) * resid;
      for (Eigen::Index k = 0; k <= j; ++k) acc.information(j, k) += w * x(i, j) * x(i, k);
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) acc.information(k, j) = acc.information(j, k);
  }
  return acc;
}

}  // namespace kgap::glmfit::kernels
