#include <omp.h>

#include <algorithm>
#include <vector>

#include "kernels_common.hpp"
#include "kgap/glmfit.hpp"

namespace kgap::glmfit::kernels {

Accumulation accumulate_parallel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& theta, std::size_t chunk_rows) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const auto chunk = static_cast<Eigen::Index>(std::max<std::size_t>(chunk_rows, 1));
  const Eigen::Index n_chunks = (n + chunk - 1) / chunk;

  const Eigen::VectorXd eta = x * theta;

  std::vector<Accumulation> partial(static_cast<std::size_t>(n_chunks));

#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < n_chunks; ++c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index rows = std::min(chunk, n - begin);
    const auto xc = x.middleRows(begin, rows);

    Eigen::VectorXd resid(rows);
    Eigen::VectorXd w(rows);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double e = eta(begin + i);
      const double mu = detail::sigmoid(e);
      const double yi = y(begin + i);
      resid(i) = yi - mu;
      w(i) = mu * (1.0 - mu);
      ll += yi * e - detail::softplus(e);
    }

    auto& out = partial[static_cast<std::size_t>(c)];
    out.score = xc.transpose() * resid;
    out.information = Eigen::MatrixXd::Zero(p, p);
    out.information.selfadjointView<Eigen::Lower>().rankUpdate(
        (xc.array().colwise() * w.array().sqrt()).matrix().transpose());
    out.information.triangularView<Eigen::StrictlyUpper>() =
        out.information.transpose().triangularView<Eigen::StrictlyUpper>();
    out.log_likelihood = ll;
  }

  Accumulation acc{Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p), 0.0};
  for (const auto& part : partial) {
    acc.score += part.score;
    acc.information += part.information;
    acc.log_likelihood += part.log_likelihood;
  }
  return acc;
}

}  // namespace kgap::glmfit::kernels
