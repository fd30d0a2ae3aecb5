#include <doctest.h>

#include <cmath>

#include "kgap/common/rng.hpp"
#include "kgap/glmfit.hpp"

using namespace kgap;
using namespace kgap::glmfit::kernels;

namespace {

struct Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd theta;
};

Problem random_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index p) {
  Rng rng(seed);
  Problem pr{Eigen::MatrixXd(n, p), Eigen::VectorXd(n), Eigen::VectorXd(p)};
  for (Eigen::Index i = 0; i < n; ++i) {
    pr.x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) pr.x(i, j) = rng.normal();
    pr.y(i) = rng.bernoulli(0.4) ? 1.0 : 0.0;
  }
  for (Eigen::Index j = 0; j < p; ++j) pr.theta(j) = rng.uniform(-1, 1);
  return pr;
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("parallel accumulation matches the serial reference") {
  for (Eigen::Index n : {1, 7, 4095, 4096, 4097, 20000}) {
    for (Eigen::Index p : {1, 3, 12}) {
      const auto pr = random_problem(static_cast<std::uint64_t>(n * 31 + p), n, p);
      const auto s = accumulate_serial(pr.x, pr.y, pr.theta);
      for (std::size_t chunk : {1u, 64u, 4096u, 100000u}) {
        const auto q = accumulate_parallel(pr.x, pr.y, pr.theta, chunk);
        CHECK(rel_diff(q.score, s.score) < 1e-11);
        CHECK(rel_diff(q.information, s.information) < 1e-11);
        CHECK(std::abs(q.log_likelihood - s.log_likelihood) <
              1e-11 * std::max(1.0, std::abs(s.log_likelihood)));
      }
    }
  }
}

TEST_CASE("parallel accumulation is reproducible run to run") {
  const auto pr = random_problem(5, 50000, 6);
  const auto a = accumulate_parallel(pr.x, pr.y, pr.theta);
  const auto b = accumulate_parallel(pr.x, pr.y, pr.theta);
  CHECK(a.score == b.score);
  CHECK(a.information == b.information);
  CHECK(a.log_likelihood == b.log_likelihood);
}

TEST_CASE("accumulation is stable at large linear predictors") {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  Eigen::VectorXd theta(1);
  theta << 800.0;
  const auto s = accumulate_serial(x, y, theta);
  CHECK(std::isfinite(s.log_likelihood));
  CHECK(s.log_likelihood == doctest::Approx(-800.0));
  CHECK(s.score(0) == doctest::Approx(-1.0));
  const auto q = accumulate_parallel(x, y, theta);
  CHECK(q.log_likelihood == s.log_likelihood);
}

TEST_CASE("empty input gives zero accumulations") {
  const Eigen::MatrixXd x(0, 3);
  const Eigen::VectorXd y(0);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
  const auto q = accumulate_parallel(x, y, theta);
  CHECK(q.score.size() == 3);
  CHECK(q.score.isZero());
  CHECK(q.information.isZero());
  CHECK(q.log_likelihood == 0.0);
}
