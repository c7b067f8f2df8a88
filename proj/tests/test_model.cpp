#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "surme/model.hpp"
#include "surme/simulate.hpp"

using namespace surme;

TEST_SUITE("model") {

TEST_CASE("a conforming Case-I dataset validates") {
  RngStream rng(11);
  const SurDataset d = generate_dataset(DgpConfig::preset("I-1"), rng);
  const Problem p = validate(d, PriorSpec::defaults(d.k_per_equation()));
  CHECK(p.data().n() == 300);
  CHECK(p.data().m() == 2);
  CHECK(p.data().k() == 6);
}

TEST_CASE("validate lists every problem it finds") {
  RngStream rng(12);
  SurDataset d = generate_dataset(DgpConfig::preset("I-1"), rng);
  d.w.conservativeResize(299, Eigen::NoChange);
  PriorSpec pr = PriorSpec::defaults(d.k_per_equation());
  pr.delta2 = -1.0;
  pr.beta0 = VectorXd::Ones(5);
  try {
    validate(d, pr);
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    const auto& probs = err.problems();
    CHECK(probs.size() >= 3);
    auto has = [&](const std::string& needle) {
      return std::any_of(probs.begin(), probs.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
    };
    CHECK(has("dimension mismatch"));
    CHECK(has("delta2"));
    CHECK(has("beta0"));
  }
}

TEST_CASE("a B0 with a negative eigenvalue is rejected by name") {
  MatrixXd b0 = MatrixXd::Identity(3, 3);
  b0(2, 2) = -0.5;
  try {
    PdMatrix bad(b0, "B0");
    FAIL("expected PdFailure");
  } catch (const PdFailure& err) {
    CHECK(err.matrix_name() == "B0");
    CHECK(std::string(err.what()).find("B0") != std::string::npos);
  }
}

TEST_CASE("reliability ratio examples") {
  CHECK(reliability_ratio(1.0, 0.25) == doctest::Approx(0.8));
  CHECK(reliability_ratio(0.0625, 0.0469) == doctest::Approx(0.5714).epsilon(1e-4));
  CHECK(reliability_ratio(3.0, 0.0) == 1.0);
  double prev = 1.0;
  for (double u = 0.01; u < 5.0; u += 0.1) {
    const double r = reliability_ratio(1.0, u);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("block-diagonal design and its products agree with dense assembly") {
  const auto toy = testing::make_toy(5, {2, 3}, true, 13);
  const SurDataset& d = toy.data;
  CHECK(d.k() == 5);
  CHECK(d.offset(1) == 2);
  const VectorXd coef = VectorXd::LinSpaced(5, -1.0, 1.0);
  const MatrixXd applied = d.apply(coef);
  const MatrixXd v = MatrixXd::Random(5, 2);
  VectorXd acc = VectorXd::Zero(5);
  for (Index i = 0; i < d.n(); ++i) {
    const MatrixXd xi = d.design(i);
    CHECK(xi.rows() == 2);
    CHECK(xi.cols() == 5);
    CHECK(xi(0, 2) == 0.0);
    CHECK(xi(1, 0) == 0.0);
    CHECK((xi * coef - applied.row(i).transpose()).norm() < 1e-14);
    acc += xi.transpose() * v.row(i).transpose();
  }
  CHECK((d.apply_transpose(v) - acc).norm() < 1e-12);

  const Problem p = validate(d, toy.priors);
  MatrixXd prec(2, 2);
  prec << 2.0, 0.3, 0.3, 1.0;
  MatrixXd dense = MatrixXd::Zero(5, 5);
  for (Index i = 0; i < d.n(); ++i) dense += d.design(i).transpose() * prec * d.design(i);
  CHECK((p.weighted_gram(prec) - dense).norm() < 1e-12);
}

TEST_CASE("canonical names and flatten agree") {
  const auto names = surme_parameter_names({3, 3}, true);
  REQUIRE(names.size() == 19);
  CHECK(names.front() == "beta_1_1");
  CHECK(names[6] == "gamma_1");
  CHECK(names[8] == "sigma_1_1");
  CHECK(names[9] == "sigma_1_2");
  CHECK(names[11] == "sigma_z2");
  CHECK(names[12] == "sigma_u2");
  CHECK(names[13] == "omega_1_1");
  const auto mu_names = surme_parameter_names({3, 3}, false);
  CHECK(mu_names.back() == "mu_2");
  CHECK(sur_parameter_names({3, 3}).size() == 11);

  const auto toy = testing::make_toy(4, {3, 3}, true, 14);
  const VectorXd flat = flatten(toy.state, true);
  CHECK(flat.size() == 19);
  CHECK(flat(6) == toy.state.gamma(0));
  CHECK(flat(9) == toy.state.sigma_eps(0, 1));
  CHECK(flat(11) == toy.state.sigma_z2);
}

TEST_CASE("dataset digest tracks the observed data") {
  const auto a = testing::make_toy(6, {2, 2}, true, 15);
  auto b = a;
  CHECK(dataset_digest(a.data) == dataset_digest(b.data));
  b.data.y(0, 0) += 1e-12;
  CHECK(dataset_digest(a.data) != dataset_digest(b.data));
}

}  // TEST_SUITE
