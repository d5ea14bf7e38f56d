#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <thread>

#include "bdab/geometry.hpp"
#include "bdab/potentials.hpp"
#include "bdab/rate_distortion.hpp"
#include "oracles.hpp"

using namespace bdab;

namespace {

/// The 3x3 experiment instance: P_X = (0.5, 0.3, 0.2), c = 1.5.
RdProblem experiment_problem() {
  Eigen::VectorXd p_x(3);
  p_x << 0.5, 0.3, 0.2;
  Eigen::MatrixXd distortion(3, 3);
  distortion << 0, 1, 2,
                1, 2, 0,
                3, 0, 1;
  return make_rd_problem(make_distribution(p_x), distortion, 1.5);
}

/// Reference optimal conditional for the experiment instance, already
/// transposed into row-stochastic (x-row) convention.
Eigen::MatrixXd experiment_w_star() {
  Eigen::MatrixXd w(3, 3);
  w << 0.0855598, 0.22431, 0.69013,
       0.188594, 0.494433, 0.316974,
       0.430983, 0.139579, 0.429438;
  return w;
}

const double kExperimentRate = 0.100039;

/// As printed the reference rows sum to 1 only within ~1e-6; rescale before
/// handing it to the validated conditional type.
Eigen::MatrixXd experiment_w_star_normalized() {
  Eigen::MatrixXd w = experiment_w_star();
  for (int x = 0; x < w.rows(); ++x) w.row(x) /= w.row(x).sum();
  return w;
}

RdProblem binary_hamming(double c) {
  Eigen::VectorXd p_x(2);
  p_x << 0.5, 0.5;
  Eigen::MatrixXd distortion(2, 2);
  distortion << 0, 1,
                1, 0;
  return make_rd_problem(make_distribution(p_x), distortion, c);
}

Eigen::VectorXd eta_of_w(const RdProblem& problem, const RdBasis& basis,
                         const Eigen::MatrixXd& w) {
  return eta_from_joint(basis, JointTable{problem.p_x.probs.asDiagonal() * w});
}

int schedule_f1(int t) { return 5 + t; }
int schedule_f2(int t) { return static_cast<int>(std::ceil(5.0 + 3.0 * std::log(t))); }

}  // namespace

TEST_CASE("problem validation") {
  Eigen::VectorXd p2(2);
  p2 << 0.6, 0.4;
  Eigen::MatrixXd hamming(2, 2);
  hamming << 0, 1, 1, 0;

  SUBCASE("distribution invariants") {
    Eigen::VectorXd bad(2);
    bad << 0.7, 0.4;
    CHECK_THROWS_AS(make_distribution(bad), ArgumentError);
    bad << -0.1, 1.1;
    CHECK_THROWS_AS(make_distribution(bad), ArgumentError);
  }
  SUBCASE("conditional invariants") {
    Eigen::MatrixXd w(2, 2);
    w << 0.5, 0.6, 0.5, 0.5;
    CHECK_THROWS_AS(make_conditional(w), ArgumentError);
  }
  SUBCASE("corner condition on the distortion matrix") {
    Eigen::MatrixXd equal(2, 2);
    equal << 0, 1, 1, 1;
    CHECK_THROWS_AS(make_rd_problem(make_distribution(p2), equal, 0.5), ArgumentError);
  }
  SUBCASE("infeasible level") {
    CHECK_THROWS_AS(make_rd_problem(make_distribution(p2), hamming, 0.0), ArgumentError);
    CHECK_THROWS_AS(make_rd_problem(make_distribution(p2), hamming, 1.5), ArgumentError);
  }
  SUBCASE("degenerate alphabets") {
    Eigen::VectorXd p1(1);
    p1 << 1.0;
    Eigen::MatrixXd r11(1, 1);
    r11 << 0.0;
    CHECK_THROWS_AS(make_rd_problem(make_distribution(p1), r11, 0.5), ArgumentError);
    Eigen::MatrixXd r12(1, 2);
    r12 << 0.0, 1.0;
    CHECK_THROWS_AS(make_rd_problem(make_distribution(p1), r12, 0.5), ArgumentError);
  }
  SUBCASE("zero-mass source symbols are rejected") {
    Eigen::VectorXd pz(2);
    pz << 1.0, 0.0;
    CHECK_THROWS_AS(make_rd_problem(make_distribution(pz), hamming, 0.5), ArgumentError);
  }
}

TEST_CASE("rate-distortion basis") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);

  SUBCASE("dimension count") { CHECK(basis.d0 == 5); }

  SUBCASE("defining identities") {
    for (int i = 0; i < basis.d0; ++i)
      for (int j = 0; j < basis.d0; ++j)
        CHECK(std::abs(basis.f.row(i).dot(basis.g.row(j)) - (i == j ? 1.0 : 0.0)) <=
              1e-10);
    for (int j = 0; j < basis.d0; ++j) {
      double r_sum = 0.0;
      for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y)
          r_sum += problem.distortion(x, y) * basis.g(j, x * 3 + y);
      CHECK(std::abs(r_sum) <= 1e-10);
      for (int x = 0; x < 3; ++x) {
        double row_sum = 0.0;
        for (int y = 0; y < 3; ++y) row_sum += basis.g(j, x * 3 + y);
        CHECK(std::abs(row_sum) <= 1e-10);
      }
    }
  }

  SUBCASE("2x2 duals agree with a direct linear solve") {
    const RdProblem hamming = binary_hamming(0.3);
    const RdBasis hb = build_rd_basis(hamming);
    // The identities pin each g^j uniquely: biorthogonality with every f,
    // orthogonality to the distortion, and per-row zero sums.
    const int n = 4;
    Eigen::MatrixXd lhs(n, n);
    Eigen::VectorXd rhs(n);
    for (int j = 0; j < hb.d0; ++j) {
      int row = 0;
      for (int i = 0; i < hb.d0; ++i, ++row) {
        lhs.row(row) = hb.f.row(i);
        rhs[row] = (i == j) ? 1.0 : 0.0;
      }
      for (int x = 0; x < 2; ++x, ++row) {
        lhs.row(row).setZero();
        for (int y = 0; y < 2; ++y) lhs(row, x * 2 + y) = 1.0;
        rhs[row] = 0.0;
      }
      lhs.row(row).setZero();
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) lhs(row, x * 2 + y) = hamming.distortion(x, y);
      rhs[row] = 0.0;
      const Eigen::VectorXd solved = lhs.fullPivLu().solve(rhs);
      CHECK((solved.transpose() - hb.g.row(j)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("degenerate corner is rejected") {
    RdProblem bad = experiment_problem();
    bad.distortion(2, 1) = bad.distortion(2, 2);
    CHECK_THROWS_AS(build_rd_basis(bad), ArgumentError);
  }

  SUBCASE("identities also hold for a single-symbol source") {
    Eigen::VectorXd p1(1);
    p1 << 1.0;
    Eigen::MatrixXd r(1, 3);
    r << 0.0, 1.0, 2.0;
    const RdProblem thin = make_rd_problem(make_distribution(p1), r, 0.8);
    const RdBasis tb = build_rd_basis(thin);
    CHECK(tb.d0 == 1);
    CHECK(std::abs(tb.f.row(0).dot(tb.g.row(0)) - 1.0) <= 1e-10);
    double r_sum = 0.0, row_sum = 0.0;
    for (int y = 0; y < 3; ++y) {
      r_sum += r(0, y) * tb.g(0, y);
      row_sum += tb.g(0, y);
    }
    CHECK(std::abs(r_sum) <= 1e-10);
    CHECK(std::abs(row_sum) <= 1e-10);
  }
}

TEST_CASE("solver invocations are independent across threads") {
  const RdProblem problem = experiment_problem();
  SolverConfig config;
  const RdSolveResult serial =
      rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5));

  std::vector<RdSolveResult> results(4);
  std::vector<std::thread> workers;
  workers.reserve(results.size());
  for (auto& slot : results)
    workers.emplace_back([&problem, &config, &slot]() {
      slot = rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5));
    });
  for (auto& worker : workers) worker.join();
  for (const auto& result : results) {
    CHECK(result.core.iterations == serial.core.iterations);
    CHECK(result.core.objective == serial.core.objective);
    CHECK((result.w - serial.w).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("joint_from_eta") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);

  SUBCASE("round trip through the chart is exact") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(-0.4, 0.6);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd eta(basis.d0);
      for (int i = 0; i < basis.d0; ++i) eta[i] = u(rng);
      const JointTable joint = joint_from_eta(problem, basis, eta);
      const Eigen::VectorXd recovered = eta_from_joint(basis, joint);
      CHECK((recovered - eta).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((joint_from_eta(problem, basis, recovered).values - joint.values)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
  }
  SUBCASE("chart identities hold for arbitrary eta") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.7);
    bool saw_negative = false;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd eta(basis.d0);
      for (int i = 0; i < basis.d0; ++i) eta[i] = u(rng);
      const JointTable joint = joint_from_eta(problem, basis, eta);
      saw_negative = saw_negative || joint.values.minCoeff() < 0.0;
      CHECK((joint.values.rowwise().sum() - problem.p_x.probs).cwiseAbs().maxCoeff() <=
            1e-10);
      CHECK(std::abs(joint.values.cwiseProduct(problem.distortion).sum() -
                     problem.level) <= 1e-10);
    }
    CHECK(saw_negative);  // the sweep covers infeasible charts
  }
  SUBCASE("reference optimum maps into the chart") {
    const Eigen::VectorXd eta = eta_of_w(problem, basis, experiment_w_star());
    const Eigen::MatrixXd joint = joint_from_eta(problem, basis, eta).values;
    CHECK((joint - problem.p_x.probs.asDiagonal() * experiment_w_star())
              .cwiseAbs()
              .maxCoeff() < 1e-6);
  }
}

TEST_CASE("negative-mass inequality") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-0.6, 0.8);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd eta(basis.d0);
    for (int i = 0; i < basis.d0; ++i) eta[i] = u(rng);
    const Eigen::MatrixXd joint = joint_from_eta(problem, basis, eta).values;
    double negative_mass = 0.0;
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y)
        if (joint(x, y) < 0.0) negative_mass -= joint(x, y);
    double negative_marginal = 0.0;
    for (int y = 0; y < 3; ++y) {
      const double m = joint.col(y).sum();
      if (m < 0.0) negative_marginal -= m;
    }
    CHECK(negative_mass >= negative_marginal - 1e-12);
  }
}

TEST_CASE("rd_objective") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);

  SUBCASE("product member evaluates to zero") {
    // Feasible product chart requires c inside the product range; use a
    // Hamming instance at c = 0.5 where the uniform product is feasible.
    const RdProblem hamming = binary_hamming(0.5);
    const RdBasis hb = build_rd_basis(hamming);
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);
    const Eigen::VectorXd eta = eta_of_w(hamming, hb, uniform);
    CHECK(std::abs(rd_objective(hamming, hb, 1e-4, eta)) < 1e-12);
  }
  SUBCASE("reference optimum reproduces the known rate") {
    const Eigen::VectorXd eta = eta_of_w(problem, basis, experiment_w_star());
    CHECK(rd_objective(problem, basis, 1e-4, eta) ==
          doctest::Approx(kExperimentRate).epsilon(1e-3));
    CHECK(std::abs(rd_objective(problem, basis, 1e-4, eta) - kExperimentRate) < 1e-4);
  }
  SUBCASE("interior points match the direct mutual-information sum") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      // Random conditional, then blend toward the reference optimum until
      // the chart is entrywise positive.
      Eigen::MatrixXd w(3, 3);
      for (int x = 0; x < 3; ++x) {
        for (int y = 0; y < 3; ++y) w(x, y) = 0.05 + u(rng);
        w.row(x) /= w.row(x).sum();
      }
      Eigen::VectorXd eta = eta_of_w(problem, basis, w);
      const Eigen::VectorXd eta_star = eta_of_w(problem, basis, experiment_w_star());
      Eigen::MatrixXd joint;
      for (double blend = 1.0; blend > 1e-6; blend *= 0.7) {
        eta = blend * eta + (1.0 - blend) * eta_star;
        joint = joint_from_eta(problem, basis, eta).values;
        if (joint.minCoeff() > 2e-4) break;
      }
      REQUIRE(joint.minCoeff() > 2e-4);
      CHECK(std::abs(rd_objective(problem, basis, 1e-4, eta) -
                     testing::mutual_information_from_joint(joint)) < 1e-10);
    }
  }
  SUBCASE("clipping constant is inert on interior points") {
    const Eigen::VectorXd eta = eta_of_w(problem, basis, experiment_w_star());
    const double a = rd_objective(problem, basis, 1e-4, eta);
    const double b = rd_objective(problem, basis, 1e-3, eta);
    CHECK(std::abs(a - b) < 1e-12);
  }
}

TEST_CASE("rd_omega") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);

  SUBCASE("uniform product chart has vanishing components") {
    Eigen::VectorXd p2(2);
    p2 << 0.5, 0.5;
    Eigen::MatrixXd r(2, 2);
    r << 0, 1, 1, 0;
    const RdProblem hamming = make_rd_problem(make_distribution(p2), r, 0.5);
    const RdBasis hb = build_rd_basis(hamming);
    const Eigen::VectorXd eta =
        eta_of_w(hamming, hb, Eigen::MatrixXd::Constant(2, 2, 0.5));
    CHECK(rd_omega(hamming, hb, 1e-4, eta).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("pairing with (eta, 1) reproduces the objective") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-0.3, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd eta(basis.d0);
      for (int i = 0; i < basis.d0; ++i) eta[i] = u(rng);
      const Eigen::VectorXd omega = rd_omega(problem, basis, 1e-4, eta);
      const double paired = eta.dot(omega.head(basis.d0)) + omega[basis.d0];
      CHECK(std::abs(paired - rd_objective(problem, basis, 1e-4, eta)) < 1e-12);
    }
  }
  SUBCASE("interior components match finite differences of the objective") {
    const Eigen::VectorXd eta = eta_of_w(problem, basis, experiment_w_star());
    const Eigen::VectorXd fd = testing::finite_difference_gradient(
        [&](const Eigen::VectorXd& e) { return rd_objective(problem, basis, 1e-4, e); },
        eta);
    CHECK((rd_omega(problem, basis, 1e-4, eta).head(basis.d0) - fd)
              .cwiseAbs()
              .maxCoeff() < 1e-4);
  }
  SUBCASE("free components are near-stationary at the reference optimum") {
    const Eigen::VectorXd eta = eta_of_w(problem, basis, experiment_w_star());
    CHECK(rd_omega(problem, basis, 1e-4, eta).head(basis.d0).norm() < 1e-3);
  }
}

TEST_CASE("mutual information and expected distortion") {
  const RdProblem problem = experiment_problem();

  SUBCASE("identical rows carry no information") {
    Eigen::MatrixXd w(2, 3);
    w << 0.2, 0.5, 0.3,
         0.2, 0.5, 0.3;
    Eigen::VectorXd p(2);
    p << 0.4, 0.6;
    CHECK(mutual_information(make_distribution(p), make_conditional(w)) ==
          doctest::Approx(0.0));
  }
  SUBCASE("noiseless channel on a uniform ternary source") {
    Eigen::VectorXd p(3);
    p << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    CHECK(mutual_information(make_distribution(p),
                             make_conditional(Eigen::MatrixXd::Identity(3, 3))) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("reference optimum") {
    const auto w = make_conditional(experiment_w_star_normalized());
    CHECK(std::abs(mutual_information(problem.p_x, w) - kExperimentRate) < 1e-5);
    CHECK(std::abs(expected_distortion(problem.p_x, w, problem.distortion) - 1.5) < 1e-4);
  }
  SUBCASE("zero distortion matrix") {
    const auto w = make_conditional(experiment_w_star_normalized());
    CHECK(expected_distortion(problem.p_x, w, Eigen::MatrixXd::Zero(3, 3)) ==
          doctest::Approx(0.0));
  }
  SUBCASE("uniform conditional on binary Hamming") {
    Eigen::VectorXd p(2);
    p << 0.5, 0.5;
    Eigen::MatrixXd r(2, 2);
    r << 0, 1, 1, 0;
    CHECK(expected_distortion(make_distribution(p),
                              make_conditional(Eigen::MatrixXd::Constant(2, 2, 0.5)),
                              r) == doctest::Approx(0.5));
  }
}

TEST_CASE("m_project_product") {
  const RdProblem problem = experiment_problem();

  SUBCASE("products are fixed points") {
    Eigen::VectorXd q(3);
    q << 0.2, 0.5, 0.3;
    const JointTable product{problem.p_x.probs * q.transpose()};
    CHECK((m_project_product(product).values - product.values).cwiseAbs().maxCoeff() <
          1e-14);
  }
  SUBCASE("divergence to the projection is the mutual information") {
    const Eigen::MatrixXd joint = problem.p_x.probs.asDiagonal() * experiment_w_star();
    const JointTable projected = m_project_product(JointTable{joint});
    double kl = 0.0;
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y)
        kl += joint(x, y) * std::log(joint(x, y) / projected.values(x, y));
    CHECK(std::abs(kl - kExperimentRate) < 1e-4);
  }
  SUBCASE("affine extension to signed tables") {
    Eigen::MatrixXd signed_table(2, 2);
    signed_table << 0.7, -0.1,
                    0.25, 0.15;
    const JointTable projected = m_project_product(JointTable{signed_table});
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        CHECK(projected.values(x, y) ==
              doctest::Approx(signed_table.row(x).sum() * signed_table.col(y).sum())
                  .epsilon(1e-14));
  }
}

TEST_CASE("f_hat") {
  const RdProblem problem = experiment_problem();
  const DiscreteDistribution uniform{Eigen::VectorXd::Constant(3, 1.0 / 3)};

  SUBCASE("tau = 0 evaluates to zero") {
    CHECK(f_hat(problem.p_x, uniform, problem.distortion, problem.level, 0.0).value ==
          doctest::Approx(0.0));
  }
  SUBCASE("constant distortion equal to c vanishes for all tau") {
    const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(3, 3, 1.5);
    for (const double tau : {-2.0, 0.3, 5.0})
      CHECK(std::abs(
                f_hat(problem.p_x, uniform, constant, problem.level, tau).value) < 1e-12);
  }
  SUBCASE("direct summation at tau = 0.5") {
    const double tau = 0.5;
    double expected = 0.0;
    for (int x = 0; x < 3; ++x) {
      double z = 0.0;
      for (int y = 0; y < 3; ++y)
        z += std::exp(tau * (problem.level - problem.distortion(x, y))) / 3.0;
      expected += problem.p_x.probs[x] * std::log(z);
    }
    CHECK(f_hat(problem.p_x, uniform, problem.distortion, problem.level, tau).value ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("derivatives match finite differences") {
    const double tau = -0.8;
    auto value_at = [&](double t) {
      return f_hat(problem.p_x, uniform, problem.distortion, problem.level, t).value;
    };
    const FhatDerivatives d =
        f_hat(problem.p_x, uniform, problem.distortion, problem.level, tau);
    const double h = 1e-6;
    CHECK(d.first ==
          doctest::Approx((value_at(tau + h) - value_at(tau - h)) / (2 * h)).epsilon(1e-6));
    CHECK(d.second == doctest::Approx((value_at(tau + h) - 2 * value_at(tau) +
                                       value_at(tau - h)) /
                                      (h * h))
                          .epsilon(1e-3));
  }
}

TEST_CASE("rd_solve_minfree") {
  const RdProblem problem = experiment_problem();

  SUBCASE("reproduces the experiment values") {
    SolverConfig config;  // gamma 50
    const RdSolveResult result =
        rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5));
    REQUIRE(result.core.reason == Termination::kTolerance);
    CHECK(std::abs(result.core.objective - kExperimentRate) < 1e-4);
    CHECK(std::abs(result.distortion - 1.5) < 1e-4);
    CHECK((result.w - experiment_w_star()).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("one step from the flat start decreases the objective") {
    SolverConfig config;
    config.max_iterations = 1;
    const RdSolveResult result =
        rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5));
    REQUIRE(result.core.trace.records.size() == 2);
    CHECK(result.core.trace.records[1].objective <
          result.core.trace.records[0].objective);
  }
  SUBCASE("binary Hamming matches the analytic rate") {
    const RdProblem hamming = binary_hamming(0.1);
    SolverConfig config;
    const RdSolveResult result =
        rd_solve_minfree(hamming, config, 1e-4, Eigen::VectorXd::Zero(1));
    REQUIRE(result.core.reason == Termination::kTolerance);
    CHECK(std::abs(result.core.objective - testing::binary_hamming_rd(0.1)) < 1e-4);
  }
  SUBCASE("level near the product range yields a near-zero rate") {
    const RdProblem easy = binary_hamming(0.45);
    SolverConfig config;
    const RdSolveResult result =
        rd_solve_minfree(easy, config, 1e-4, Eigen::VectorXd::Zero(1));
    REQUIRE(result.core.reason == Termination::kTolerance);
    const auto oracle =
        testing::brute_force_rd(easy.p_x.probs, easy.distortion, easy.level, 1e-3);
    CHECK(result.core.objective < 0.01);
    CHECK(std::abs(result.core.objective - oracle.value) < 1e-3);
  }
  SUBCASE("trace carries the chart minimum entry") {
    SolverConfig config;
    config.max_iterations = 5;
    const RdSolveResult result =
        rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5));
    for (const auto& rec : result.core.trace.records)
      CHECK(std::isfinite(rec.min_entry));
    // The flat start lies outside the feasible region.
    CHECK(result.core.trace.records.front().min_entry < 0.0);
  }
}

TEST_CASE("em_solve") {
  const RdProblem problem = experiment_problem();

  SUBCASE("reproduces the experiment values") {
    SolverConfig config;
    const RdSolveResult result = em_solve(problem, config);
    REQUIRE(result.core.reason == Termination::kTolerance);
    CHECK(std::abs(result.core.objective - kExperimentRate) < 1e-4);
    CHECK(std::abs(result.distortion - 1.5) < 1e-4);
    CHECK(result.em_sign == -1);
  }
  SUBCASE("mutual-information trace is non-increasing") {
    SolverConfig config;
    const RdSolveResult result = em_solve(problem, config);
    const auto& recs = result.core.trace.records;
    for (std::size_t i = 1; i < recs.size(); ++i)
      CHECK(recs[i].objective <= recs[i - 1].objective + 1e-10);
  }
  SUBCASE("binary Hamming matches the analytic rate") {
    SolverConfig config;
    const RdSolveResult result = em_solve(binary_hamming(0.1), config);
    CHECK(std::abs(result.core.objective - testing::binary_hamming_rd(0.1)) < 1e-4);
  }
  SUBCASE("two outer steps equal a manual m-step/e-step replay") {
    SolverConfig config;
    config.max_iterations = 2;
    const RdSolveResult result = em_solve(problem, config);

    // Manual replay: m-step multiplier by bisection on the F-hat slope,
    // tilted conditional, then the e-step marginal by direct summation.
    DiscreteDistribution p_y{Eigen::VectorXd::Constant(3, 1.0 / 3)};
    Eigen::MatrixXd w;
    for (int outer = 0; outer < 2; ++outer) {
      double lo = -60.0, hi = 60.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double slope =
            f_hat(problem.p_x, p_y, problem.distortion, problem.level, mid).first;
        (slope > 0.0 ? hi : lo) = mid;  // F-hat' is increasing in tau
      }
      const double tau = 0.5 * (lo + hi);
      w.resize(3, 3);
      for (int x = 0; x < 3; ++x) {
        for (int y = 0; y < 3; ++y)
          w(x, y) = p_y.probs[y] * std::exp(-tau * problem.distortion(x, y));
        w.row(x) /= w.row(x).sum();
      }
      Eigen::VectorXd marginal = Eigen::VectorXd::Zero(3);
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) marginal[y] += w(x, y) * problem.p_x.probs[x];
      p_y.probs = marginal;
    }
    CHECK((result.w - w).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("em_solve_newton") {
  const RdProblem problem = experiment_problem();

  SUBCASE("a saturating schedule matches the exact m-step") {
    SolverConfig config;
    const RdSolveResult exact = em_solve(problem, config);
    const RdSolveResult scheduled =
        em_solve_newton(problem, config, [](int) { return 100; });
    CHECK(std::abs(exact.core.objective - scheduled.core.objective) < 1e-8);
  }
  SUBCASE("linear schedule converges with the prescribed inner counts") {
    SolverConfig config;
    const RdSolveResult result = em_solve_newton(problem, config, schedule_f1);
    REQUIRE(result.core.reason == Termination::kTolerance);
    CHECK(std::abs(result.core.objective - kExperimentRate) < 1e-4);
    std::int64_t expected = 0;
    for (std::size_t i = 0; i < result.core.trace.records.size(); ++i) {
      expected += schedule_f1(static_cast<int>(i) + 1);
      CHECK(result.core.trace.records[i].cumulative_inner == expected);
    }
  }
  SUBCASE("schedules must prescribe at least one inner step") {
    SolverConfig config;
    CHECK_THROWS_AS(em_solve_newton(problem, config, [](int) { return 0; }),
                    ArgumentError);
    CHECK_THROWS_AS(em_solve_newton(problem, config, nullptr), ArgumentError);
  }
  SUBCASE("logarithmic schedule reaches the same limit with fewer inner steps") {
    SolverConfig config;
    const RdSolveResult f1 = em_solve_newton(problem, config, schedule_f1);
    const RdSolveResult f2 = em_solve_newton(problem, config, schedule_f2);
    CHECK(std::abs(f1.core.objective - f2.core.objective) < 1e-8);
    CHECK(f2.core.trace.records.back().cumulative_inner <
          f1.core.trace.records.back().cumulative_inner);
    std::int64_t expected = 0;
    for (std::size_t i = 0; i < f2.core.trace.records.size(); ++i) {
      expected += schedule_f2(static_cast<int>(i) + 1);
      CHECK(f2.core.trace.records[i].cumulative_inner == expected);
    }
  }
}

TEST_CASE("solver agreement on the experiment instance") {
  const RdProblem problem = experiment_problem();
  SolverConfig config;
  const double minfree =
      rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5)).core.objective;
  const double em = em_solve(problem, config).core.objective;
  const double f1 = em_solve_newton(problem, config, schedule_f1).core.objective;
  const double f2 = em_solve_newton(problem, config, schedule_f2).core.objective;
  CHECK(std::abs(minfree - em) < 2e-4);
  CHECK(std::abs(f1 - em) < 2e-4);
  CHECK(std::abs(f2 - em) < 2e-4);
}

TEST_CASE("gamma estimate sampled near the optimum stays within the working choice") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);
  const LogPartitionSystem system = make_log_partition_system(
      FeatureBasis{basis.f, std::nullopt});
  Objective objective;
  objective.dimension = basis.d0 + 1;
  objective.omega = [&](const NaturalPoint& theta) {
    return rd_omega(problem, basis, 1e-4, system.gradient(theta).head(basis.d0));
  };

  SolverConfig config;
  const RdSolveResult solved =
      rd_solve_minfree(problem, config, 1e-4, Eigen::VectorXd::Zero(5));
  REQUIRE(solved.core.reason == Termination::kTolerance);

  // Certificates are about iterate pairs; sample the converged tail of the
  // trajectory in both orders.
  const auto& recs = solved.core.trace.records;
  std::vector<std::pair<NaturalPoint, MixturePoint>> samples;
  for (std::size_t i = recs.size() / 2; i + 1 < recs.size(); ++i) {
    samples.push_back({recs[i + 1].theta, recs[i].theta});
    samples.push_back({recs[i].theta, recs[i + 1].theta});
  }
  const double estimate = estimate_gamma(system, objective, samples);
  CHECK(estimate >= 0.0);
  CHECK(estimate <= 50.0);
}

TEST_CASE("mirror baseline matches the closed-form iteration step by step") {
  const RdProblem problem = experiment_problem();
  SolverConfig warm;
  warm.max_iterations = 400;
  const RdSolveResult head =
      rd_solve_minfree(problem, warm, 1e-4, Eigen::VectorXd::Zero(5));
  // Interior restart: both solvers see a convex objective from here on.
  const Eigen::VectorXd restart = head.core.theta.head(5);

  SolverConfig config;
  config.max_iterations = 50;
  config.objective_tolerance = 1e-13;
  const RdSolveResult minfree = rd_solve_minfree(problem, config, 1e-4, restart);
  const RdSolveResult mirror = rd_solve_mirror(problem, config, 1e-4, restart);
  REQUIRE(minfree.core.trace.records.size() == mirror.core.trace.records.size());
  for (std::size_t i = 0; i < minfree.core.trace.records.size(); ++i)
    CHECK(std::abs(minfree.core.trace.records[i].objective -
                   mirror.core.trace.records[i].objective) < 1e-7);
}

TEST_CASE("em_objective_general") {
  const RdProblem problem = experiment_problem();
  const RdBasis basis = build_rd_basis(problem);

  auto rd_as_general = [&]() {
    GeneralEmProblem general;
    general.g_free = basis.g;
    Eigen::MatrixXd offset_t = basis.offset.transpose();
    general.offset = Eigen::Map<const Eigen::VectorXd>(offset_t.data(), offset_t.size());
    general.m_projection = [&](const Eigen::VectorXd& table) {
      Eigen::MatrixXd joint =
          Eigen::Map<const Eigen::MatrixXd>(table.data(), 3, 3).transpose();
      Eigen::MatrixXd projected = m_project_product(JointTable{joint}).values;
      Eigen::MatrixXd pt = projected.transpose();
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(pt.data(), pt.size()));
    };
    return general;
  };

  SUBCASE("family members have zero divergence") {
    Eigen::VectorXd p2(2);
    p2 << 0.5, 0.5;
    Eigen::MatrixXd r(2, 2);
    r << 0, 1, 1, 0;
    const RdProblem hamming = make_rd_problem(make_distribution(p2), r, 0.5);
    const RdBasis hb = build_rd_basis(hamming);
    GeneralEmProblem general;
    general.g_free = hb.g;
    Eigen::MatrixXd offset_t = hb.offset.transpose();
    general.offset = Eigen::Map<const Eigen::VectorXd>(offset_t.data(), offset_t.size());
    general.m_projection = [](const Eigen::VectorXd& table) {
      Eigen::MatrixXd joint =
          Eigen::Map<const Eigen::MatrixXd>(table.data(), 2, 2).transpose();
      Eigen::MatrixXd projected = m_project_product(JointTable{joint}).values;
      Eigen::MatrixXd pt = projected.transpose();
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(pt.data(), pt.size()));
    };
    const Eigen::VectorXd eta =
        eta_of_w(hamming, hb, Eigen::MatrixXd::Constant(2, 2, 0.5));
    CHECK(std::abs(em_objective_general(general, 1e-4, eta)) < 1e-12);
  }
  SUBCASE("specializes to rd_objective on interior points") {
    const GeneralEmProblem general = rd_as_general();
    const Eigen::VectorXd eta = eta_of_w(problem, basis, experiment_w_star());
    CHECK(std::abs(em_objective_general(general, 1e-4, eta) -
                   rd_objective(problem, basis, 1e-4, eta)) < 1e-10);
  }
  SUBCASE("clipped entries match a hand evaluation") {
    GeneralEmProblem tiny;
    tiny.g_free = Eigen::MatrixXd::Zero(1, 2);
    tiny.g_free << 1.0, -1.0;
    tiny.offset = Eigen::VectorXd::Constant(2, 0.5);
    tiny.m_projection = [](const Eigen::VectorXd&) {
      return Eigen::VectorXd::Constant(2, 0.5).eval();
    };
    const double eps = 1e-3;
    Eigen::VectorXd eta(1);
    eta << 0.6;  // table (1.1, -0.1): second entry clips
    const double expected = 1.1 * (std::log(1.1) - std::log(0.5)) +
                            (-0.1) * (std::log(eps) - std::log(0.5));
    CHECK(em_objective_general(tiny, eps, eta) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}
