#include "splitlab/ode.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <thread>

using namespace splitlab;
using namespace splitlab::testing;

TEST_CASE("eval_total_rhs sums the process tendencies") {
  SUBCASE("constant plus linear") {
    ProblemSpec p({constant_process("A", 2.0), linear_process("B", -1.0)}, scalar(1.0));
    CHECK(eval_total_rhs(p, scalar(1.0))[0] == 1.0);
  }
  SUBCASE("linear pair") {
    CHECK(eval_total_rhs(linear_pair(-1.0, -2.0), scalar(1.0))[0] == -3.0);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(eval_total_rhs(linear_pair(), Vector::Zero(2)), std::invalid_argument);
  }
}

TEST_CASE("ProblemSpec rejects malformed problems") {
  CHECK_THROWS_AS(ProblemSpec({linear_process("A", 1.0)}, scalar(1.0)), std::invalid_argument);
  CHECK_THROWS_AS(ProblemSpec({linear_process("A", 1.0), linear_process("A", 2.0)}, scalar(1.0)),
                  std::invalid_argument);
  ProcessModel wrong{"W", [](const Vector&) { return Vector::Zero(3); }, {}};
  CHECK_THROWS_AS(ProblemSpec({linear_process("A", 1.0), wrong}, scalar(1.0)),
                  std::invalid_argument);
}

TEST_CASE("reference_solve matches closed forms") {
  const Tolerances tol{};

  SUBCASE("exponential decay") {
    ProblemSpec p({linear_process("A", -0.25), linear_process("B", -0.75)}, scalar(1.0));
    const auto r = reference_solve(p, scalar(1.0), 1.0, tol);
    CHECK(r.q_end[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
    CHECK(std::abs(r.q_end[0] - 0.36787944117144233) < 1e-10);
    CHECK(r.stats.steps > 0);
  }

  SUBCASE("zero horizon is the identity") {
    const auto r = reference_solve(linear_pair(), scalar(0.7), 0.0, tol);
    CHECK(r.q_end[0] == 0.7);
    for (const auto& integral : r.process_integrals) CHECK(integral[0] == 0.0);
  }

  SUBCASE("process integrals split linearly") {
    const double alpha = -1.0, beta = -2.0;
    const auto r = reference_solve(linear_pair(alpha, beta), scalar(1.0), 0.03, tol);
    const double q_end = std::exp(-0.09);
    CHECK(std::abs(r.q_end[0] - q_end) < 1e-13);
    const double change = q_end - 1.0;
    CHECK(std::abs(r.process_integrals[0][0] - alpha / (alpha + beta) * change) < 1e-14);
    CHECK(std::abs(r.process_integrals[1][0] - beta / (alpha + beta) * change) < 1e-14);
  }
}

TEST_CASE("quadrature identity holds for every reference solve") {
  std::mt19937_64 rng(20261018);
  const Tolerances tol{};
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 3;
    const ProblemSpec p = random_vector_problem(rng, dim, 2 + trial % 2, trial % 2 == 1);
    const auto r = reference_solve(p, p.initial_condition(), 0.3, tol);
    Vector sum = Vector::Zero(dim);
    for (const auto& integral : r.process_integrals) sum += integral;
    const double gap = (r.q_end - p.initial_condition() - sum).lpNorm<Eigen::Infinity>();
    CHECK(gap <= 10.0 * tol.abs * dim);
  }
}

TEST_CASE("halving the relative tolerance never increases error on linear problems") {
  // Step-size selection jitters, so an increase is allowed up to the newly
  // requested accuracy.
  for (double rate : {-0.5, -1.0, -3.0, 0.7}) {
    ProblemSpec p({linear_process("A", rate / 2), linear_process("B", rate / 2)}, scalar(1.0));
    const double exact = std::exp(rate);
    double previous = INFINITY;
    for (double rel = 1e-4; rel >= 1e-11; rel /= 2) {
      const auto r = reference_solve(p, scalar(1.0), 1.0, Tolerances{rel, rel * 1e-2});
      const double err = std::abs(r.q_end[0] - exact);
      CHECK(err <= previous + 0.5 * rel * std::abs(exact));
      previous = err;
    }
  }
}

TEST_CASE("process_solve") {
  const Tolerances tol{};
  SUBCASE("linear decay") {
    const Vector out = process_solve(linear_process("B", -1.0), scalar(1.0), 0.01, tol);
    CHECK(std::abs(out[0] - std::exp(-0.01)) < 1e-13);
    CHECK(std::abs(out[0] - 0.99004983) < 1e-8);
  }
  SUBCASE("dt = 0 returns the input") {
    CHECK(process_solve(linear_process("B", -5.0), scalar(0.3), 0.0, tol)[0] == 0.3);
    CHECK(process_increment(linear_process("B", -5.0), scalar(0.3), 0.0, tol)[0] == 0.0);
  }
  SUBCASE("constant rate") {
    CHECK(std::abs(process_solve(constant_process("A", 2.0), scalar(1.0), 0.1, tol)[0] - 1.2) <
          1e-14);
  }
  SUBCASE("increment agrees with solve") {
    const auto proc = linear_process("B", -3.0);
    const Vector in = scalar(0.8);
    const Vector inc = process_increment(proc, in, 0.2, tol);
    CHECK(std::abs(inc[0] - (process_solve(proc, in, 0.2, tol)[0] - in[0])) < 1e-13);
  }
  SUBCASE("negative dt rejected") {
    CHECK_THROWS_AS(process_solve(linear_process("B", -1.0), scalar(1.0), -0.1, tol),
                    std::invalid_argument);
  }
}

TEST_CASE("single-process solve agrees with reference_solve") {
  // B = 0 makes the two-process problem a single-process one.
  ProblemSpec p({linear_process("A", -1.3), constant_process("B", 0.0)}, scalar(1.0));
  const Tolerances tol{};
  const auto ref = reference_solve(p, scalar(1.0), 0.4, tol);
  const Vector solo = process_solve(p.process(0), scalar(1.0), 0.4, tol);
  CHECK(std::abs(ref.q_end[0] - solo[0]) < 1e-12);
}

TEST_CASE("solver failure carries the last good time") {
  // q' = q^2 blows up at t = 1.
  ProcessModel blowup{"A", [](const Vector& q) -> Vector { return q.array().square().matrix(); }, {}};
  ProblemSpec p({blowup, constant_process("B", 0.0)}, scalar(1.0));
  try {
    (void)reference_solve(p, scalar(1.0), 2.0);
    FAIL("expected SolverFailure");
  } catch (const SolverFailure& e) {
    CHECK(e.last_good_time() > 0.9);
    CHECK(e.last_good_time() < 1.0);
  }
}

TEST_CASE("tolerance validation") {
  CHECK_THROWS_AS(reference_solve(linear_pair(), scalar(1.0), 1.0, Tolerances{1e-17, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(reference_solve(linear_pair(), scalar(1.0), -1.0), std::invalid_argument);
}

TEST_CASE("finite-difference Jacobian agrees with analytic Jacobians") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const ProblemSpec p = random_vector_problem(rng, 3, 2, true);
    for (const auto& proc : p.processes()) {
      const Matrix analytic = proc.jacobian_at(p.initial_condition());
      const Matrix fd = finite_difference_jacobian(proc.rhs, p.initial_condition());
      CHECK((analytic - fd).norm() <= 1e-6 * std::max(1.0, analytic.norm()));
    }
  }
}

TEST_CASE("concurrent solves are deterministic") {
  const ProblemSpec p = linear_pair(-0.3, 1.1, 0.5);
  Vector results[4];
  std::vector<std::thread> threads;
  for (auto& r : results) {
    threads.emplace_back([&r, &p] { r = reference_solve(p, p.initial_condition(), 2.0).q_end; });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r[0] == results[0][0]);
}
