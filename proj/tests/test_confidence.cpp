#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kernelstream/bandits.hpp"
#include "kernelstream/confidence.hpp"
#include "kernelstream/rng.hpp"
#include "test_util.hpp"

using namespace kernelstream;
using ks_test::random_log;

namespace {
const KernelSpec kRbf = gaussian_rbf(0.3);

long double beta_fixed_ref(long double norm, long double sigma, long double lambda,
                           long double gamma, long double delta) {
    return std::sqrt(lambda) * norm + sigma * std::sqrt(2.0L * std::log(1.0L / delta) + 2.0L * gamma);
}
}  // namespace

TEST_CASE("beta_fixed spot value at the experiment defaults") {
    // lambda_star = sigma^2/C^2 = 0.0004 with C = 5, sigma = 0.1
    CHECK(beta_fixed(5.0, 0.1, 0.0004, 0.0, 0.1) ==
          doctest::Approx(0.314597).epsilon(1e-5));
    CHECK(std::abs(beta_fixed(5.0, 0.1, 0.0004, 0.0, 0.1) - 0.3145966026) < 1e-9);
}

TEST_CASE("beta_fixed: gamma equal to ln(1/delta) doubles the radicand") {
    const double delta = 0.07;
    const double base = beta_fixed(0.0, 1.0, 1.0, 0.0, delta);
    const double doubled = beta_fixed(0.0, 1.0, 1.0, std::log(1.0 / delta), delta);
    CHECK(doubled == doctest::Approx(std::sqrt(2.0) * base).epsilon(1e-12));
}

TEST_CASE("beta_fixed random inputs against a long-double re-evaluation") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double norm = 10.0 * rng.uniform();
        const double sigma = 2.0 * rng.uniform() + 1e-3;
        const double lambda = rng.uniform() + 1e-4;
        const double gamma = 50.0 * rng.uniform();
        const double delta = 0.9 * rng.uniform() + 0.05;
        const double got = beta_fixed(norm, sigma, lambda, gamma, delta);
        const double want = static_cast<double>(beta_fixed_ref(norm, sigma, lambda, gamma, delta));
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("beta_tuned reduces to beta_fixed and is monotone in lambda_next") {
    CHECK(beta_tuned(5.0, 0.1, 0.04, 3.0, 0.1) ==
          beta_fixed(5.0, 0.1, 0.04, 3.0, 0.1));
    double prev = 0.0;
    for (const double lambda : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        const double b = beta_tuned(5.0, 0.1, lambda, 3.0, 0.1);
        CHECK(b >= prev);
        prev = b;
    }
}

TEST_CASE("beta_bernstein spot value and reduction") {
    const ConfidenceParams params{0.1, 5.0};
    // t = 0: sigma_plus = 1, lambda_0 = sigma_plus^2 / C^2 = 0.04, gamma = 0
    const double b = beta_bernstein(params, 1.0, 0.04, 0.0);
    CHECK(b == doctest::Approx(3.145966).epsilon(1e-6));
    // definitional reduction: beta_fixed with sigma replaced by sigma_plus
    CHECK(b == beta_fixed(5.0, 1.0, 0.04, 0.0, 0.1));
}

TEST_CASE("beta_bernstein on a recorded trace against the formula oracle") {
    BanditEnvironment env{linear_arm_grid(20), default_test_function(), 0.1, 9001};
    AgentConfig agent;
    agent.policy = Policy::Ucb;
    agent.reg_mode = RegMode::Adaptive;
    agent.horizon = 60;
    const RegretTrace trace = run_bandit(env, agent);
    const ConfidenceParams radius{agent.delta_inside(), 5.0};
    for (const StepRecord& s : trace.steps) {
        const double want = static_cast<double>(
            std::sqrt(static_cast<long double>(s.lambda_t)) * 5.0L +
            static_cast<long double>(s.sigma_plus_t) *
                std::sqrt(2.0L * std::log(1.0L / static_cast<long double>(radius.delta)) +
                          2.0L * static_cast<long double>(s.gamma_t)));
        CHECK(s.beta_t == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("envelope: beta zero collapses to the mean") {
    const ObservationLog log = random_log(10, 17);
    const PosteriorState state = fit(kRbf, log, 0.04);
    const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    const Envelope env = envelope(state, 0.0, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double m = posterior_mean(state, grid[j]);
        CHECK(env.lower[j] == m);
        CHECK(env.upper[j] == m);
    }
    CHECK_THROWS_AS(envelope(state, -1.0, grid), std::invalid_argument);
}

TEST_CASE("envelope on the empty log has constant half-width beta/sqrt(lambda)") {
    const PosteriorState state = fit(kRbf, ObservationLog{}, 0.25);
    const std::vector<double> grid = {0.1, 0.6, 0.8};
    const Envelope env = envelope(state, 1.5, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        CHECK(env.upper[j] - env.lower[j] == doctest::Approx(2.0 * 1.5 / 0.5).epsilon(1e-12));
        CHECK(env.upper[j] == -env.lower[j]);
    }
}

TEST_CASE("envelope width identity: exactly 2 sqrt(k/lambda) beta") {
    const ObservationLog log = random_log(14, 19);
    const PosteriorState state = fit(kRbf, log, 0.01);
    const std::vector<double> grid = {0.05, 0.4, 0.66, 0.93};
    const double beta = 2.25;
    const Envelope env = envelope(state, beta, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double expected =
            2.0 * std::sqrt(posterior_variance_kernel(state, grid[j]) / 0.01) * beta;
        CHECK(std::abs((env.upper[j] - env.lower[j]) - expected) < 1e-10);
    }
}

TEST_CASE("envelope width at a revisited point shrinks as data accrues") {
    Rng rng(29);
    const double x0 = 0.62;
    PosteriorState state = fit(kRbf, ObservationLog{}, 0.04);
    const std::vector<double> grid = {x0};
    double prev = envelope(state, 1.0, grid).upper[0] - envelope(state, 1.0, grid).lower[0];
    for (int i = 0; i < 50; ++i) {
        const double x = (i % 2 == 0) ? x0 : rng.uniform();
        state = append_and_refit(state, x, rng.normal(), 0.04);
        const Envelope env = envelope(state, 1.0, grid);
        const double width = env.upper[0] - env.lower[0];
        CHECK(width <= prev + 1e-10);
        prev = width;
    }
}

TEST_CASE("wang bound: gamma-free closed form and spot value") {
    const double norm = 2.06, sigma = 0.1, dp = 0.1;
    const double ell = wang_bound(norm, sigma, 0.0, dp);
    const double ell2 = norm * norm + std::sqrt(2.0 * std::log(4.0 / dp)) * norm +
                        2.0 * sigma * std::log(2.0 / dp);
    CHECK(ell * ell == doctest::Approx(ell2).epsilon(1e-12));
    CHECK(ell2 == doctest::Approx(10.438).epsilon(1e-4));
    CHECK(ell == doctest::Approx(3.2308).epsilon(1e-4));
}

TEST_CASE("wang bound is nondecreasing in gamma") {
    double prev = 0.0;
    for (const double gamma : {0.0, 0.5, 1.0, 5.0, 20.0, 100.0}) {
        const double ell = wang_bound(2.06, 0.1, gamma, 0.1);
        CHECK(ell >= prev);
        prev = ell;
    }
}

TEST_CASE("deterministic cap: spot value, homogeneity, trace domination") {
    CHECK(beta_deterministic_cap(1.0, 0.0, 0.1) == doctest::Approx(3.145966).epsilon(1e-6));
    CHECK(beta_deterministic_cap(2.5, 4.0, 0.1) ==
          doctest::Approx(2.5 * beta_deterministic_cap(1.0, 4.0, 0.1)).epsilon(1e-12));

    // every runtime radius should stay below the deterministic horizon cap computed at
    // the horizon with gamma anchored at the running sigma_minus
    BanditEnvironment env{linear_arm_grid(30), default_test_function(), 0.1, 31337};
    AgentConfig agent;
    agent.policy = Policy::Ucb;
    agent.reg_mode = RegMode::Adaptive;
    agent.horizon = 80;
    const RegretTrace trace = run_bandit(env, agent);

    // gamma_T at sigma_minus_prior^2 / C^2 over the visited arms
    ObservationLog visited;
    for (const StepRecord& s : trace.steps) {
        visited.append(env.arms[s.arm_index], s.reward);
    }
    const double gamma_T =
        information_gain(env.truth.kernel(), visited, 0.01 * 0.01 / 25.0).gamma;
    const double cap = beta_deterministic_cap(1.0, gamma_T, agent.delta_inside());
    for (const StepRecord& s : trace.steps) {
        CHECK(s.beta_t <= cap * (1.0 + 1e-12));
    }
}

TEST_CASE("beta_bernstein is nonincreasing along monotone synthetic inputs") {
    const ConfidenceParams params{0.1, 5.0};
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20; ++i) {
        const double sigma_plus = 1.0 - 0.04 * i;
        const double lambda = sigma_plus * sigma_plus / 25.0;
        const double b = beta_bernstein(params, sigma_plus, lambda, 7.0);
        CHECK(b <= prev);
        prev = b;
    }
}

TEST_CASE("fixed-form and baseline envelopes share the k^(1/2) shape at lambda=sigma^2") {
    Rng rng(41);
    ObservationLog log;
    const double sigma = 0.1;
    for (int i = 0; i < 25; ++i) {
        log.append(rng.uniform(), rng.normal());
    }
    const double lambda = sigma * sigma;
    const PosteriorState state = fit(kRbf, log, lambda);
    const double gamma = information_gain(kRbf, log, lambda).gamma;
    const double beta = beta_fixed(5.0, sigma, lambda, gamma, 0.1);
    const double ell = wang_bound(5.0, sigma, gamma, 0.1);
    CHECK(std::isfinite(beta));
    CHECK(std::isfinite(ell));
    double ratio0 = 0.0;
    for (const double x : {0.12, 0.35, 0.58, 0.81}) {
        const double k = posterior_variance_kernel(state, x);
        const double w_fixed = std::sqrt(k / lambda) * beta;
        const double w_wang = ell * std::sqrt(k);
        const double ratio = w_fixed / w_wang;
        if (ratio0 == 0.0) {
            ratio0 = ratio;
        }
        CHECK(ratio == doctest::Approx(ratio0).epsilon(1e-10));  // constant shape factor
    }
}
