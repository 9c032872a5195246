#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kernelstream/confidence.hpp"
#include "kernelstream/kernel.hpp"
#include "kernelstream/regression.hpp"
#include "kernelstream/rng.hpp"
#include "kernelstream/variance.hpp"

namespace kernelstream {

/// Discrete-arm environment. Rewards are truth(arm) + N(0, sigma^2) noise,
/// fully determined by rng_seed.
struct BanditEnvironment {
    std::vector<double> arms;
    RkhsFunction truth;
    double noise_sigma = 0.1;
    std::uint64_t rng_seed = 0;
};

/// count points linearly discretizing [0, 1], endpoints included.
std::vector<double> linear_arm_grid(std::size_t count);

enum class Policy {
    Ucb,    // index maximization with the empirical-Bernstein radius
    Ts,     // joint Gaussian posterior sampling with inflation v_t = B/sigma_plus
    TsWang, // TS at lambda = sigma^2 inflated with the baseline ell bound
};

enum class RegMode {
    Oracle,   // lambda = sigma^2/C^2 fixed, true sigma known
    Fixed,    // lambda = sigma_plus^2/C^2 fixed, gamma anchored at lambda
    Adaptive, // lambda_t from the streaming noise bracket
};

struct AgentConfig {
    Policy policy = Policy::Ucb;
    RegMode reg_mode = RegMode::Oracle;
    ConfidenceParams params{0.1, 5.0};  // delta is the TOTAL budget; split per policy
    double sigma_plus_prior = 1.0;
    double sigma_minus_prior = 0.01;
    std::size_t horizon = 1000;
    bool ts_uninflated = false;  // v_t = 1 variant, no guarantee attached

    /// delta used inside the confidence radius: total/4 for UCB, total/12 for
    /// TS, total for the Wang-inflated TS baseline.
    double delta_inside() const;
    /// delta' driving the noise-bracket updates in adaptive mode: total/4.
    double delta_bracket() const { return params.delta / 4.0; }
};

struct StepRecord {
    std::size_t t = 0;  // 1-based step index
    std::size_t arm_index = 0;
    double reward = 0.0;
    double instantaneous_regret = 0.0;
    double cumulative_regret = 0.0;
    double lambda_t = 0.0;       // regularization used for this selection
    double sigma_plus_t = 0.0;   // bracket upper bound available at selection
    double sigma_minus_t = 0.0;
    double beta_t = 0.0;         // radius (UCB) or B feeding v_t (TS)
    double gamma_t = 0.0;        // information gain anchoring beta_t
    double prior_variance_ratio = 0.0;  // k_{lambda_t,t-1}(x_t,x_t) / lambda_t
};

struct RegretTrace {
    std::vector<StepRecord> steps;
    std::size_t best_arm_index = 0;
    double best_arm_value = 0.0;
};

/// Sum of instantaneous regrets; equals the last cumulative entry.
double cumulative_regret(const RegretTrace& trace);

/// argmax over arms of mean + sqrt(k_{lambda,t}(x,x)/lambda) * beta, ties to
/// the lowest index.
std::size_t ucb_select(const PosteriorState& state, std::span<const double> arms, double beta);

/// One joint draw from N(mean, v_t^2 (sigma_plus^2/lambda) K_post(arms)) via
/// Cholesky with jitter escalation; returns the argmax index, ties lowest.
std::size_t ts_select(const PosteriorState& state, std::span<const double> arms, double v_t,
                      double sigma_plus, Rng& rng);

/// Run one bandit episode. Deterministic given env.rng_seed: each step draws
/// the TS sample first (arms.size() normals, TS policies only) and then one
/// reward-noise normal.
RegretTrace run_bandit(const BanditEnvironment& env, const AgentConfig& config);

struct TheoreticalRegretCurves {
    std::vector<double> ucb;  // closed-form high-probability bound, per t
    std::vector<double> ts;
};

/// Closed-form regret bounds for overlay plots. gamma_at_lambda_star[t] and
/// gamma_at_lambda_minus[t] hold gamma_t(sigma^2/C^2) and gamma_t(sigma_-^2/C^2)
/// for t = 0..T.
TheoreticalRegretCurves theoretical_regret_curves(double sigma, double sigma_plus,
                                                  double sigma_minus, double norm_bound_c,
                                                  double delta,
                                                  std::span<const double> gamma_at_lambda_star,
                                                  std::span<const double> gamma_at_lambda_minus,
                                                  double max_gap, std::size_t n_arms);

struct InfoGainBudgetAudit {
    double lhs = 0.0;  // sum of prior predictive variances sigma^2 k/lambda
    double rhs = 0.0;  // (2 C^2 / ln(1 + C^2/sigma^2)) gamma_T(sigma^2/C^2)
    bool lambda_precondition_held = false;  // every lambda_t >= sigma^2/C^2
    bool holds = false;
};

/// Deterministic budget inequality on a completed trace; the inequality is
/// asserted only when the lambda precondition held throughout.
InfoGainBudgetAudit infogain_budget_check(const RegretTrace& trace, const BanditEnvironment& env,
                                          const ConfidenceParams& params);

}  // namespace kernelstream
