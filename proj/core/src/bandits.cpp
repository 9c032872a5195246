#include "kernelstream/bandits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace kernelstream {

namespace {

constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-8, 1e-6};

Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& m, const char* what) {
    for (const double jitter : kJitterLadder) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) {
            return llt.matrixL();
        }
    }
    std::ostringstream msg;
    msg << what << ": covariance Cholesky failed after jitter escalation (dim " << m.rows()
        << ")";
    throw NumericError(msg.str());
}

std::size_t argmax_lowest_index(const Eigen::VectorXd& v) {
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(static_cast<Eigen::Index>(best))) {
            best = static_cast<std::size_t>(i);
        }
    }
    return best;
}

// Posterior over a fixed arm grid exploiting repeated pulls: the t x t system
// collapses onto the pulled arms P via (K_PP + lambda N^-1) alpha = ybar. All
// factorizations use the count-scaled form G = D K_PP D + lambda I with
// D = diag(sqrt(n_a)), whose eigenvalues are bounded below by lambda.
class ArmPosterior {
public:
    ArmPosterior(std::span<const double> arms, const KernelSpec& kernel)
        : arms_(arms.begin(), arms.end()), karms_(kernel_matrix(kernel, arms)) {
        counts_.assign(arms_.size(), 0);
        ysum_.assign(arms_.size(), 0.0);
        y2sum_.assign(arms_.size(), 0.0);
    }

    std::size_t t() const { return t_; }
    const std::vector<int>& counts() const { return counts_; }

    void add(std::size_t arm, double y) {
        if (counts_[arm] == 0) {
            pulled_.push_back(arm);
        }
        ++counts_[arm];
        ysum_[arm] += y;
        y2sum_[arm] += y * y;
        ++t_;
        ++version_;
    }

    void refresh(double lambda) {
        if (factored_version_ == version_ && factored_lambda_ == lambda) {
            return;
        }
        const Eigen::Index p = static_cast<Eigen::Index>(pulled_.size());
        const Eigen::Index a = static_cast<Eigen::Index>(arms_.size());
        if (p == 0) {
            mean_ = Eigen::VectorXd::Zero(a);
            var_ = karms_.diagonal();
            z_.resize(0, a);
            factored_version_ = version_;
            factored_lambda_ = lambda;
            return;
        }
        Eigen::VectorXd sqrtn(p), ybar(p);
        Eigen::MatrixXd kpa(p, a);
        for (Eigen::Index i = 0; i < p; ++i) {
            const std::size_t arm = pulled_[static_cast<std::size_t>(i)];
            sqrtn(i) = std::sqrt(static_cast<double>(counts_[arm]));
            ybar(i) = ysum_[arm] / counts_[arm];
            kpa.row(i) = karms_.row(static_cast<Eigen::Index>(arm));
        }
        Eigen::MatrixXd g = sqrtn.asDiagonal() * kpa(Eigen::all, pulled_idx()) *
                            sqrtn.asDiagonal();
        g.diagonal().array() += lambda;
        chol_ = cholesky_or_throw(g, "ArmPosterior::refresh");

        // alpha = D G^-1 D ybar; mean over all arms = K_{A,P} alpha.
        Eigen::VectorXd rhs = sqrtn.cwiseProduct(ybar);
        Eigen::VectorXd tmp = chol_.triangularView<Eigen::Lower>().solve(rhs);
        tmp = chol_.transpose().triangularView<Eigen::Upper>().solve(tmp);
        alpha_ = sqrtn.cwiseProduct(tmp);
        mean_ = kpa.transpose() * alpha_;
        // variance: k(x,x) - |L^-1 D k_P(x)|^2.
        z_ = chol_.triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd(sqrtn.asDiagonal() * kpa));
        var_ = (karms_.diagonal() - z_.colwise().squaredNorm().transpose()).cwiseMax(0.0);
        factored_version_ = version_;
        factored_lambda_ = lambda;
    }

    const Eigen::VectorXd& means() const { return mean_; }
    const Eigen::VectorXd& variances() const { return var_; }

    /// Information gain at the currently factored lambda, from the factor of
    /// G = D K D + lambda I: (1/2) logdet(I + DKD/lambda) = sum ln diag(L) - (p/2) ln lambda.
    double gamma_current() const {
        const Eigen::Index p = chol_.rows();
        if (p == 0 || pulled_.empty()) {
            return 0.0;
        }
        double acc = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            acc += std::log(chol_(i, i));
        }
        return acc - 0.5 * static_cast<double>(p) * std::log(factored_lambda_);
    }

    /// gamma_t(lambda) = (1/2) logdet(I + K_t/lambda) over the pulled system.
    double gamma(double lambda) const {
        const Eigen::Index p = static_cast<Eigen::Index>(pulled_.size());
        if (p == 0) {
            return 0.0;
        }
        Eigen::VectorXd sqrtn(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            sqrtn(i) = std::sqrt(static_cast<double>(counts_[pulled_[static_cast<std::size_t>(i)]]));
        }
        Eigen::MatrixXd b = sqrtn.asDiagonal() *
                            karms_(pulled_idx(), pulled_idx()) * sqrtn.asDiagonal() / lambda;
        b.diagonal().array() += 1.0;
        const Eigen::MatrixXd lower = cholesky_or_throw(b, "ArmPosterior::gamma");
        double acc = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            acc += std::log(lower(i, i));
        }
        return acc;
    }

    /// RMS residual over all observations at the currently factored lambda.
    double sigma_hat() const {
        if (t_ == 0) {
            return 0.0;
        }
        double ss = 0.0;
        for (const std::size_t arm : pulled_) {
            const double n = counts_[arm];
            const double yb = ysum_[arm] / n;
            const double fa = mean_(static_cast<Eigen::Index>(arm));
            const double within = std::max(0.0, y2sum_[arm] - n * yb * yb);
            ss += n * (fa - yb) * (fa - yb) + within;
        }
        return std::sqrt(ss / static_cast<double>(t_));
    }

    /// Posterior covariance kernel over the whole grid at the factored lambda.
    Eigen::MatrixXd posterior_cov() const {
        if (z_.rows() == 0) {
            return karms_;
        }
        return karms_ - z_.transpose() * z_;
    }

private:
    std::vector<Eigen::Index> pulled_idx() const {
        return {pulled_.begin(), pulled_.end()};
    }

    std::vector<double> arms_;
    Eigen::MatrixXd karms_;
    std::vector<int> counts_;
    std::vector<double> ysum_, y2sum_;
    std::vector<Eigen::Index> pulled_;
    std::size_t t_ = 0;
    std::uint64_t version_ = 0;
    std::uint64_t factored_version_ = ~0ull;
    double factored_lambda_ = -1.0;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd alpha_;
    Eigen::MatrixXd z_;  // L^-1 D K_{P,A}
    Eigen::VectorXd mean_, var_;
};

}  // namespace

std::vector<double> linear_arm_grid(std::size_t count) {
    if (count < 2) {
        throw std::invalid_argument("linear_arm_grid: need at least two arms");
    }
    std::vector<double> arms(count);
    for (std::size_t i = 0; i < count; ++i) {
        arms[i] = static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return arms;
}

double AgentConfig::delta_inside() const {
    switch (policy) {
        case Policy::Ucb:
            return params.delta / 4.0;
        case Policy::Ts:
            return params.delta / 12.0;
        case Policy::TsWang:
            return params.delta;
    }
    return params.delta;
}

double cumulative_regret(const RegretTrace& trace) {
    double acc = 0.0;
    for (const StepRecord& s : trace.steps) {
        acc += s.instantaneous_regret;
    }
    return acc;
}

std::size_t ucb_select(const PosteriorState& state, std::span<const double> arms, double beta) {
    Eigen::VectorXd index(static_cast<Eigen::Index>(arms.size()));
    for (std::size_t j = 0; j < arms.size(); ++j) {
        const double m = posterior_mean(state, arms[j]);
        const double k = posterior_variance_kernel(state, arms[j]);
        index(static_cast<Eigen::Index>(j)) = m + std::sqrt(k / state.lambda()) * beta;
    }
    return argmax_lowest_index(index);
}

std::size_t ts_select(const PosteriorState& state, std::span<const double> arms, double v_t,
                      double sigma_plus, Rng& rng) {
    const Eigen::Index a = static_cast<Eigen::Index>(arms.size());
    Eigen::VectorXd mean(a);
    Eigen::MatrixXd cov(a, a);
    for (Eigen::Index i = 0; i < a; ++i) {
        mean(i) = posterior_mean(state, arms[static_cast<std::size_t>(i)]);
    }
    if (state.size() == 0) {
        cov = kernel_matrix(state.kernel(), arms);
    } else {
        const Eigen::MatrixXd kxa = [&] {
            Eigen::MatrixXd m(static_cast<Eigen::Index>(state.size()), a);
            for (Eigen::Index j = 0; j < a; ++j) {
                m.col(j) = kernel_vector(state.kernel(), arms[static_cast<std::size_t>(j)],
                                         state.xs());
            }
            return m;
        }();
        const Eigen::MatrixXd u = state.chol_factor().triangularView<Eigen::Lower>().solve(kxa);
        cov = kernel_matrix(state.kernel(), arms) - u.transpose() * u;
    }
    const double scale = sigma_plus * sigma_plus / state.lambda();
    const Eigen::MatrixXd lower = cholesky_or_throw(scale * cov, "ts_select");
    Eigen::VectorXd z(a);
    for (Eigen::Index i = 0; i < a; ++i) {
        z(i) = rng.normal();
    }
    const Eigen::VectorXd sample = mean + v_t * (lower * z);
    return argmax_lowest_index(sample);
}

RegretTrace run_bandit(const BanditEnvironment& env, const AgentConfig& config) {
    config.params.validate();
    if (env.arms.empty()) {
        throw std::invalid_argument("run_bandit: environment needs arms");
    }
    if (config.policy == Policy::TsWang && config.reg_mode != RegMode::Oracle) {
        throw std::invalid_argument("run_bandit: the Wang-inflated TS baseline runs in oracle mode");
    }
    if (!(env.noise_sigma > 0.0) && config.reg_mode == RegMode::Oracle) {
        throw std::invalid_argument("run_bandit: oracle mode needs a positive true sigma");
    }

    const double c_bound = config.params.norm_bound_c;
    const double c2 = c_bound * c_bound;
    const double delta_in = config.delta_inside();
    const ConfidenceParams radius_params{delta_in, c_bound};

    Rng rng(env.rng_seed);
    ArmPosterior post(env.arms, env.truth.kernel());

    Eigen::VectorXd truth(static_cast<Eigen::Index>(env.arms.size()));
    for (std::size_t j = 0; j < env.arms.size(); ++j) {
        truth(static_cast<Eigen::Index>(j)) = env.truth(env.arms[j]);
    }
    RegretTrace trace;
    trace.best_arm_index = argmax_lowest_index(truth);
    trace.best_arm_value = truth(static_cast<Eigen::Index>(trace.best_arm_index));
    trace.steps.reserve(config.horizon);

    NoiseBracket bracket = NoiseBracket::initial(config.sigma_minus_prior,
                                                 config.sigma_plus_prior, c_bound);
    double lambda = 0.0;
    double sigma_plus_now = 0.0;
    switch (config.reg_mode) {
        case RegMode::Oracle:
            sigma_plus_now = env.noise_sigma;
            lambda = env.noise_sigma * env.noise_sigma / c2;
            break;
        case RegMode::Fixed:
        case RegMode::Adaptive:
            sigma_plus_now = config.sigma_plus_prior;
            lambda = bracket.lambda_t;
            break;
    }
    if (config.policy == Policy::TsWang) {
        lambda = env.noise_sigma * env.noise_sigma;
        sigma_plus_now = env.noise_sigma;
    }

    double max_ratio = 1.0;
    double cumulative = 0.0;
    for (std::size_t t = 1; t <= config.horizon; ++t) {
        post.refresh(lambda);
        const Eigen::VectorXd& mean = post.means();
        const Eigen::VectorXd& var = post.variances();

        double gamma_anchor = 0.0;
        double beta = 0.0;
        if (config.policy == Policy::TsWang) {
            gamma_anchor = post.gamma_current();
            beta = wang_bound(c_bound, env.noise_sigma, gamma_anchor, delta_in);
        } else {
            switch (config.reg_mode) {
                case RegMode::Oracle:
                case RegMode::Fixed:
                    gamma_anchor = post.gamma_current();
                    break;
                case RegMode::Adaptive: {
                    const double anchor =
                        bracket.lambda_minus > 0.0 ? bracket.lambda_minus : 1e-8 / c2;
                    gamma_anchor = post.gamma(anchor);
                    break;
                }
            }
            beta = beta_bernstein(radius_params, sigma_plus_now, lambda, gamma_anchor);
        }

        std::size_t arm = 0;
        if (config.policy == Policy::Ucb) {
            const Eigen::VectorXd index =
                mean + (var / lambda).cwiseSqrt() * beta;
            arm = argmax_lowest_index(index);
        } else {
            double v_t = 0.0;
            if (config.policy == Policy::TsWang) {
                v_t = beta;  // ell multiplies k^{1/2} directly; scale below is 1
            } else {
                v_t = config.ts_uninflated ? 1.0 : beta / sigma_plus_now;
            }
            const double scale = sigma_plus_now * sigma_plus_now / lambda;
            const Eigen::MatrixXd lower =
                cholesky_or_throw(scale * post.posterior_cov(), "run_bandit/ts");
            Eigen::VectorXd z(static_cast<Eigen::Index>(env.arms.size()));
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                z(i) = rng.normal();
            }
            const Eigen::VectorXd sample = mean + v_t * (lower * z);
            arm = argmax_lowest_index(sample);
        }

        const Eigen::Index ai = static_cast<Eigen::Index>(arm);
        const double ratio = var(ai) / lambda;
        max_ratio = std::max(max_ratio, 1.0 + ratio);

        const double reward = truth(ai) + env.noise_sigma * rng.normal();
        const double inst = trace.best_arm_value - truth(ai);
        cumulative += inst;

        StepRecord rec;
        rec.t = t;
        rec.arm_index = arm;
        rec.reward = reward;
        rec.instantaneous_regret = inst;
        rec.cumulative_regret = cumulative;
        rec.lambda_t = lambda;
        rec.sigma_plus_t = sigma_plus_now;
        rec.sigma_minus_t = bracket.sigma_minus;
        rec.beta_t = beta;
        rec.gamma_t = gamma_anchor;
        rec.prior_variance_ratio = ratio;
        trace.steps.push_back(rec);

        post.add(arm, reward);

        if (config.reg_mode == RegMode::Adaptive && config.policy != Policy::TsWang) {
            const double lambda_prev = bracket.lambda_t;
            post.refresh(lambda_prev);
            try {
                bracket = update_bracket_with_stats(
                    bracket, config.params, config.delta_bracket(), t, post.sigma_hat(),
                    max_ratio, [&](double l) { return post.gamma(l); });
            } catch (const NumericError& e) {
                std::ostringstream msg;
                msg << "run_bandit: step " << t << ": " << e.what();
                throw NumericError(msg.str());
            }
            lambda = bracket.lambda_t;
            sigma_plus_now = bracket.sigma_plus;
        }
    }
    return trace;
}

TheoreticalRegretCurves theoretical_regret_curves(double sigma, double sigma_plus,
                                                  double sigma_minus, double norm_bound_c,
                                                  double delta,
                                                  std::span<const double> gamma_at_lambda_star,
                                                  std::span<const double> gamma_at_lambda_minus,
                                                  double max_gap, std::size_t n_arms) {
    (void)sigma_minus;  // enters through gamma_at_lambda_minus
    if (gamma_at_lambda_star.size() != gamma_at_lambda_minus.size() ||
        gamma_at_lambda_star.empty()) {
        throw std::invalid_argument("theoretical_regret_curves: gamma arrays must align");
    }
    const double snr = norm_bound_c * norm_bound_c / (sigma * sigma);
    const double pe = std::numbers::pi * std::numbers::e;
    const double c2 = std::sqrt(8.0 * pe * (1.0 + delta * std::sqrt(4.0 * pe)) *
                                (1.0 + delta * std::sqrt(4.0 * pe)));
    TheoreticalRegretCurves curves;
    curves.ucb.resize(gamma_at_lambda_star.size());
    curves.ts.resize(gamma_at_lambda_star.size());
    for (std::size_t t = 0; t < gamma_at_lambda_star.size(); ++t) {
        const double td = static_cast<double>(t);
        const double explore =
            (1.0 + std::sqrt(2.0 * std::log(4.0 / delta) + 2.0 * gamma_at_lambda_minus[t])) *
            norm_bound_c *
            std::sqrt(td * 2.0 * gamma_at_lambda_star[t] / std::log1p(snr));
        curves.ucb[t] = 2.0 * (sigma_plus / sigma) * explore;
        double c1t = 0.0;
        if (t >= 1) {
            c1t = (4.0 * std::sqrt(pe) + 1.0) *
                  (1.0 + std::sqrt(2.0 * std::log(td * (td + 1.0) *
                                                  static_cast<double>(n_arms) /
                                                  (std::sqrt(std::numbers::pi) * delta))));
        }
        curves.ts[t] = c1t * (sigma_plus / sigma) * explore +
                       c2 * max_gap * std::sqrt(td * std::log(1.0 / delta)) +
                       4.0 * pe * max_gap * delta;
    }
    return curves;
}

InfoGainBudgetAudit infogain_budget_check(const RegretTrace& trace, const BanditEnvironment& env,
                                          const ConfidenceParams& params) {
    InfoGainBudgetAudit audit;
    const double sigma = env.noise_sigma;
    const double lambda_star = sigma * sigma / (params.norm_bound_c * params.norm_bound_c);

    audit.lambda_precondition_held = true;
    ObservationLog visited;
    for (const StepRecord& s : trace.steps) {
        audit.lhs += sigma * sigma * s.prior_variance_ratio;
        if (s.lambda_t < lambda_star * (1.0 - 1e-12)) {
            audit.lambda_precondition_held = false;
        }
        visited.append(env.arms.at(s.arm_index), s.reward);
    }
    const double gamma_star = information_gain(env.truth.kernel(), visited, lambda_star).gamma;
    const double snr = params.norm_bound_c * params.norm_bound_c / (sigma * sigma);
    audit.rhs = 2.0 * params.norm_bound_c * params.norm_bound_c / std::log1p(snr) * gamma_star;
    audit.holds = !audit.lambda_precondition_held || audit.lhs <= audit.rhs * (1.0 + 1e-9);
    return audit;
}

}  // namespace kernelstream
