#include "kernelstream/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kernelstream/bandits.hpp"
#include "kernelstream/confidence.hpp"
#include "kernelstream/regression.hpp"
#include "kernelstream/rng.hpp"
#include "kernelstream/variance.hpp"

namespace kernelstream {

namespace {

using nlohmann::json;

// ----------------------------------------------------------------------------
// formatting and small helpers

std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string u64(std::size_t v) { return std::to_string(v); }

const std::vector<std::size_t> kCheckpoints = {0, 10, 25, 50, 100, 250, 500};

std::vector<std::size_t> checkpoints_upto(std::size_t horizon) {
    std::vector<std::size_t> cps;
    for (const std::size_t c : kCheckpoints) {
        if (c <= horizon) {
            cps.push_back(c);
        }
    }
    if (cps.empty() || cps.back() != horizon) {
        cps.push_back(horizon);
    }
    return cps;
}

bool write_file(const std::string& path, const std::string& bytes, std::string& err) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        err = "cannot open output file " + path;
        return false;
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        err = "write failed for " + path;
        return false;
    }
    return true;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

// Run fn(rep) for rep in [0, n) on up to `workers` threads. Exceptions are
// rethrown on the caller thread; results must be written into preallocated
// per-rep slots so output order never depends on scheduling.
void parallel_reps(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) {
        th.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

// ----------------------------------------------------------------------------
// streaming regressor for the uniform-sampling experiments
//
// Keeps the ordered Cholesky factor of (K_t + lambda I) with rank-one row
// appends at constant lambda and a full refactorization when lambda changes.
// Optionally tracks a probe grid incrementally: per appended row the solve
// L u = k(X, probe) gains one entry per probe, so means and variances at the
// probes are O(P) reads per step.

class StreamingRegressor {
public:
    StreamingRegressor(const KernelSpec& kernel, double lambda, std::size_t capacity,
                       std::vector<double> probes)
        : kernel_(kernel), lambda_(lambda), probes_(std::move(probes)) {
        if (!(lambda > 0.0)) {
            throw std::invalid_argument("StreamingRegressor: lambda must be positive");
        }
        xs_.reserve(capacity);
        ys_.reserve(capacity);
        chol_.resize(static_cast<Eigen::Index>(capacity), static_cast<Eigen::Index>(capacity));
        v_.resize(static_cast<Eigen::Index>(capacity));
        const Eigen::Index p = static_cast<Eigen::Index>(probes_.size());
        u_.resize(static_cast<Eigen::Index>(capacity), p);
        probe_mean_ = Eigen::VectorXd::Zero(p);
        probe_sq_ = Eigen::VectorXd::Zero(p);
        probe_prior_.resize(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            probe_prior_(j) = eval_kernel(kernel_, probes_[static_cast<std::size_t>(j)],
                                          probes_[static_cast<std::size_t>(j)]);
        }
    }

    std::size_t size() const { return xs_.size(); }
    double lambda() const { return lambda_; }
    double gamma() const { return gamma_; }
    double max_ratio() const { return max_ratio_; }
    const std::vector<double>& probes() const { return probes_; }

    void set_lambda(double lambda) {
        if (!(lambda > 0.0)) {
            throw std::invalid_argument("StreamingRegressor: lambda must be positive");
        }
        if (lambda == lambda_) {
            return;
        }
        lambda_ = lambda;
        refit();
    }

    void append(double x, double y) {
        const Eigen::Index t = static_cast<Eigen::Index>(size());
        const double lam_eff = lambda_ + jitter_;
        Eigen::VectorXd w(t);
        if (t > 0) {
            const Eigen::VectorXd kx = kernel_vector(kernel_, x, xs_);
            w = chol_.topLeftCorner(t, t).triangularView<Eigen::Lower>().solve(kx);
        }
        const double d2 = eval_kernel(kernel_, x, x) + lam_eff - w.squaredNorm();
        xs_.push_back(x);
        ys_.push_back(y);
        if (!(d2 > 0.0)) {
            refit();
            return;
        }
        const double d = std::sqrt(d2);
        chol_.row(t).head(t) = w.transpose();
        chol_.col(t).head(t).setZero();  // keep the dense block strictly lower triangular
        chol_(t, t) = d;
        const double vnew = (y - w.dot(v_.head(t))) / d;
        v_(t) = vnew;
        gamma_ += std::log(d) - 0.5 * std::log(lam_eff);
        max_ratio_ = std::max(max_ratio_, d2 / lam_eff);
        const Eigen::Index p = static_cast<Eigen::Index>(probes_.size());
        if (p > 0) {
            Eigen::VectorXd kp(p);
            for (Eigen::Index j = 0; j < p; ++j) {
                kp(j) = eval_kernel(kernel_, x, probes_[static_cast<std::size_t>(j)]);
            }
            Eigen::VectorXd unew =
                t > 0 ? Eigen::VectorXd((kp - u_.topRows(t).transpose() * w) / d)
                      : Eigen::VectorXd(kp / d);
            u_.row(t) = unew.transpose();
            probe_mean_ += vnew * unew;
            probe_sq_ += unew.cwiseAbs2();
        }
    }

    const Eigen::VectorXd& probe_means() const { return probe_mean_; }

    Eigen::VectorXd probe_variances() const {
        return (probe_prior_ - probe_sq_).cwiseMax(0.0);
    }

    /// RMS residual of the current fit over all observations.
    double sigma_hat() const {
        const Eigen::Index t = static_cast<Eigen::Index>(size());
        if (t == 0) {
            return 0.0;
        }
        const double lam_eff = lambda_ + jitter_;
        const auto lower = chol_.topLeftCorner(t, t).triangularView<Eigen::Lower>();
        const Eigen::Map<const Eigen::VectorXd> y(ys_.data(), t);
        Eigen::VectorXd w = chol_.topLeftCorner(t, t)
                                .transpose()
                                .triangularView<Eigen::Upper>()
                                .solve(Eigen::VectorXd(v_.head(t)));
        const Eigen::VectorXd kw =
            lower * (chol_.topLeftCorner(t, t).transpose() * w) - lam_eff * w;
        return std::sqrt((y - kw).squaredNorm() / static_cast<double>(t));
    }

private:
    void refit() {
        const Eigen::Index t = static_cast<Eigen::Index>(size());
        Eigen::MatrixXd gram = kernel_matrix(kernel_, xs_);
        jitter_ = 0.0;
        for (const double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
            Eigen::MatrixXd shifted = gram;
            shifted.diagonal().array() += lambda_ + jitter;
            const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
            if (llt.info() == Eigen::Success) {
                chol_.topLeftCorner(t, t) = llt.matrixL();
                jitter_ = jitter;
                const double lam_eff = lambda_ + jitter_;
                const Eigen::Map<const Eigen::VectorXd> y(ys_.data(), t);
                v_.head(t) =
                    chol_.topLeftCorner(t, t).triangularView<Eigen::Lower>().solve(
                        Eigen::VectorXd(y));
                gamma_ = 0.0;
                max_ratio_ = 1.0;
                for (Eigen::Index i = 0; i < t; ++i) {
                    const double dii2 = chol_(i, i) * chol_(i, i);
                    gamma_ += std::log(chol_(i, i)) - 0.5 * std::log(lam_eff);
                    max_ratio_ = std::max(max_ratio_, dii2 / lam_eff);
                }
                const Eigen::Index p = static_cast<Eigen::Index>(probes_.size());
                if (p > 0) {
                    Eigen::MatrixXd kxp(t, p);
                    for (Eigen::Index j = 0; j < p; ++j) {
                        kxp.col(j) = kernel_vector(
                            kernel_, probes_[static_cast<std::size_t>(j)], xs_);
                    }
                    u_.topRows(t) =
                        chol_.topLeftCorner(t, t).triangularView<Eigen::Lower>().solve(kxp);
                    probe_mean_ = u_.topRows(t).transpose() * v_.head(t);
                    probe_sq_ = u_.topRows(t).cwiseAbs2().colwise().sum();
                }
                return;
            }
        }
        throw NumericError("StreamingRegressor: Cholesky failed after jitter escalation (t=" +
                           std::to_string(t) + ", lambda=" + g9(lambda_) + ")");
    }

    KernelSpec kernel_;
    double lambda_;
    double jitter_ = 0.0;
    std::vector<double> xs_, ys_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd v_;
    std::vector<double> probes_;
    Eigen::MatrixXd u_;
    Eigen::VectorXd probe_mean_, probe_sq_, probe_prior_;
    double gamma_ = 0.0;
    double max_ratio_ = 1.0;
};

// Adaptive bracket loop over a uniform-sampling stream. Evaluation
// regularization is either pinned (fixed mode) or follows the bracket
// (adaptive mode). The gamma anchor factor is kept in a probe-free regressor
// refit whenever lambda_minus moves.
class BracketLoop {
public:
    BracketLoop(const KernelSpec& kernel, const ConfidenceParams& params, double delta_prime,
                double sigma_minus_prior, double sigma_plus_prior, bool adaptive_lambda,
                std::size_t capacity, std::vector<double> probes)
        : params_(params),
          delta_prime_(delta_prime),
          adaptive_lambda_(adaptive_lambda),
          bracket_(NoiseBracket::initial(sigma_minus_prior, sigma_plus_prior,
                                         params.norm_bound_c)),
          main_(kernel, bracket_.lambda_t, capacity, std::move(probes)),
          anchor_(kernel, anchor_lambda(), capacity, {}) {}

    const NoiseBracket& bracket() const { return bracket_; }
    const StreamingRegressor& regressor() const { return main_; }
    double sigma_hat_last() const { return sigma_hat_last_; }

    /// Radius of the envelope implied by the current bracket (empirical
    /// Bernstein form; for the fixed loop this is the fixed-lambda radius at the
    /// pinned lambda with sigma_plus in place of sigma).
    double current_beta(double delta_inside) const {
        const ConfidenceParams p{delta_inside, params_.norm_bound_c};
        if (adaptive_lambda_) {
            return beta_bernstein(p, bracket_.sigma_plus, bracket_.lambda_t, anchor_.gamma());
        }
        return beta_bernstein(p, bracket_.sigma_plus, main_.lambda(), main_.gamma());
    }

    void observe(double x, double y) {
        main_.append(x, y);
        anchor_.append(x, y);
        const std::size_t t = main_.size();
        // Four-step transition at the evaluation lambda of this observation.
        sigma_hat_last_ = main_.sigma_hat();
        const double c = c_term(t, delta_prime_);
        const std::optional<double> prior = bracket_.sigma_plus_prior;
        NoiseBracket next = bracket_;
        next.t = t;
        next.sigma_minus =
            std::max(sigma_lower_from_stats(sigma_hat_last_, t, main_.lambda(), c,
                                            main_.max_ratio(), prior, params_.norm_bound_c),
                     bracket_.sigma_minus);
        next.lambda_minus =
            next.sigma_minus * next.sigma_minus / (params_.norm_bound_c * params_.norm_bound_c);
        bracket_ = next;
        anchor_.set_lambda(anchor_lambda());
        const double d = d_term(anchor_.gamma(), delta_prime_);
        case1_last_ = prior ? sigma_upper_case1(sigma_hat_last_, t, main_.lambda(), c, d,
                                                *prior, params_.norm_bound_c)
                            : std::numeric_limits<double>::infinity();
        case2_last_ = sigma_upper_case2(sigma_hat_last_, t, main_.lambda(), c, d,
                                        params_.norm_bound_c);
        bracket_.sigma_plus = std::min(std::min(case1_last_, case2_last_), bracket_.sigma_plus);
        bracket_.lambda_t = bracket_.sigma_plus * bracket_.sigma_plus /
                            (params_.norm_bound_c * params_.norm_bound_c);
        if (adaptive_lambda_) {
            main_.set_lambda(bracket_.lambda_t);
        }
    }

    double case1_last() const { return case1_last_; }
    double case2_last() const { return case2_last_; }

private:
    double anchor_lambda() const {
        const double c2 = params_.norm_bound_c * params_.norm_bound_c;
        return bracket_.lambda_minus > 0.0 ? bracket_.lambda_minus : 1e-8 / c2;
    }

    ConfidenceParams params_;
    double delta_prime_;
    bool adaptive_lambda_;
    NoiseBracket bracket_;
    StreamingRegressor main_;
    StreamingRegressor anchor_;
    double sigma_hat_last_ = 0.0;
    double case1_last_ = 0.0;
    double case2_last_ = 0.0;
};

BanditEnvironment make_environment(const ExperimentConfig& config, std::uint64_t seed) {
    return BanditEnvironment{linear_arm_grid(config.arm_count), config.make_truth(),
                             config.sigma_true, seed};
}

std::string default_output_path(ExperimentKind kind) {
    return experiment_name(kind) + (kind == ExperimentKind::Audit ? ".json" : ".csv");
}

std::string output_path_of(const ExperimentConfig& config) {
    return config.output_path.empty() ? default_output_path(config.experiment)
                                      : config.output_path;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = experiment_name(c.experiment);
    j["length_scale"] = c.length_scale;
    if (c.truth.use_default) {
        j["truth"] = "default";
    } else {
        j["truth"] = json{{"centers", c.truth.centers}, {"coefficients", c.truth.coefficients}};
    }
    j["sigma_true"] = c.sigma_true;
    j["sigma_plus_prior"] = c.sigma_plus_prior;
    j["sigma_plus_priors"] = c.sigma_plus_priors;
    j["sigma_minus_prior"] = c.sigma_minus_prior;
    j["norm_bound_c"] = c.norm_bound_c;
    j["delta_total"] = c.delta_total;
    j["horizon"] = c.horizon;
    j["repetitions"] = c.repetitions;
    j["base_seed"] = c.base_seed;
    j["arm_count"] = c.arm_count;
    j["probe_grid_size"] = c.probe_grid_size;
    j["output_path"] = c.output_path;
    j["workers"] = c.workers;
    return j;
}

}  // namespace

// ----------------------------------------------------------------------------
// configuration

std::string experiment_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Envelope: return "envelope";
        case ExperimentKind::EnvelopeCompareWang: return "envelope-compare-wang";
        case ExperimentKind::Variance: return "variance";
        case ExperimentKind::AdaptiveEnvelope: return "adaptive-envelope";
        case ExperimentKind::Bandit: return "bandit";
        case ExperimentKind::Audit: return "audit";
    }
    return "unknown";
}

std::optional<ExperimentKind> experiment_from_name(const std::string& name) {
    for (const ExperimentKind k :
         {ExperimentKind::Envelope, ExperimentKind::EnvelopeCompareWang, ExperimentKind::Variance,
          ExperimentKind::AdaptiveEnvelope, ExperimentKind::Bandit, ExperimentKind::Audit}) {
        if (experiment_name(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

RkhsFunction ExperimentConfig::make_truth() const {
    if (truth.use_default) {
        return default_test_function(length_scale);
    }
    return synth_test_function(gaussian_rbf(length_scale), truth.centers, truth.coefficients);
}

std::vector<double> ExperimentConfig::probe_grid() const {
    std::vector<double> grid(probe_grid_size);
    for (std::size_t j = 0; j < probe_grid_size; ++j) {
        grid[j] = static_cast<double>(j) / static_cast<double>(probe_grid_size - 1);
    }
    return grid;
}

void ExperimentConfig::validate() const {
    if (!(length_scale > 0.0)) throw std::invalid_argument("config: length_scale must be > 0");
    if (!(sigma_true > 0.0)) throw std::invalid_argument("config: sigma_true must be > 0");
    if (!(sigma_plus_prior > 0.0))
        throw std::invalid_argument("config: sigma_plus_prior must be > 0");
    if (sigma_minus_prior < 0.0)
        throw std::invalid_argument("config: sigma_minus_prior must be >= 0");
    if (!(norm_bound_c > 0.0)) throw std::invalid_argument("config: norm_bound_c must be > 0");
    if (!(delta_total > 0.0 && delta_total < 1.0))
        throw std::invalid_argument("config: delta_total must be in (0,1)");
    if (horizon == 0) throw std::invalid_argument("config: horizon must be >= 1");
    if (repetitions == 0) throw std::invalid_argument("config: repetitions must be >= 1");
    if (arm_count < 2) throw std::invalid_argument("config: arm_count must be >= 2");
    if (probe_grid_size < 2) throw std::invalid_argument("config: probe_grid_size must be >= 2");
    if (workers == 0) throw std::invalid_argument("config: workers must be >= 1");
    if (!truth.use_default &&
        (truth.centers.empty() || truth.centers.size() != truth.coefficients.size())) {
        throw std::invalid_argument("config: truth centers/coefficients must match");
    }
    for (const double p : sigma_plus_priors) {
        if (!(p > 0.0)) throw std::invalid_argument("config: sigma_plus_priors must be > 0");
    }
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    switch (kind) {
        case ExperimentKind::Envelope:
        case ExperimentKind::EnvelopeCompareWang:
            c.repetitions = 1;
            c.horizon = 500;
            break;
        case ExperimentKind::Variance:
        case ExperimentKind::AdaptiveEnvelope:
            c.horizon = 500;
            c.repetitions = 100;
            break;
        case ExperimentKind::Bandit:
            c.horizon = 1000;
            c.repetitions = 100;
            break;
        case ExperimentKind::Audit:
            c.horizon = 300;
            c.repetitions = 200;
            break;
    }
    return c;
}

ExperimentConfig parse_config_json(const std::string& text,
                                   std::optional<ExperimentKind> experiment_override,
                                   std::optional<std::uint64_t> seed_override,
                                   std::optional<std::string> out_override,
                                   std::optional<std::size_t> workers_override) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("config: top-level JSON must be an object");
    }
    ExperimentKind kind = ExperimentKind::Envelope;
    if (experiment_override) {
        kind = *experiment_override;
    } else if (j.contains("experiment")) {
        const auto k = experiment_from_name(j.at("experiment").get<std::string>());
        if (!k) {
            throw std::invalid_argument("config: unknown experiment name");
        }
        kind = *k;
    } else {
        throw std::invalid_argument("config: experiment is required");
    }
    ExperimentConfig c = default_config(kind);

    const auto get_double = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = j.at(key).get<double>();
    };
    const auto get_size = [&](const char* key, std::size_t& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::size_t>();
    };
    get_double("length_scale", c.length_scale);
    get_double("sigma_true", c.sigma_true);
    get_double("sigma_plus_prior", c.sigma_plus_prior);
    get_double("sigma_minus_prior", c.sigma_minus_prior);
    get_double("norm_bound_c", c.norm_bound_c);
    get_double("delta_total", c.delta_total);
    get_size("horizon", c.horizon);
    get_size("repetitions", c.repetitions);
    get_size("arm_count", c.arm_count);
    get_size("probe_grid_size", c.probe_grid_size);
    get_size("workers", c.workers);
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("output_path")) c.output_path = j.at("output_path").get<std::string>();
    if (j.contains("sigma_plus_priors")) {
        c.sigma_plus_priors = j.at("sigma_plus_priors").get<std::vector<double>>();
    }
    if (j.contains("truth")) {
        const json& t = j.at("truth");
        if (t.is_string()) {
            if (t.get<std::string>() != "default") {
                throw std::invalid_argument("config: truth must be \"default\" or an object");
            }
        } else {
            c.truth.use_default = false;
            c.truth.centers = t.at("centers").get<std::vector<double>>();
            c.truth.coefficients = t.at("coefficients").get<std::vector<double>>();
        }
    }
    if (seed_override) c.base_seed = *seed_override;
    if (out_override) c.output_path = *out_override;
    if (workers_override) c.workers = *workers_override;
    c.validate();
    return c;
}

std::string config_digest(const ExperimentConfig& config) {
    const std::string canonical = config_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ----------------------------------------------------------------------------
// envelope experiments

namespace {

struct EnvelopeRows {
    std::string rows;
};

// Streams one uniform-sampling realization and renders checkpoint rows for
// the fixed-regularization envelopes at lambda = sigma^2 and lambda = sigma^2/C^2. The mean
// column follows `mean_from_sigma2`: the Wang comparison renders the
// lambda = sigma^2 regression, the plain envelope the lambda-star one.
EnvelopeRows envelope_realization(const ExperimentConfig& config, bool with_wang) {
    const KernelSpec kernel = gaussian_rbf(config.length_scale);
    const RkhsFunction truth = config.make_truth();
    const double sigma = config.sigma_true;
    const double lambda_sigma2 = sigma * sigma;
    const double lambda_star = sigma * sigma / (config.norm_bound_c * config.norm_bound_c);
    const std::vector<double> probes = config.probe_grid();

    StreamingRegressor reg_s2(kernel, lambda_sigma2, config.horizon + 1, probes);
    StreamingRegressor reg_star(kernel, lambda_star, config.horizon + 1, probes);

    const std::vector<std::size_t> cps = checkpoints_upto(config.horizon);
    Rng rng(config.base_seed);

    EnvelopeRows out;
    std::size_t next_cp = 0;
    for (std::size_t t = 0; t <= config.horizon; ++t) {
        if (next_cp < cps.size() && cps[next_cp] == t) {
            ++next_cp;
            const double beta_s2 = beta_fixed(config.norm_bound_c, sigma, lambda_sigma2,
                                              reg_s2.gamma(), config.delta_total);
            const double beta_star = beta_fixed(config.norm_bound_c, sigma, lambda_star,
                                                reg_star.gamma(), config.delta_total);
            const double ell =
                with_wang ? wang_bound(config.norm_bound_c, sigma, reg_s2.gamma(),
                                       config.delta_total)
                          : 0.0;
            const Eigen::VectorXd var_s2 = reg_s2.probe_variances();
            const Eigen::VectorXd var_star = reg_star.probe_variances();
            const Eigen::VectorXd& mean_s2 = reg_s2.probe_means();
            const Eigen::VectorXd& mean_star = reg_star.probe_means();
            for (std::size_t jdx = 0; jdx < probes.size(); ++jdx) {
                const Eigen::Index jj = static_cast<Eigen::Index>(jdx);
                const double hw_s2 = std::sqrt(var_s2(jj) / lambda_sigma2) * beta_s2;
                const double hw_star = std::sqrt(var_star(jj) / lambda_star) * beta_star;
                out.rows += u64(t);
                out.rows += ',';
                out.rows += g9(probes[jdx]);
                out.rows += ',';
                out.rows += g9(truth(probes[jdx]));
                out.rows += ',';
                out.rows += g9(with_wang ? mean_s2(jj) : mean_star(jj));
                out.rows += ',';
                out.rows += g9(hw_s2);
                out.rows += ',';
                out.rows += g9(hw_star);
                if (with_wang) {
                    const double hw_wang = ell * std::sqrt(var_s2(jj));
                    out.rows += ',';
                    out.rows += g9(hw_wang);
                    out.rows += ',';
                    out.rows += g9(hw_wang > 0.0 ? hw_s2 / hw_wang : 0.0);
                }
                out.rows += '\n';
            }
        }
        if (t == config.horizon) {
            break;
        }
        const double x = rng.uniform();
        const double y = truth(x) + sigma * rng.normal();
        reg_s2.append(x, y);
        reg_star.append(x, y);
    }
    return out;
}

}  // namespace

RunResult run_envelope(const ExperimentConfig& config) {
    try {
        config.validate();
        std::string csv = "t,x,f_star,mean,half_width_lambda_sigma2,half_width_lambda_star\n";
        csv += envelope_realization(config, /*with_wang=*/false).rows;
        std::string err;
        if (!write_file(output_path_of(config), csv, err)) {
            return {1, err};
        }
        return {0, "envelope: wrote " + output_path_of(config)};
    } catch (const std::invalid_argument& e) {
        return {1, e.what()};
    } catch (const std::exception& e) {
        return {2, e.what()};
    }
}

RunResult run_envelope_compare_wang(const ExperimentConfig& config) {
    try {
        config.validate();
        std::string csv =
            "t,x,f_star,mean,half_width_lambda_sigma2,half_width_lambda_star,"
            "wang_half_width,width_ratio_sigma2_wang\n";
        csv += envelope_realization(config, /*with_wang=*/true).rows;
        std::string err;
        if (!write_file(output_path_of(config), csv, err)) {
            return {1, err};
        }
        return {0, "envelope-compare-wang: wrote " + output_path_of(config)};
    } catch (const std::invalid_argument& e) {
        return {1, e.what()};
    } catch (const std::exception& e) {
        return {2, e.what()};
    }
}

// ----------------------------------------------------------------------------
// variance experiment

namespace {

struct VarianceRep {
    std::string rows;
    double final_sigma_plus_fixed = 0.0;
    double final_sigma_plus_adaptive = 0.0;
    bool covered_fixed = true;      // sigma inside bracket at every t
    bool covered_adaptive = true;
    bool monotone = true;
};

VarianceRep variance_rep(const ExperimentConfig& config, double prior, std::size_t rep) {
    const KernelSpec kernel = gaussian_rbf(config.length_scale);
    const RkhsFunction truth = config.make_truth();
    const double sigma = config.sigma_true;
    const ConfidenceParams params{config.delta_total, config.norm_bound_c};
    const double delta_prime = config.delta_total / 4.0;

    VarianceRep out;
    for (const bool adaptive : {false, true}) {
        Rng rng(config.base_seed + rep);  // paired draws between modes
        BracketLoop loop(kernel, params, delta_prime, config.sigma_minus_prior, prior, adaptive,
                         config.horizon + 1, {});
        double prev_plus = prior;
        double prev_minus = config.sigma_minus_prior;
        bool covered = true;
        for (std::size_t t = 1; t <= config.horizon; ++t) {
            const double x = rng.uniform();
            const double y = truth(x) + sigma * rng.normal();
            loop.observe(x, y);
            const NoiseBracket& b = loop.bracket();
            if (b.sigma_plus > prev_plus + 1e-12 || b.sigma_minus < prev_minus - 1e-12) {
                out.monotone = false;
            }
            prev_plus = b.sigma_plus;
            prev_minus = b.sigma_minus;
            if (!(b.sigma_minus - 1e-12 <= sigma && sigma <= b.sigma_plus + 1e-12)) {
                covered = false;
            }
            out.rows += adaptive ? "adaptive," : "fixed,";
            out.rows += g9(prior);
            out.rows += ',';
            out.rows += u64(rep);
            out.rows += ',';
            out.rows += u64(t);
            out.rows += ',';
            out.rows += g9(loop.sigma_hat_last());
            out.rows += ',';
            out.rows += g9(b.sigma_minus);
            out.rows += ',';
            out.rows += g9(loop.case1_last());
            out.rows += ',';
            out.rows += g9(loop.case2_last());
            out.rows += ',';
            out.rows += g9(b.sigma_plus);
            out.rows += ',';
            out.rows += g9(b.lambda_t);
            out.rows += '\n';
        }
        if (adaptive) {
            out.final_sigma_plus_adaptive = prev_plus;
            out.covered_adaptive = covered;
        } else {
            out.final_sigma_plus_fixed = prev_plus;
            out.covered_fixed = covered;
        }
    }
    return out;
}

}  // namespace

RunResult run_variance(const ExperimentConfig& config) {
    try {
        config.validate();
        const std::vector<double> priors = config.sigma_plus_priors.empty()
                                               ? std::vector<double>{config.sigma_plus_prior}
                                               : config.sigma_plus_priors;
        std::string csv =
            "mode,sigma_plus_prior,rep,t,sigma_hat,sigma_minus,"
            "sigma_plus_case1,sigma_plus_case2,sigma_plus,lambda_t\n";
        std::ostringstream failures;
        const double delta_prime = config.delta_total / 4.0;
        for (const double prior : priors) {
            std::vector<VarianceRep> reps(config.repetitions);
            parallel_reps(config.repetitions, config.workers,
                          [&](std::size_t r) { reps[r] = variance_rep(config, prior, r); });
            std::size_t miss_adaptive = 0;
            std::vector<double> diffs;
            for (std::size_t r = 0; r < config.repetitions; ++r) {
                csv += reps[r].rows;
                if (!reps[r].monotone) {
                    failures << "non-monotone bracket at prior " << prior << " rep " << r << "; ";
                }
                miss_adaptive += reps[r].covered_adaptive ? 0 : 1;
                diffs.push_back(reps[r].final_sigma_plus_adaptive -
                                reps[r].final_sigma_plus_fixed);
            }
            const double n = static_cast<double>(config.repetitions);
            const double allowed = 3.0 * delta_prime + 3.0 / std::sqrt(n);
            if (static_cast<double>(miss_adaptive) / n > allowed) {
                failures << "bracket coverage failed at prior " << prior << ": "
                         << miss_adaptive << "/" << config.repetitions << " > " << allowed
                         << "; ";
            }
            if (median(diffs) > 1e-12) {
                failures << "adaptive sigma_plus median exceeds fixed at prior " << prior
                         << "; ";
            }
        }
        std::string err;
        if (!write_file(output_path_of(config), csv, err)) {
            return {1, err};
        }
        if (!failures.str().empty()) {
            return {2, "variance: " + failures.str()};
        }
        return {0, "variance: wrote " + output_path_of(config)};
    } catch (const std::invalid_argument& e) {
        return {1, e.what()};
    } catch (const std::exception& e) {
        return {2, e.what()};
    }
}

// ----------------------------------------------------------------------------
// adaptive envelope experiment

namespace {

struct AdaptiveEnvelopeRep {
    std::string rows;
    double dominance_fraction = 0.0;  // probes where adaptive half-width <= fixed at final t
};

AdaptiveEnvelopeRep adaptive_envelope_rep(const ExperimentConfig& config, std::size_t rep) {
    const KernelSpec kernel = gaussian_rbf(config.length_scale);
    const RkhsFunction truth = config.make_truth();
    const double sigma = config.sigma_true;
    const double prior = config.sigma_plus_prior;
    const ConfidenceParams params{config.delta_total, config.norm_bound_c};
    const double delta_prime = config.delta_total / 4.0;
    const double delta_inside = config.delta_total / 4.0;
    const std::vector<double> probes = config.probe_grid();
    const double lambda_fixed =
        prior * prior / (config.norm_bound_c * config.norm_bound_c);

    Rng rng(config.base_seed + rep);
    StreamingRegressor fixed_reg(kernel, lambda_fixed, config.horizon + 1, probes);
    BracketLoop loop(kernel, params, delta_prime, config.sigma_minus_prior, prior,
                     /*adaptive=*/true, config.horizon + 1, probes);

    const std::vector<std::size_t> cps = checkpoints_upto(config.horizon);
    std::size_t next_cp = 0;
    AdaptiveEnvelopeRep out;

    const ConfidenceParams radius{delta_inside, config.norm_bound_c};
    for (std::size_t t = 0; t <= config.horizon; ++t) {
        const bool at_cp = next_cp < cps.size() && cps[next_cp] == t;
        const bool last = t == config.horizon;
        if (at_cp || last) {
            if (at_cp) {
                ++next_cp;
            }
            const double beta_fixed_t =
                beta_bernstein(radius, prior, lambda_fixed, fixed_reg.gamma());
            const double beta_adaptive_t = loop.current_beta(delta_inside);
            const Eigen::VectorXd var_f = fixed_reg.probe_variances();
            const Eigen::VectorXd var_a = loop.regressor().probe_variances();
            const Eigen::VectorXd& mean_f = fixed_reg.probe_means();
            const Eigen::VectorXd& mean_a = loop.regressor().probe_means();
            const double lambda_a = loop.regressor().lambda();
            std::size_t dominated = 0;
            for (std::size_t jdx = 0; jdx < probes.size(); ++jdx) {
                const Eigen::Index jj = static_cast<Eigen::Index>(jdx);
                const double hw_f = std::sqrt(var_f(jj) / lambda_fixed) * beta_fixed_t;
                const double hw_a = std::sqrt(var_a(jj) / lambda_a) * beta_adaptive_t;
                if (hw_a <= hw_f + 1e-12) {
                    ++dominated;
                }
                if (at_cp) {
                    out.rows += u64(rep);
                    out.rows += ',';
                    out.rows += u64(t);
                    out.rows += ',';
                    out.rows += g9(probes[jdx]);
                    out.rows += ',';
                    out.rows += g9(truth(probes[jdx]));
                    out.rows += ',';
                    out.rows += g9(mean_f(jj));
                    out.rows += ',';
                    out.rows += g9(hw_f);
                    out.rows += ',';
                    out.rows += g9(mean_a(jj));
                    out.rows += ',';
                    out.rows += g9(hw_a);
                    out.rows += '\n';
                }
            }
            if (last) {
                out.dominance_fraction =
                    static_cast<double>(dominated) / static_cast<double>(probes.size());
                break;
            }
        }
        const double x = rng.uniform();
        const double y = truth(x) + sigma * rng.normal();
        fixed_reg.append(x, y);
        loop.observe(x, y);
    }
    return out;
}

}  // namespace

RunResult run_adaptive_envelope(const ExperimentConfig& config) {
    try {
        config.validate();
        std::string csv =
            "rep,t,x,f_star,mean_fixed,half_width_fixed,mean_adaptive,half_width_adaptive\n";
        std::vector<AdaptiveEnvelopeRep> reps(config.repetitions);
        parallel_reps(config.repetitions, config.workers,
                      [&](std::size_t r) { reps[r] = adaptive_envelope_rep(config, r); });
        std::vector<double> fractions;
        for (std::size_t r = 0; r < config.repetitions; ++r) {
            csv += reps[r].rows;
            fractions.push_back(reps[r].dominance_fraction);
        }
        std::string err;
        if (!write_file(output_path_of(config), csv, err)) {
            return {1, err};
        }
        if (median(fractions) < 0.5) {
            return {2, "adaptive-envelope: adaptive envelope does not dominate at the median (" +
                           g9(median(fractions)) + ")"};
        }
        return {0, "adaptive-envelope: wrote " + output_path_of(config)};
    } catch (const std::invalid_argument& e) {
        return {1, e.what()};
    } catch (const std::exception& e) {
        return {2, e.what()};
    }
}

// ----------------------------------------------------------------------------
// bandit experiment

namespace {

struct BanditGroup {
    Policy policy;
    RegMode mode;
    const char* policy_name;
    const char* mode_name;
};

AgentConfig agent_for(const ExperimentConfig& config, Policy policy, RegMode mode) {
    AgentConfig agent;
    agent.policy = policy;
    agent.reg_mode = mode;
    agent.params = ConfidenceParams{config.delta_total, config.norm_bound_c};
    agent.sigma_plus_prior = config.sigma_plus_prior;
    agent.sigma_minus_prior = config.sigma_minus_prior;
    agent.horizon = config.horizon;
    return agent;
}

}  // namespace

RunResult run_bandit_experiment(const ExperimentConfig& config) {
    try {
        config.validate();
        const std::vector<BanditGroup> groups = {
            {Policy::Ucb, RegMode::Oracle, "ucb", "oracle"},
            {Policy::Ucb, RegMode::Fixed, "ucb", "fixed"},
            {Policy::Ucb, RegMode::Adaptive, "ucb", "adaptive"},
            {Policy::Ts, RegMode::Oracle, "ts", "oracle"},
            {Policy::Ts, RegMode::Fixed, "ts", "fixed"},
            {Policy::Ts, RegMode::Adaptive, "ts", "adaptive"},
            {Policy::TsWang, RegMode::Oracle, "ts_wang", "oracle"},
        };
        std::string csv = "policy,reg_mode,t,regret_mean,regret_std\n";
        std::ostringstream failures;
        std::vector<std::size_t> oracle_rep0_arms;
        double r_ucb_oracle = 0.0, r_ucb_fixed = 0.0;

        for (const BanditGroup& group : groups) {
            std::vector<std::vector<double>> curves(config.repetitions);
            parallel_reps(config.repetitions, config.workers, [&](std::size_t r) {
                const BanditEnvironment env = make_environment(config, config.base_seed + r);
                const RegretTrace trace = run_bandit(env, agent_for(config, group.policy,
                                                                    group.mode));
                std::vector<double> curve(config.horizon);
                for (std::size_t t = 0; t < config.horizon; ++t) {
                    curve[t] = trace.steps[t].cumulative_regret;
                }
                curves[r] = std::move(curve);
                if (r == 0 && group.policy == Policy::Ucb && group.mode == RegMode::Oracle) {
                    std::vector<std::size_t> arms(config.horizon);
                    for (std::size_t t = 0; t < config.horizon; ++t) {
                        arms[t] = trace.steps[t].arm_index;
                    }
                    oracle_rep0_arms = std::move(arms);
                }
            });
            const double n = static_cast<double>(config.repetitions);
            double prev_mean = 0.0;
            for (std::size_t t = 0; t < config.horizon; ++t) {
                double mean = 0.0;
                for (const auto& c : curves) mean += c[t];
                mean /= n;
                double var = 0.0;
                for (const auto& c : curves) var += (c[t] - mean) * (c[t] - mean);
                const double sd = config.repetitions > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
                if (mean < prev_mean - 1e-9) {
                    failures << group.policy_name << "/" << group.mode_name
                             << ": regret mean decreased at t=" << (t + 1) << "; ";
                }
                prev_mean = mean;
                csv += group.policy_name;
                csv += ',';
                csv += group.mode_name;
                csv += ',';
                csv += u64(t + 1);
                csv += ',';
                csv += g9(mean);
                csv += ',';
                csv += g9(sd);
                csv += '\n';
            }
            if (group.policy == Policy::Ucb && group.mode == RegMode::Oracle) {
                r_ucb_oracle = prev_mean;
            }
            if (group.policy == Policy::Ucb && group.mode == RegMode::Fixed) {
                r_ucb_fixed = prev_mean;
            }
        }
        if (r_ucb_oracle > r_ucb_fixed + 1e-9) {
            failures << "ucb oracle regret exceeds the fixed-loose regret at T; ";
        }

        // Closed-form curves for overlay plots, anchored on the visited points
        // of the first oracle repetition.
        {
            const KernelSpec kernel = gaussian_rbf(config.length_scale);
            const RkhsFunction truth = config.make_truth();
            const std::vector<double> arms = linear_arm_grid(config.arm_count);
            const double c2 = config.norm_bound_c * config.norm_bound_c;
            const double lambda_star = config.sigma_true * config.sigma_true / c2;
            const double lambda_minus =
                std::max(config.sigma_minus_prior * config.sigma_minus_prior / c2, 1e-8 / c2);
            StreamingRegressor g_star(kernel, lambda_star, config.horizon + 1, {});
            StreamingRegressor g_minus(kernel, lambda_minus, config.horizon + 1, {});
            std::vector<double> gamma_star(config.horizon + 1, 0.0);
            std::vector<double> gamma_minus(config.horizon + 1, 0.0);
            for (std::size_t t = 0; t < oracle_rep0_arms.size(); ++t) {
                const double x = arms[oracle_rep0_arms[t]];
                g_star.append(x, 0.0);
                g_minus.append(x, 0.0);
                gamma_star[t + 1] = g_star.gamma();
                gamma_minus[t + 1] = g_minus.gamma();
            }
            double max_gap = 0.0;
            double best = -std::numeric_limits<double>::infinity();
            for (const double a : arms) best = std::max(best, truth(a));
            for (const double a : arms) max_gap = std::max(max_gap, best - truth(a));
            const TheoreticalRegretCurves curves = theoretical_regret_curves(
                config.sigma_true, config.sigma_plus_prior, config.sigma_minus_prior,
                config.norm_bound_c, config.delta_total, gamma_star, gamma_minus, max_gap,
                config.arm_count);
            for (std::size_t t = 1; t <= config.horizon; ++t) {
                csv += "theory_ucb,oracle," + u64(t) + ',' + g9(curves.ucb[t]) + ",0\n";
            }
            for (std::size_t t = 1; t <= config.horizon; ++t) {
                csv += "theory_ts,oracle," + u64(t) + ',' + g9(curves.ts[t]) + ",0\n";
            }
        }

        std::string err;
        if (!write_file(output_path_of(config), csv, err)) {
            return {1, err};
        }
        if (!failures.str().empty()) {
            return {2, "bandit: " + failures.str()};
        }
        return {0, "bandit: wrote " + output_path_of(config)};
    } catch (const std::invalid_argument& e) {
        return {1, e.what()};
    } catch (const std::exception& e) {
        return {2, e.what()};
    }
}

// ----------------------------------------------------------------------------
// audit

namespace {

AuditCheck finish_check(AuditCheck check) {
    const double n = static_cast<double>(check.trials);
    check.frequency = n > 0.0 ? static_cast<double>(check.violations) / n : 0.0;
    check.stderr_binomial =
        n > 0.0 ? std::sqrt(std::max(0.0, check.frequency * (1.0 - check.frequency) / n)) : 0.0;
    check.pass = check.frequency <= check.threshold + 1e-12;
    return check;
}

}  // namespace

AuditCheck envelope_coverage_fixed_check(const ExperimentConfig& config, std::size_t horizon,
                                        std::size_t repetitions) {
    const KernelSpec kernel = gaussian_rbf(config.length_scale);
    const RkhsFunction truth = config.make_truth();
    const double sigma = config.sigma_true;
    const double delta = config.delta_total;
    const double lambda = sigma * sigma / (config.norm_bound_c * config.norm_bound_c);
    const std::vector<double> probes = config.probe_grid();
    Eigen::VectorXd ftrue(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t j = 0; j < probes.size(); ++j) {
        ftrue(static_cast<Eigen::Index>(j)) = truth(probes[j]);
    }

    std::vector<char> violated(repetitions, 0);
    parallel_reps(repetitions, config.workers, [&](std::size_t rep) {
        Rng rng(config.base_seed + rep);
        StreamingRegressor reg(kernel, lambda, horizon + 1, probes);
        bool bad = false;
        for (std::size_t t = 0; t <= horizon && !bad; ++t) {
            const double beta =
                beta_fixed(config.norm_bound_c, sigma, lambda, reg.gamma(), delta);
            const Eigen::VectorXd var = reg.probe_variances();
            const Eigen::VectorXd& mean = reg.probe_means();
            const Eigen::VectorXd hw = (var / lambda).cwiseSqrt() * beta;
            if (((ftrue - mean).cwiseAbs().array() > hw.array() + 1e-12).any()) {
                bad = true;
            }
            if (t < horizon) {
                const double x = rng.uniform();
                reg.append(x, truth(x) + sigma * rng.normal());
            }
        }
        violated[rep] = bad ? 1 : 0;
    });
    AuditCheck check;
    check.name = "envelope_coverage_fixed";
    check.declared_delta = delta;
    check.trials = repetitions;
    for (const char v : violated) check.violations += v;
    check.threshold = delta + 3.0 * std::sqrt(delta * (1.0 - delta) /
                                              static_cast<double>(repetitions));
    return finish_check(check);
}

AuditCheck envelope_coverage_adaptive_check(const ExperimentConfig& config, std::size_t horizon,
                                            std::size_t repetitions) {
    const KernelSpec kernel = gaussian_rbf(config.length_scale);
    const RkhsFunction truth = config.make_truth();
    const double sigma = config.sigma_true;
    const double delta_inside = config.delta_total / 4.0;
    const ConfidenceParams params{config.delta_total, config.norm_bound_c};
    const std::vector<double> probes = config.probe_grid();
    Eigen::VectorXd ftrue(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t j = 0; j < probes.size(); ++j) {
        ftrue(static_cast<Eigen::Index>(j)) = truth(probes[j]);
    }

    std::vector<char> violated(repetitions, 0);
    parallel_reps(repetitions, config.workers, [&](std::size_t rep) {
        Rng rng(config.base_seed + rep);
        BracketLoop loop(kernel, params, config.delta_total / 4.0, config.sigma_minus_prior,
                         config.sigma_plus_prior, /*adaptive=*/true, horizon + 1, probes);
        bool bad = false;
        for (std::size_t t = 0; t <= horizon && !bad; ++t) {
            const double beta = loop.current_beta(delta_inside);
            const double lambda = loop.regressor().lambda();
            const Eigen::VectorXd var = loop.regressor().probe_variances();
            const Eigen::VectorXd& mean = loop.regressor().probe_means();
            const Eigen::VectorXd hw = (var / lambda).cwiseSqrt() * beta;
            if (((ftrue - mean).cwiseAbs().array() > hw.array() + 1e-12).any()) {
                bad = true;
            }
            if (t < horizon) {
                const double x = rng.uniform();
                loop.observe(x, truth(x) + sigma * rng.normal());
            }
        }
        violated[rep] = bad ? 1 : 0;
    });
    AuditCheck check;
    check.name = "envelope_coverage_adaptive";
    check.declared_delta = config.delta_total;  // 4 * delta_inside
    check.trials = repetitions;
    for (const char v : violated) check.violations += v;
    check.threshold =
        config.delta_total +
        3.0 * std::sqrt(config.delta_total * (1.0 - config.delta_total) /
                        static_cast<double>(repetitions));
    return finish_check(check);
}

AuditCheck bracket_validity_check(const ExperimentConfig& config, std::size_t horizon,
                                  std::size_t repetitions) {
    const KernelSpec kernel = gaussian_rbf(config.length_scale);
    const RkhsFunction truth = config.make_truth();
    const double sigma = config.sigma_true;
    const ConfidenceParams params{config.delta_total, config.norm_bound_c};
    const double delta_prime = config.delta_total / 4.0;

    std::vector<char> violated(repetitions, 0);
    parallel_reps(repetitions, config.workers, [&](std::size_t rep) {
        Rng rng(config.base_seed + rep);
        BracketLoop loop(kernel, params, delta_prime, config.sigma_minus_prior,
                         config.sigma_plus_prior, /*adaptive=*/true, horizon + 1, {});
        bool bad = false;
        for (std::size_t t = 1; t <= horizon; ++t) {
            const double x = rng.uniform();
            loop.observe(x, truth(x) + sigma * rng.normal());
            const NoiseBracket& b = loop.bracket();
            if (!(b.sigma_minus - 1e-12 <= sigma && sigma <= b.sigma_plus + 1e-12)) {
                bad = true;
                break;
            }
        }
        violated[rep] = bad ? 1 : 0;
    });
    AuditCheck check;
    check.name = "bracket_validity";
    check.declared_delta = 3.0 * delta_prime;
    check.trials = repetitions;
    for (const char v : violated) check.violations += v;
    check.threshold = 3.0 * delta_prime + 3.0 / std::sqrt(static_cast<double>(repetitions));
    return finish_check(check);
}

AuditCheck infogain_budget_mc_check(const ExperimentConfig& config, std::size_t horizon,
                                    std::size_t repetitions) {
    const ConfidenceParams params{config.delta_total, config.norm_bound_c};
    std::vector<char> violated(repetitions * 3, 0);
    const std::vector<RegMode> modes = {RegMode::Oracle, RegMode::Fixed, RegMode::Adaptive};
    parallel_reps(repetitions * 3, config.workers, [&](std::size_t i) {
        const std::size_t rep = i / 3;
        const RegMode mode = modes[i % 3];
        const BanditEnvironment env = make_environment(config, config.base_seed + rep);
        ExperimentConfig local = config;
        local.horizon = horizon;
        AgentConfig agent = agent_for(local, Policy::Ucb, mode);
        const RegretTrace trace = run_bandit(env, agent);
        const InfoGainBudgetAudit audit = infogain_budget_check(trace, env, params);
        violated[i] = (audit.lambda_precondition_held && audit.lhs > audit.rhs * (1.0 + 1e-9))
                          ? 1
                          : 0;
    });
    AuditCheck check;
    check.name = "infogain_budget";
    check.declared_delta = 0.0;
    check.trials = repetitions * 3;
    for (const char v : violated) check.violations += v;
    check.threshold = 0.0;
    return finish_check(check);
}

RunResult run_audit(const ExperimentConfig& config) {
    try {
        config.validate();
        std::vector<AuditCheck> checks;
        checks.push_back(
            envelope_coverage_fixed_check(config, config.horizon, config.repetitions));
        checks.push_back(envelope_coverage_adaptive_check(
            config, config.horizon, std::max<std::size_t>(20, config.repetitions / 4)));
        checks.push_back(bracket_validity_check(config, config.horizon,
                                                std::max<std::size_t>(20, config.repetitions / 2)));
        checks.push_back(infogain_budget_mc_check(
            config, std::min<std::size_t>(config.horizon, 200),
            std::max<std::size_t>(5, config.repetitions / 20)));

        json report;
        report["experiment"] = "audit";
        report["config_digest"] = config_digest(config);
        report["checks"] = json::array();
        bool pass = true;
        for (const AuditCheck& c : checks) {
            pass = pass && c.pass;
            report["checks"].push_back(json{{"name", c.name},
                                            {"declared_delta", c.declared_delta},
                                            {"trials", c.trials},
                                            {"violations", c.violations},
                                            {"frequency", c.frequency},
                                            {"stderr", c.stderr_binomial}});
        }
        report["pass"] = pass;
        std::string err;
        if (!write_file(output_path_of(config), report.dump(2) + "\n", err)) {
            return {1, err};
        }
        if (!pass) {
            return {2, "audit: at least one check failed; see " + output_path_of(config)};
        }
        return {0, "audit: wrote " + output_path_of(config)};
    } catch (const std::invalid_argument& e) {
        return {1, e.what()};
    } catch (const std::exception& e) {
        return {2, e.what()};
    }
}

RunResult run_experiment(const ExperimentConfig& config) {
    switch (config.experiment) {
        case ExperimentKind::Envelope: return run_envelope(config);
        case ExperimentKind::EnvelopeCompareWang: return run_envelope_compare_wang(config);
        case ExperimentKind::Variance: return run_variance(config);
        case ExperimentKind::AdaptiveEnvelope: return run_adaptive_envelope(config);
        case ExperimentKind::Bandit: return run_bandit_experiment(config);
        case ExperimentKind::Audit: return run_audit(config);
    }
    return {1, "unknown experiment"};
}

}  // namespace kernelstream
