#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kernelstream/kernel.hpp"

namespace kernelstream {

enum class ExperimentKind {
    Envelope,
    EnvelopeCompareWang,
    Variance,
    AdaptiveEnvelope,
    Bandit,
    Audit,
};

std::string experiment_name(ExperimentKind kind);
std::optional<ExperimentKind> experiment_from_name(const std::string& name);

/// Ground truth selection: the shipped default function or explicit centers
/// and coefficients.
struct TruthSpec {
    bool use_default = true;
    std::vector<double> centers;
    std::vector<double> coefficients;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Envelope;
    double length_scale = 0.3;
    TruthSpec truth;
    double sigma_true = 0.1;
    double sigma_plus_prior = 1.0;
    std::vector<double> sigma_plus_priors;  // variance experiment sweep; empty = {sigma_plus_prior}
    double sigma_minus_prior = 0.01;
    double norm_bound_c = 5.0;
    double delta_total = 0.1;
    std::size_t horizon = 500;
    std::size_t repetitions = 100;
    std::uint64_t base_seed = 123;
    std::size_t arm_count = 100;
    std::size_t probe_grid_size = 200;
    std::string output_path;  // empty = default "<experiment>.csv" / ".json"
    std::size_t workers = 1;

    RkhsFunction make_truth() const;
    std::vector<double> probe_grid() const;
    void validate() const;  // throws std::invalid_argument
};

ExperimentConfig default_config(ExperimentKind kind);

/// Parse a config document; CLI-provided values override top-level keys.
ExperimentConfig parse_config_json(const std::string& text,
                                   std::optional<ExperimentKind> experiment_override,
                                   std::optional<std::uint64_t> seed_override,
                                   std::optional<std::string> out_override,
                                   std::optional<std::size_t> workers_override);

/// FNV-1a hash of the canonical JSON form, hex encoded.
std::string config_digest(const ExperimentConfig& config);

/// Exit semantics: 0 ok, 1 config or I/O error, 2 internal assertion failure.
struct RunResult {
    int exit_code = 0;
    std::string message;
};

RunResult run_envelope(const ExperimentConfig& config);
RunResult run_envelope_compare_wang(const ExperimentConfig& config);
RunResult run_variance(const ExperimentConfig& config);
RunResult run_adaptive_envelope(const ExperimentConfig& config);
RunResult run_bandit_experiment(const ExperimentConfig& config);
RunResult run_audit(const ExperimentConfig& config);

/// Dispatch on config.experiment.
RunResult run_experiment(const ExperimentConfig& config);

/// One line of the audit report; also reused directly by the acceptance suite.
struct AuditCheck {
    std::string name;
    double declared_delta = 0.0;
    std::size_t trials = 0;
    std::size_t violations = 0;
    double frequency = 0.0;
    double stderr_binomial = 0.0;
    double threshold = 0.0;  // pass iff frequency <= threshold
    bool pass = true;
};

/// Any-time any-probe coverage of the fixed-lambda envelope (true sigma known,
/// lambda = sigma^2/C^2, radius from the norm bound).
AuditCheck envelope_coverage_fixed_check(const ExperimentConfig& config, std::size_t horizon,
                                        std::size_t repetitions);

/// Any-time any-probe coverage of the adaptive empirical-Bernstein envelope.
AuditCheck envelope_coverage_adaptive_check(const ExperimentConfig& config, std::size_t horizon,
                                            std::size_t repetitions);

/// Frequency of {exists t: sigma outside [sigma_minus_t, sigma_plus_t]} under
/// the adaptive bracket loop with uniform sampling.
AuditCheck bracket_validity_check(const ExperimentConfig& config, std::size_t horizon,
                                  std::size_t repetitions);

/// Deterministic budget inequality over bandit runs (all three
/// regularization modes, UCB policy).
AuditCheck infogain_budget_mc_check(const ExperimentConfig& config, std::size_t horizon,
                                    std::size_t repetitions);

}  // namespace kernelstream
