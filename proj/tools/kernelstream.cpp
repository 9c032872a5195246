#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "kernelstream/experiments.hpp"

namespace {

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming kernel regression experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> workers;

    std::vector<std::pair<CLI::App*, kernelstream::ExperimentKind>> subs;
    for (const auto kind :
         {kernelstream::ExperimentKind::Envelope, kernelstream::ExperimentKind::EnvelopeCompareWang,
          kernelstream::ExperimentKind::Variance, kernelstream::ExperimentKind::AdaptiveEnvelope,
          kernelstream::ExperimentKind::Bandit, kernelstream::ExperimentKind::Audit}) {
        CLI::App* sub = app.add_subcommand(kernelstream::experiment_name(kind));
        sub->add_option("--config", config_path, "JSON config document");
        sub->add_option("--seed", [&seed](const CLI::results_t& res) {
            seed = std::stoull(res.at(0));
            return true;
        }, "override base_seed");
        sub->add_option("--out", [&out](const CLI::results_t& res) {
            out = res.at(0);
            return true;
        }, "override output_path");
        sub->add_option("--workers", [&workers](const CLI::results_t& res) {
            workers = std::stoul(res.at(0));
            return true;
        }, "override worker count");
        subs.emplace_back(sub, kind);
    }

    CLI11_PARSE(app, argc, argv);

    kernelstream::ExperimentKind kind = kernelstream::ExperimentKind::Envelope;
    for (const auto& [sub, k] : subs) {
        if (sub->parsed()) {
            kind = k;
        }
    }

    kernelstream::ExperimentConfig config;
    try {
        if (config_path.empty()) {
            config = kernelstream::default_config(kind);
            if (seed) config.base_seed = *seed;
            if (out) config.output_path = *out;
            if (workers) config.workers = *workers;
            config.validate();
        } else {
            const auto text = read_file(config_path);
            if (!text) {
                std::cerr << "error: cannot read config file " << config_path << "\n";
                return 1;
            }
            config = kernelstream::parse_config_json(*text, kind, seed, out, workers);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const kernelstream::RunResult result = kernelstream::run_experiment(config);
    if (result.exit_code == 0) {
        std::cout << result.message << "\n";
    } else {
        std::cerr << "error: " << result.message << "\n";
    }
    return result.exit_code;
}
