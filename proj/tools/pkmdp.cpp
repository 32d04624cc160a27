#include "pkmdp/environments.hpp"
#include "pkmdp/harness.hpp"
#include "pkmdp/model_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

struct RunArgs {
    std::string config_path;
    // Setting key -> flag value; only flags given on the command line are applied.
    std::map<std::string, std::string> values;
};

void add_setting(CLI::App* cmd, RunArgs& args, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    for (auto& c : flag)
        if (c == '_') c = '-';
    cmd->add_option(flag, args.values[key], help);
}

int do_run(const RunArgs& args, CLI::App* cmd) {
    pkmdp::ExperimentConfig config;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw std::runtime_error("cannot read config file " + args.config_path);
        pkmdp::load_config_file(config, in);
    }
    for (const auto& [key, value] : args.values) {
        std::string flag = "--" + key;
        for (auto& c : flag)
            if (c == '_') c = '-';
        if (cmd->count(flag) > 0) pkmdp::apply_config_setting(config, key, value);
    }
    config.validate();

    std::vector<int> variants;
    if (config.variant)
        variants.push_back(*config.variant);
    else
        variants = {1, 2, 3};
    for (int v : variants) {
        const auto spec = pkmdp::make_environment(config.env, v);
        const auto curve = pkmdp::run_experiment(config, spec);
        const auto path =
            variants.size() == 1 ? config.output_path : pkmdp::variant_output_path(config.output_path, v);
        pkmdp::emit_csv(curve, path);
        std::fprintf(stderr, "%s variant %d: final-10 mean return %.4f -> %s\n", pkmdp::to_string(config.env).c_str(),
                     v, curve.final_mean(10), path.string().c_str());
    }
    return 0;
}

int do_verify(const pkmdp::VerifyOptions& options) {
    bool ok = true;
    for (const auto& check : pkmdp::run_verification(options)) {
        std::printf("%s  %s  worst %.3e  tol %.1e\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                    check.worst_error, check.tolerance);
        if (!check.detail.empty()) std::printf("      %s\n", check.detail.c_str());
        ok = ok && check.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partially known MDP experiments"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run repeated learning experiments and write a CSV learning curve");
    run->add_option("--config", run_args.config_path, "key = value config file; flags override it")
        ->check(CLI::ExistingFile);
    add_setting(run, run_args, "env", "load_unload or clogged_pipe");
    add_setting(run, run_args, "variant", "1, 2, 3 or all");
    add_setting(run, run_args, "runs", "independent runs (default 10)");
    add_setting(run, run_args, "episodes", "episodes per run (default 80 load_unload, 50 clogged_pipe)");
    add_setting(run, run_args, "horizon", "time steps per episode (default 100)");
    add_setting(run, run_args, "seed", "base seed; run r uses seed + r");
    add_setting(run, run_args, "out", "output CSV path (default curve.csv)");
    add_setting(run, run_args, "threads", "worker threads (0 = hardware concurrency)");
    add_setting(run, run_args, "max_iterations", "optimizer iterations per episode");
    add_setting(run, run_args, "initial_step", "line search initial step");
    add_setting(run, run_args, "contraction", "line search step contraction factor");
    add_setting(run, run_args, "sufficient_increase", "line search sufficient increase constant");
    add_setting(run, run_args, "max_contractions", "line search contraction limit");
    add_setting(run, run_args, "max_expansions", "line search step expansion limit");
    add_setting(run, run_args, "restart_period", "conjugate direction restart period (0 = parameter count)");
    add_setting(run, run_args, "convergence_tol", "relative improvement below which optimization stops");
    add_setting(run, run_args, "direction_rule", "pr-plus, fletcher-reeves or steepest");

    pkmdp::VerifyOptions verify_options;
    int corrupt_variant = 0;
    auto* verify = app.add_subcommand("verify", "Check the dynamic programs against the reference oracles");
    verify->add_option("--tolerance", verify_options.tolerance_scale, "multiplier applied to every tolerance")
        ->check(CLI::PositiveNumber);
    verify->add_option("--seed", verify_options.seed, "seed for the random instances");
    verify->add_option("--corrupt-variant", corrupt_variant, "perturb this load_unload variant's state dynamics")
        ->check(CLI::Range(1, 3));

    std::string export_env, export_out;
    int export_variant = 3;
    auto* export_model = app.add_subcommand("export-model", "Write an environment model in the text format");
    export_model->add_option("--env", export_env, "load_unload or clogged_pipe")->required();
    export_model->add_option("--variant", export_variant, "1, 2 or 3")->check(CLI::Range(1, 3));
    export_model->add_option("--out", export_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return do_run(run_args, run);
        if (*verify) {
            if (corrupt_variant) verify_options.corrupt_variant = corrupt_variant;
            return do_verify(verify_options);
        }
        if (*export_model) {
            const auto spec = pkmdp::make_environment(pkmdp::parse_environment_name(export_env), export_variant);
            if (export_out.empty()) {
                pkmdp::write_full_model(std::cout, *spec.model);
            } else {
                std::ofstream out(export_out);
                if (!out) throw std::runtime_error("cannot open " + export_out + " for writing");
                pkmdp::write_full_model(out, *spec.model);
            }
            return 0;
        }
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 1;
}
