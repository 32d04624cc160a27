#pragma once

#include "pkmdp/environments.hpp"
#include "pkmdp/matrix.hpp"
#include "pkmdp/optimizer.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pkmdp {

struct ExperimentConfig {
    EnvironmentName env = EnvironmentName::LoadUnload;
    /// Empty means all three variants.
    std::optional<int> variant = 3;
    std::size_t runs = 10;
    /// Unset means the environment default (80 load-unload, 50 clogged pipe).
    std::optional<std::size_t> episodes;
    std::size_t horizon = 100;
    std::uint64_t base_seed = 0;
    OptimizerConfig optimizer;
    std::filesystem::path output_path = "curve.csv";
    /// Worker threads for independent runs; 0 picks the hardware concurrency.
    std::size_t threads = 0;

    std::size_t episode_count() const;
    void validate() const;
};

std::size_t default_episode_count(EnvironmentName env);

/// Applies `key=value` settings; unknown keys throw std::invalid_argument.
///
/// Keys: env, variant (1|2|3|all), runs, episodes, horizon, seed, out,
/// threads, max_iterations, initial_step, contraction, sufficient_increase,
/// max_contractions, max_expansions, restart_period, convergence_tol, direction_rule.
void apply_config_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
/// Reads `key = value` lines; blank lines and `#` comments are ignored.
void load_config_file(ExperimentConfig& config, std::istream& in);

struct LearningCurve {
    /// (run, episode) exact returns.
    Matrix returns;

    std::size_t runs() const { return returns.rows(); }
    std::size_t episodes() const { return returns.cols(); }
    double mean(std::size_t episode) const;
    /// Population standard deviation across runs.
    double std_dev(std::size_t episode) const;
    /// Mean over runs and over the last `count` episodes.
    double final_mean(std::size_t count) const;
};

/// Thrown when a module fails inside a run; names the run and episode.
class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

LearningCurve run_experiment(const ExperimentConfig& config, const EnvironmentSpec& spec);

/// One learning run; the seed fixes every random draw.
std::vector<double> run_learning(const EnvironmentSpec& spec, std::size_t episodes, std::size_t horizon,
                                 std::uint64_t seed, const OptimizerConfig& optimizer);

void write_csv(std::ostream& out, const LearningCurve& curve);
void emit_csv(const LearningCurve& curve, const std::filesystem::path& path);

/// Output path for one variant when several are written, e.g.
/// curve.csv -> curve_variant2.csv.
std::filesystem::path variant_output_path(const std::filesystem::path& base, int variant);

struct VerifyOptions {
    /// Multiplies every check's tolerance.
    double tolerance_scale = 1.0;
    std::uint64_t seed = 12345;
    /// Corrupts one table of this load-unload variant before the
    /// equivalence check (fault injection).
    std::optional<int> corrupt_variant;
};

struct VerifyCheck {
    std::string name;
    bool passed = false;
    double worst_error = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

std::vector<VerifyCheck> run_verification(const VerifyOptions& options);

}  // namespace pkmdp
