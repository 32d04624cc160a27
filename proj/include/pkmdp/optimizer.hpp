#pragma once

#include "pkmdp/estimator.hpp"
#include "pkmdp/policy.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace pkmdp {

enum class DirectionRule { PolakRibierePlus, FletcherReeves, SteepestAscent };

DirectionRule parse_direction_rule(const std::string& name);
std::string to_string(DirectionRule rule);

struct LineSearchConfig {
    double initial_step = 1.0;
    double contraction = 0.5;
    double sufficient_increase = 1e-4;
    int max_contractions = 40;
    /// When the initial step is accepted, the step keeps growing by
    /// 1 / contraction while the estimate improves, at most this many times.
    int max_expansions = 0;
};

struct OptimizerConfig {
    int max_iterations = 100;
    LineSearchConfig line_search;
    /// Iterations between forced steepest-ascent restarts; 0 means the
    /// number of policy parameters.
    int restart_period = 0;
    double convergence_tol = 1e-6;
    DirectionRule direction_rule = DirectionRule::PolakRibierePlus;

    /// Throws std::invalid_argument when a setting is out of range.
    void validate() const;
};

enum class StopReason { ZeroGradient, Converged, LineSearchFailed, MaxIterations };

std::string to_string(StopReason reason);

struct OptimizeResult {
    Policy policy;
    std::vector<double> trace;  ///< estimate after each accepted step, starting with the initial policy
    int iterations = 0;
    StopReason stop_reason = StopReason::MaxIterations;
};

/// Nonlinear conjugate-gradient ascent of the return estimate over the logits.
OptimizeResult optimize_policy(const ExperienceBuffer& buffer, const Policy& init, const OptimizerConfig& config);

/// Uniform policy for an empty buffer, otherwise optimize_policy warm-started
/// from `last_policy`.
Policy greedy_learning_step(const ExperienceBuffer& buffer, const Policy& last_policy, const OptimizerConfig& config);

}  // namespace pkmdp
