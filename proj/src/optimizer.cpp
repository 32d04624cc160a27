#include "pkmdp/optimizer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pkmdp {

DirectionRule parse_direction_rule(const std::string& name) {
    if (name == "pr-plus" || name == "polak-ribiere-plus") return DirectionRule::PolakRibierePlus;
    if (name == "fletcher-reeves") return DirectionRule::FletcherReeves;
    if (name == "steepest") return DirectionRule::SteepestAscent;
    throw std::invalid_argument("unknown direction rule '" + name + "' (pr-plus, fletcher-reeves, steepest)");
}

std::string to_string(DirectionRule rule) {
    switch (rule) {
        case DirectionRule::PolakRibierePlus: return "pr-plus";
        case DirectionRule::FletcherReeves: return "fletcher-reeves";
        case DirectionRule::SteepestAscent: return "steepest";
    }
    return "?";
}

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::ZeroGradient: return "zero-gradient";
        case StopReason::Converged: return "converged";
        case StopReason::LineSearchFailed: return "line-search-failed";
        case StopReason::MaxIterations: return "max-iterations";
    }
    return "?";
}

void OptimizerConfig::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (!(line_search.initial_step > 0.0)) throw std::invalid_argument("initial step must be positive");
    if (!(line_search.contraction > 0.0 && line_search.contraction < 1.0))
        throw std::invalid_argument("contraction factor must lie in (0, 1)");
    if (!(line_search.sufficient_increase > 0.0 && line_search.sufficient_increase < 1.0))
        throw std::invalid_argument("sufficient-increase coefficient must lie in (0, 1)");
    if (line_search.max_contractions < 0) throw std::invalid_argument("max_contractions must be nonnegative");
    if (line_search.max_expansions < 0) throw std::invalid_argument("max_expansions must be nonnegative");
    if (restart_period < 0) throw std::invalid_argument("restart_period must be nonnegative");
    if (!(convergence_tol >= 0.0)) throw std::invalid_argument("convergence_tol must be nonnegative");
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

Policy policy_at(const Matrix& shape, const Vec& params) {
    Matrix logits(shape.rows(), shape.cols());
    logits.data() = params;
    return Policy(std::move(logits));
}

}  // namespace

OptimizeResult optimize_policy(const ExperienceBuffer& buffer, const Policy& init, const OptimizerConfig& config) {
    config.validate();
    const Matrix& shape = init.logits();
    const int restart_period = config.restart_period > 0 ? config.restart_period : static_cast<int>(shape.size());

    Vec params = shape.data();
    GradientEstimate current = estimate_gradient(buffer, init);
    Vec grad = current.grad_logits.data();
    double value = current.value;

    OptimizeResult result{init, {value}, 0, StopReason::MaxIterations};
    if (dot(grad, grad) == 0.0) {
        result.stop_reason = StopReason::ZeroGradient;
        return result;
    }

    Vec direction = grad;
    int since_restart = 0;
    Vec trial(params.size());
    while (result.iterations < config.max_iterations) {
        double slope = dot(grad, direction);
        if (!(slope > 0.0)) {
            direction = grad;
            slope = dot(grad, grad);
            since_restart = 0;
        }

        double step = config.line_search.initial_step;
        bool accepted = false;
        double trial_value = value;
        for (int k = 0; k <= config.line_search.max_contractions; ++k, step *= config.line_search.contraction) {
            for (std::size_t i = 0; i < params.size(); ++i) trial[i] = params[i] + step * direction[i];
            try {
                trial_value = estimate_return(buffer, policy_at(shape, trial));
            } catch (const NegligibleOverlapError&) {
                continue;
            }
            if (trial_value >= value + config.line_search.sufficient_increase * step * slope && trial_value > value) {
                accepted = true;
                break;
            }
        }
        if (accepted && step == config.line_search.initial_step) {
            Vec wider(params.size());
            for (int k = 0; k < config.line_search.max_expansions; ++k) {
                const double next_step = step / config.line_search.contraction;
                for (std::size_t i = 0; i < params.size(); ++i) wider[i] = params[i] + next_step * direction[i];
                double wider_value;
                try {
                    wider_value = estimate_return(buffer, policy_at(shape, wider));
                } catch (const NegligibleOverlapError&) {
                    break;
                }
                if (!(wider_value > trial_value)) break;
                step = next_step;
                trial_value = wider_value;
                trial.swap(wider);
            }
        }
        if (!accepted) {
            if (since_restart == 0) {
                result.stop_reason = StopReason::LineSearchFailed;
                break;
            }
            direction = grad;
            since_restart = 0;
            continue;
        }

        ++result.iterations;
        params = trial;
        const Policy next = policy_at(shape, params);
        GradientEstimate next_eval = estimate_gradient(buffer, next);
        const double improvement = trial_value - value;
        const double previous = value;
        value = trial_value;
        result.policy = next;
        result.trace.push_back(value);
        Vec next_grad = std::move(next_eval.grad_logits.data());

        if (improvement <= config.convergence_tol * std::max(std::abs(previous), 1e-12)) {
            result.stop_reason = StopReason::Converged;
            break;
        }
        const double gg = dot(grad, grad);
        const double next_gg = dot(next_grad, next_grad);
        if (next_gg == 0.0) {
            result.stop_reason = StopReason::ZeroGradient;
            break;
        }

        double beta = 0.0;
        ++since_restart;
        if (since_restart >= restart_period) {
            since_restart = 0;
        } else if (config.direction_rule == DirectionRule::PolakRibierePlus) {
            beta = std::max(0.0, (next_gg - dot(next_grad, grad)) / gg);
        } else if (config.direction_rule == DirectionRule::FletcherReeves) {
            beta = next_gg / gg;
        }
        if (beta == 0.0) since_restart = 0;
        for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = next_grad[i] + beta * direction[i];
        grad = std::move(next_grad);
    }
    return result;
}

Policy greedy_learning_step(const ExperienceBuffer& buffer, const Policy& last_policy, const OptimizerConfig& config) {
    if (buffer.empty()) return Policy::uniform(buffer.model().no(), buffer.model().na());
    return optimize_policy(buffer, last_policy, config).policy;
}

}  // namespace pkmdp
