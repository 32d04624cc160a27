#pragma once

#include "pkmdp/matrix.hpp"

#include <cstddef>

namespace pkmdp {

/// Every action keeps at least this probability: p = (1 - |A| eps) softmax + eps.
inline constexpr double kActionProbFloor = 1e-12;

/**
 * Reactive stochastic policy p(a | o) parameterized by one logit per
 * (observation, action) pair. Action probabilities are the row-wise softmax
 * of the logits mixed with a tiny uniform floor, so they stay strictly
 * inside (0, 1) even for extreme logits.
 */
class Policy {
public:
    Policy() = default;
    /// Throws std::invalid_argument if any logit is non-finite or the shape is empty.
    explicit Policy(Matrix logits);

    static Policy uniform(std::size_t num_observations, std::size_t num_actions);

    std::size_t num_observations() const { return logits_.rows(); }
    std::size_t num_actions() const { return logits_.cols(); }

    const Matrix& logits() const { return logits_; }
    const Matrix& action_probs() const { return probs_; }
    double prob(std::size_t o, std::size_t a) const { return probs_(o, a); }

    friend bool operator==(const Policy& a, const Policy& b) { return a.logits_ == b.logits_; }

private:
    Matrix logits_;
    Matrix probs_;
};

/// Row-wise max-shifted softmax of a logit matrix, with the probability floor.
Matrix policy_action_probs(const Matrix& logits);
inline const Matrix& policy_action_probs(const Policy& policy) { return policy.action_probs(); }

/// Pulls a gradient with respect to action probabilities back to the logits:
/// d/dlogit(o,a) = c q(a|o) * (g(o,a) - sum_a' q(a'|o) g(o,a')), where q is
/// the plain softmax and c = 1 - |A| eps.
Matrix policy_logit_chain_rule(const Policy& policy, const Matrix& grad_wrt_probs);

}  // namespace pkmdp
