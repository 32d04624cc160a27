#pragma once

#include "pkmdp/episode.hpp"
#include "pkmdp/matrix.hpp"
#include "pkmdp/policy.hpp"
#include "pkmdp/severed_dp.hpp"

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

namespace pkmdp {

/// Every importance weight of a candidate policy underflowed.
class NegligibleOverlapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weights below this (relative to the sampling mixture) count as zero.
inline constexpr double kMinImportanceWeight = 1e-300;

/**
 * All episodes seen so far with their sampling policies, plus the cached
 * log K(Y^i, Z^i, pi^j) matrix and the per-episode log mixture denominators
 * log sum_j K(Y^i, Z^i, pi^j). Adding episode n+1 costs 2n+1 sequence
 * evaluations; estimates then cost one evaluation per episode.
 */
class ExperienceBuffer {
public:
    explicit ExperienceBuffer(std::shared_ptr<const KnownModel> model);

    const KnownModel& model() const { return compiled_->model(); }
    const CompiledModel& compiled() const { return *compiled_; }

    std::size_t size() const { return episodes_.size(); }
    bool empty() const { return episodes_.empty(); }

    const std::vector<Episode>& episodes() const { return episodes_; }
    const std::vector<Policy>& policies() const { return policies_; }
    const Matrix& log_k_matrix() const { return log_k_; }
    const std::vector<double>& log_denominators() const { return log_denominators_; }

    /// Appends the episode sampled under `sampling_policy`. Throws
    /// std::invalid_argument on malformed sequences and
    /// ImpossibleSequenceError when the sequences have zero probability.
    void add_episode(Episode episode, const Policy& sampling_policy);

    /// Denominators recomputed from the log K matrix.
    std::vector<double> recompute_log_denominators() const;

    /// Number of sequence evaluations performed by add_episode so far.
    std::size_t dp_evaluations() const { return dp_evaluations_; }

private:
    std::shared_ptr<const CompiledModel> compiled_;
    std::vector<Episode> episodes_;
    std::vector<Policy> policies_;
    std::vector<std::unique_ptr<SeveredModel>> severed_;
    Matrix log_k_;
    std::vector<double> log_denominators_;
    std::size_t dp_evaluations_ = 0;
};

struct ReturnEstimate {
    double value = 0.0;
    /// Normalized importance weights, one per episode, summing to 1.
    std::vector<double> weights;
    /// R_s(S^i) + V^i/K^i for each episode.
    std::vector<double> episode_returns;
};

struct GradientEstimate {
    double value = 0.0;
    Matrix grad_probs;   ///< with respect to p(a|o)
    Matrix grad_logits;  ///< chained through the softmax
};

/// Weighted importance-sampling estimate of the expected return of `policy`.
ReturnEstimate estimate_return_detail(const ExperienceBuffer& buffer, const Policy& policy);
double estimate_return(const ExperienceBuffer& buffer, const Policy& policy);
GradientEstimate estimate_gradient(const ExperienceBuffer& buffer, const Policy& policy);
/// (sum w)^2 / sum w^2 of the importance weights; lies in [1, n].
double effective_sample_size(const ExperienceBuffer& buffer, const Policy& policy);

}  // namespace pkmdp
