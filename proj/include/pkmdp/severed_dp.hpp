#pragma once

#include "pkmdp/matrix.hpp"
#include "pkmdp/model.hpp"
#include "pkmdp/policy.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace pkmdp {

/// The interface sequences have zero probability under the known model.
class ImpossibleSequenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SparseEntry {
    std::size_t index;
    double value;
};

/// Policy-independent sparse view of a KnownModel's tables.
class CompiledModel {
public:
    explicit CompiledModel(std::shared_ptr<const KnownModel> model);

    const KnownModel& model() const { return *model_; }
    const std::shared_ptr<const KnownModel>& model_ptr() const { return model_; }

    /// Nonzero entries of p_x(. | x, y', a).
    std::span<const SparseEntry> px_row(std::size_t x, std::size_t y_next, std::size_t a) const {
        const std::size_t r = (x * model_->ny() + y_next) * model_->na() + a;
        return {px_entries_.data() + px_offsets_[r], px_offsets_[r + 1] - px_offsets_[r]};
    }
    /// Nonzero entries of p_o(. | x).
    std::span<const SparseEntry> po_row(std::size_t x) const {
        return {po_entries_.data() + po_offsets_[x], po_offsets_[x + 1] - po_offsets_[x]};
    }

private:
    std::shared_ptr<const KnownModel> model_;
    std::vector<std::size_t> px_offsets_;
    std::vector<SparseEntry> px_entries_;
    std::vector<std::size_t> po_offsets_;
    std::vector<SparseEntry> po_entries_;
};

/**
 * Severed model bound to one policy. Caches the marginal action weights
 * w(x,a) = sum_o p_o(o|x) p(a|o), the per-slice emission factor
 * e(x,z) = sum_a w(x,a) p_z(z|x,a) and a sparse transition matrix T(y,z) for
 * every interface pair. Keeps a reference to `compiled`, which must outlive
 * it. Immutable after construction; safe to share between threads.
 */
class SeveredModel {
public:
    SeveredModel(const CompiledModel& compiled, const Policy& policy);
    /// Binds raw action probabilities (|O| x |A|, nonnegative, rows need not
    /// sum to one), as used when differentiating with respect to p(a|o).
    SeveredModel(const CompiledModel& compiled, Matrix action_probs);

    const CompiledModel& compiled() const { return *compiled_; }
    const KnownModel& model() const { return compiled_->model(); }
    const Matrix& action_probs() const { return probs_; }

    double action_weight(std::size_t x, std::size_t a) const { return weights_[x * na_ + a]; }
    double emission(std::size_t x, std::size_t z) const { return emission_[x * nz_ + z]; }

    /// Row x of T(y,z): nonzero (x', T[x][x']) pairs.
    std::span<const SparseEntry> transition_row(std::size_t y, std::size_t z, std::size_t x) const {
        const std::size_t r = (y * nz_ + z) * nx_ + x;
        return {t_entries_.data() + t_offsets_[r], t_offsets_[r + 1] - t_offsets_[r]};
    }

private:
    const CompiledModel* compiled_;
    Matrix probs_;
    std::size_t nx_, nz_, na_;
    std::vector<double> weights_;
    std::vector<double> emission_;
    std::vector<std::size_t> t_offsets_;
    std::vector<SparseEntry> t_entries_;
};

/// T[x][x'] = sum_{o,a} p_o(o|x) p(a|o) p_z(z|x,a) p_x(x'|x,y,a), dense.
Matrix transition_matrix(const KnownModel& model, const Policy& policy, std::size_t y, std::size_t z);

/**
 * Scaled forward-backward quantities for one interface sequence.
 *
 * alpha_hat[t] is p(x_t | z_{0:t-1}, Y) and scale_log[t] = log p(z_t | z_{0:t-1}, Y),
 * so log_K is their sum. beta_hat carries the same scale factors, which makes
 * sum_x alpha_hat[t][x] * beta_hat[t][x] = 1 for every t and the product the
 * posterior of x_t given (Y, Z).
 */
struct ForwardBackwardResult {
    Matrix alpha_hat;
    std::vector<double> scale_log;
    Matrix beta_hat;
    double log_K = 0.0;
    double v_ratio = 0.0;

    double posterior(std::size_t t, std::size_t x) const { return alpha_hat(t, x) * beta_hat(t, x); }
};

/// log K and V/K without the backward pass.
struct SequenceValue {
    double log_K = 0.0;
    double v_ratio = 0.0;
};

/// Values plus derivatives with respect to the raw entries p(a|o), each
/// treated as a free parameter. Gradients are returned divided by K.
struct SequenceGradient {
    double log_K = 0.0;
    double v_ratio = 0.0;
    Matrix grad_log_K;     ///< (dK/dp) / K, shape |O| x |A|
    Matrix grad_V_over_K;  ///< (dV/dp) / K, shape |O| x |A|
};

SequenceValue evaluate_sequence(const SeveredModel& severed, std::span<const std::size_t> y_seq,
                                std::span<const std::size_t> z_seq);
ForwardBackwardResult forward_backward(const SeveredModel& severed, std::span<const std::size_t> y_seq,
                                       std::span<const std::size_t> z_seq);
SequenceGradient sequence_gradient(const SeveredModel& severed, std::span<const std::size_t> y_seq,
                                   std::span<const std::size_t> z_seq);

// Convenience forms that compile the model and bind the policy per call.
ForwardBackwardResult forward_backward(const KnownModel& model, const Policy& policy,
                                       std::span<const std::size_t> y_seq, std::span<const std::size_t> z_seq);
Matrix grad_log_K(const KnownModel& model, const Policy& policy, std::span<const std::size_t> y_seq,
                  std::span<const std::size_t> z_seq);
/// Returns (dV/dp)/K; v_ratio is written to *v_ratio when non-null.
Matrix grad_V(const KnownModel& model, const Policy& policy, std::span<const std::size_t> y_seq,
              std::span<const std::size_t> z_seq, double* v_ratio = nullptr);

}  // namespace pkmdp
