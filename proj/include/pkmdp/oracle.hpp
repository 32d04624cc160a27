#pragma once

#include "pkmdp/matrix.hpp"
#include "pkmdp/model.hpp"
#include "pkmdp/policy.hpp"

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

// Exponential-time reference computations for validating the dynamic
// programs on tiny models. Nothing here shares code with severed_dp.

namespace pkmdp::oracle {

class EnumerationLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kMaxEnumeration = 1e6;

struct TinyInstance {
    KnownModel model;
    Policy policy;
    std::vector<std::size_t> y_seq;
    std::vector<std::size_t> z_seq;

    std::size_t horizon() const { return y_seq.size(); }
};

struct TinyInstanceOptions {
    std::size_t max_space = 3;
    std::size_t max_horizon = 4;
    /// Probability that a table entry is forced to zero before normalizing
    /// (never zeroes a whole row).
    double sparsity = 0.0;
    bool zero_reward = false;
};

/// Random model, policy and (Y, Z) with positive probability under the model.
TinyInstance random_tiny_instance(std::mt19937_64& rng, const TinyInstanceOptions& options = {});

/// Random model with every table drawn from the given shape.
KnownModel random_known_model(std::mt19937_64& rng, std::size_t nx, std::size_t ny, std::size_t nz,
                              std::size_t no, std::size_t na, double sparsity = 0.0);
Policy random_policy(std::mt19937_64& rng, std::size_t no, std::size_t na, double scale = 1.0);

struct KV {
    double K = 0.0;
    double V = 0.0;
};

/// Sums the severed-model path probability (and path reward) over every
/// (X, O, A) sequence. `action_probs` is |O| x |A| and may hold arbitrary
/// nonnegative values, which is what finite differences on raw p(a|o) need.
KV brute_force_KV(const KnownModel& model, const Matrix& action_probs, std::span<const std::size_t> y_seq,
                  std::span<const std::size_t> z_seq);
KV brute_force_KV(const TinyInstance& instance);

/// Sum over every Z sequence of the brute-force K; equals 1.
double brute_force_Z_normalization(const KnownModel& model, const Matrix& action_probs,
                                   std::span<const std::size_t> y_seq);

/// Unscaled alpha_t / beta_t from dense transition matrices built in place.
struct UnscaledForwardBackward {
    Matrix alpha;
    Matrix beta;
};
UnscaledForwardBackward unscaled_forward_backward(const KnownModel& model, const Matrix& action_probs,
                                                  std::span<const std::size_t> y_seq,
                                                  std::span<const std::size_t> z_seq);

/// dV/dp(a|o) from explicit tangent recursions for d alpha_t and d beta_t,
/// one parameter at a time, in unscaled arithmetic.
Matrix tangent_grad_V(const KnownModel& model, const Matrix& action_probs, std::span<const std::size_t> y_seq,
                      std::span<const std::size_t> z_seq);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& fn,
                                      std::span<const double> point, double step);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace pkmdp::oracle
