#include "pkmdp/policy.hpp"
#include "pkmdp/episode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pkmdp {

namespace {

Matrix softmax(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t o = 0; o < logits.rows(); ++o) {
        const auto in = logits.row(o);
        for (double v : in)
            if (!std::isfinite(v)) throw std::invalid_argument("policy logits must be finite");
        const double hi = *std::max_element(in.begin(), in.end());
        auto out = probs.row(o);
        double sum = 0.0;
        for (std::size_t a = 0; a < in.size(); ++a) sum += (out[a] = std::exp(in[a] - hi));
        for (auto& p : out) p /= sum;
    }
    return probs;
}

double floor_scale(std::size_t num_actions) { return 1.0 - static_cast<double>(num_actions) * kActionProbFloor; }

}  // namespace

Matrix policy_action_probs(const Matrix& logits) {
    Matrix probs = softmax(logits);
    const double scale = floor_scale(logits.cols());
    for (auto& p : probs.data()) p = scale * p + kActionProbFloor;
    return probs;
}

Policy::Policy(Matrix logits) : logits_(std::move(logits)) {
    if (logits_.rows() == 0 || logits_.cols() == 0) throw std::invalid_argument("policy needs observations and actions");
    probs_ = policy_action_probs(logits_);
}

Policy Policy::uniform(std::size_t num_observations, std::size_t num_actions) {
    return Policy(Matrix(num_observations, num_actions, 0.0));
}

Matrix policy_logit_chain_rule(const Policy& policy, const Matrix& grad_wrt_probs) {
    const Matrix p = softmax(policy.logits());
    const double scale = floor_scale(p.cols());
    if (!p.same_shape(grad_wrt_probs)) throw std::invalid_argument("gradient shape does not match policy");
    Matrix out(p.rows(), p.cols());
    for (std::size_t o = 0; o < p.rows(); ++o) {
        double mean = 0.0;
        for (std::size_t a = 0; a < p.cols(); ++a) mean += p(o, a) * grad_wrt_probs(o, a);
        for (std::size_t a = 0; a < p.cols(); ++a) out(o, a) = scale * p(o, a) * (grad_wrt_probs(o, a) - mean);
    }
    return out;
}

double Episode::known_return_from_trace() const {
    double sum = 0.0;
    if (debug_trace)
        for (const auto& step : *debug_trace) sum += step.r_x;
    return sum;
}

}  // namespace pkmdp
