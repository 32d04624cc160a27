#include "pkmdp/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pkmdp {

ExperienceBuffer::ExperienceBuffer(std::shared_ptr<const KnownModel> model)
    : compiled_(std::make_shared<const CompiledModel>(std::move(model))) {}

void ExperienceBuffer::add_episode(Episode episode, const Policy& sampling_policy) {
    if (episode.y_seq.empty() || episode.y_seq.size() != episode.z_seq.size())
        throw std::invalid_argument("episode needs equal-length, non-empty Y and Z sequences");
    if (!std::isfinite(episode.unknown_return)) throw std::invalid_argument("episode return is not finite");

    const std::size_t n = episodes_.size();
    auto severed = std::make_unique<SeveredModel>(*compiled_, sampling_policy);

    // Row n: the new episode under every policy; column n: every old episode
    // under the new policy.
    std::vector<double> new_row(n + 1), new_col(n);
    for (std::size_t j = 0; j < n; ++j)
        new_row[j] = evaluate_sequence(*severed_[j], episode.y_seq, episode.z_seq).log_K;
    new_row[n] = evaluate_sequence(*severed, episode.y_seq, episode.z_seq).log_K;
    for (std::size_t i = 0; i < n; ++i)
        new_col[i] = evaluate_sequence(*severed, episodes_[i].y_seq, episodes_[i].z_seq).log_K;

    Matrix grown(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(log_k_.row(i).begin(), log_k_.row(i).end(), grown.row(i).begin());
        grown(i, n) = new_col[i];
    }
    std::copy(new_row.begin(), new_row.end(), grown.row(n).begin());

    for (std::size_t i = 0; i < n; ++i) {
        const double pair[2] = {log_denominators_[i], new_col[i]};
        log_denominators_[i] = log_sum_exp(pair);
    }
    log_denominators_.push_back(log_sum_exp(new_row));

    log_k_ = std::move(grown);
    episode.policy_index = n;
    episodes_.push_back(std::move(episode));
    policies_.push_back(sampling_policy);
    severed_.push_back(std::move(severed));
    dp_evaluations_ += 2 * n + 1;
}

std::vector<double> ExperienceBuffer::recompute_log_denominators() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = log_sum_exp(log_k_.row(i));
    return out;
}

namespace {

void require_data(const ExperienceBuffer& buffer) {
    if (buffer.empty()) throw std::invalid_argument("cannot estimate from an empty experience buffer");
}

/// Normalized weights from log K(Y^i, Z^i, pi) - log denominator_i.
std::vector<double> normalized_weights(const ExperienceBuffer& buffer, const std::vector<double>& log_k) {
    const auto& denominators = buffer.log_denominators();
    std::vector<double> w(log_k.size());
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.size(); ++i) hi = std::max(hi, w[i] = log_k[i] - denominators[i]);
    if (!(hi >= std::log(kMinImportanceWeight)))
        throw NegligibleOverlapError("candidate policy has negligible overlap with every sampling policy");
    double sum = 0.0;
    for (auto& v : w) sum += (v = std::exp(v - hi));
    for (auto& v : w) v /= sum;
    return w;
}

}  // namespace

ReturnEstimate estimate_return_detail(const ExperienceBuffer& buffer, const Policy& policy) {
    require_data(buffer);
    const SeveredModel severed(buffer.compiled(), policy);
    const auto& episodes = buffer.episodes();
    std::vector<double> log_k(episodes.size());
    ReturnEstimate est;
    est.episode_returns.resize(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto v = evaluate_sequence(severed, episodes[i].y_seq, episodes[i].z_seq);
        log_k[i] = v.log_K;
        est.episode_returns[i] = episodes[i].unknown_return + v.v_ratio;
    }
    est.weights = normalized_weights(buffer, log_k);
    for (std::size_t i = 0; i < episodes.size(); ++i) est.value += est.weights[i] * est.episode_returns[i];
    return est;
}

double estimate_return(const ExperienceBuffer& buffer, const Policy& policy) {
    return estimate_return_detail(buffer, policy).value;
}

GradientEstimate estimate_gradient(const ExperienceBuffer& buffer, const Policy& policy) {
    require_data(buffer);
    const SeveredModel severed(buffer.compiled(), policy);
    const auto& episodes = buffer.episodes();
    std::vector<SequenceGradient> per_episode;
    per_episode.reserve(episodes.size());
    std::vector<double> log_k(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        per_episode.push_back(sequence_gradient(severed, episodes[i].y_seq, episodes[i].z_seq));
        log_k[i] = per_episode.back().log_K;
    }
    const auto w = normalized_weights(buffer, log_k);

    GradientEstimate est;
    for (std::size_t i = 0; i < episodes.size(); ++i)
        est.value += w[i] * (episodes[i].unknown_return + per_episode[i].v_ratio);

    // sum_i wbar_i [(R_s^i - R) dlogK_i + dV_i / K_i]
    const KnownModel& m = buffer.model();
    est.grad_probs = Matrix(m.no(), m.na());
    auto& g = est.grad_probs.data();
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const double coeff = w[i] * (episodes[i].unknown_return - est.value);
        const auto& dk = per_episode[i].grad_log_K.data();
        const auto& dv = per_episode[i].grad_V_over_K.data();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += coeff * dk[k] + w[i] * dv[k];
    }
    est.grad_logits = policy_logit_chain_rule(policy, est.grad_probs);
    return est;
}

double effective_sample_size(const ExperienceBuffer& buffer, const Policy& policy) {
    const auto w = estimate_return_detail(buffer, policy).weights;
    double s = 0.0, s2 = 0.0;
    for (double v : w) {
        s += v;
        s2 += v * v;
    }
    return s * s / s2;
}

}  // namespace pkmdp
