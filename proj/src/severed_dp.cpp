#include "pkmdp/severed_dp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pkmdp {

namespace {

void build_sparse(const CondTable& table, std::vector<std::size_t>& offsets, std::vector<SparseEntry>& entries) {
    offsets.assign(table.num_rows() + 1, 0);
    entries.clear();
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        const auto row = table.row(r);
        for (std::size_t c = 0; c < row.size(); ++c)
            if (row[c] != 0.0) entries.push_back({c, row[c]});
        offsets[r + 1] = entries.size();
    }
}

void check_sequences(const KnownModel& m, std::span<const std::size_t> y_seq, std::span<const std::size_t> z_seq) {
    if (y_seq.empty()) throw std::invalid_argument("interface sequences must have at least one slice");
    if (y_seq.size() != z_seq.size()) throw std::invalid_argument("Y and Z sequences differ in length");
    for (std::size_t t = 0; t < y_seq.size(); ++t) {
        if (y_seq[t] >= m.ny()) throw std::invalid_argument("y out of range at slice " + std::to_string(t));
        if (z_seq[t] >= m.nz()) throw std::invalid_argument("z out of range at slice " + std::to_string(t));
    }
}

[[noreturn]] void impossible(std::size_t t) {
    throw ImpossibleSequenceError("interface sequence has zero probability under the known model at slice " +
                                  std::to_string(t));
}

/// Normalizer of slice t: sum_x alpha_hat(x) e(x, z_t). Zero means the
/// sequence is impossible.
double slice_scale(const SeveredModel& sm, std::span<const double> alpha, std::size_t z, std::size_t t) {
    double c = 0.0;
    for (std::size_t x = 0; x < alpha.size(); ++x) c += alpha[x] * sm.emission(x, z);
    if (!(c > 0.0) || !std::isfinite(c)) impossible(t);
    return c;
}

void advance(const SeveredModel& sm, std::size_t y_next, std::size_t z, double inv_c, std::span<const double> in,
             std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t x = 0; x < in.size(); ++x) {
        if (in[x] == 0.0) continue;
        const double v = in[x] * inv_c;
        for (const auto& e : sm.transition_row(y_next, z, x)) out[e.index] += v * e.value;
    }
}

/// Forward pass storing alpha_hat, rho_hat and scale factors.
struct ForwardPass {
    Matrix alpha;
    Matrix rho;  // reward-accumulated forward values, same scaling as alpha
    std::vector<double> scale;
    double log_K = 0.0;
    double v_ratio = 0.0;
};

ForwardPass run_forward(const SeveredModel& sm, std::span<const std::size_t> y_seq,
                        std::span<const std::size_t> z_seq) {
    const KnownModel& m = sm.model();
    const std::size_t H = y_seq.size(), nx = m.nx();
    ForwardPass f{Matrix(H, nx), Matrix(H, nx), std::vector<double>(H), 0.0, 0.0};
    for (std::size_t x = 0; x < nx; ++x) {
        f.alpha(0, x) = m.px0(x, y_seq[0]);
        f.rho(0, x) = m.r_x[x] * f.alpha(0, x);
    }
    for (std::size_t t = 0;; ++t) {
        const double c = slice_scale(sm, f.alpha.row(t), z_seq[t], t);
        f.scale[t] = c;
        f.log_K += std::log(c);
        if (t + 1 == H) {
            double v = 0.0;
            for (std::size_t x = 0; x < nx; ++x) v += f.rho(t, x) * sm.emission(x, z_seq[t]);
            f.v_ratio = v / c;
            break;
        }
        advance(sm, y_seq[t + 1], z_seq[t], 1.0 / c, f.alpha.row(t), f.alpha.row(t + 1));
        advance(sm, y_seq[t + 1], z_seq[t], 1.0 / c, f.rho.row(t), f.rho.row(t + 1));
        for (std::size_t x = 0; x < nx; ++x) f.rho(t + 1, x) += m.r_x[x] * f.alpha(t + 1, x);
    }
    return f;
}

/// Backward pass. Optionally accumulates the per-(x, a) gradient sums that
/// are later folded through p_o into per-(o, a) gradients.
struct BackwardPass {
    Matrix beta;
    Matrix grad_k_xa;
    Matrix grad_v_xa;
};

BackwardPass run_backward(const SeveredModel& sm, const ForwardPass& f, std::span<const std::size_t> y_seq,
                          std::span<const std::size_t> z_seq, bool with_gradient) {
    const KnownModel& m = sm.model();
    const CompiledModel& cm = sm.compiled();
    const std::size_t H = y_seq.size(), nx = m.nx(), na = m.na();
    BackwardPass b{Matrix(H, nx), Matrix(nx, na), Matrix(nx, na)};
    // eta_hat: reward accumulated strictly after slice t, scaled like beta.
    std::vector<double> eta_next(nx, 0.0), eta(nx, 0.0);
    std::vector<double> target(nx, 0.0);  // r_x(x') beta_hat(t+1, x') + eta_hat(t+1, x')
    for (std::size_t t = H; t-- > 0;) {
        const std::size_t z = z_seq[t];
        const double inv_c = 1.0 / f.scale[t];
        const bool last = t + 1 == H;
        if (!last)
            for (std::size_t x = 0; x < nx; ++x) target[x] = m.r_x[x] * b.beta(t + 1, x) + eta_next[x];
        for (std::size_t x = 0; x < nx; ++x) {
            double beta_x = 0.0, eta_x = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                const double pz = m.pz(z, x, a);
                if (pz == 0.0) continue;
                double next_beta = 1.0, next_reward = 0.0;
                if (!last) {
                    next_beta = 0.0;
                    for (const auto& e : cm.px_row(x, y_seq[t + 1], a)) {
                        next_beta += e.value * b.beta(t + 1, e.index);
                        next_reward += e.value * target[e.index];
                    }
                }
                const double w = sm.action_weight(x, a) * pz * inv_c;
                beta_x += w * next_beta;
                eta_x += w * next_reward;
                if (with_gradient) {
                    const double local = pz * inv_c;
                    b.grad_k_xa(x, a) += f.alpha(t, x) * local * next_beta;
                    b.grad_v_xa(x, a) += local * (f.rho(t, x) * next_beta + f.alpha(t, x) * next_reward);
                }
            }
            b.beta(t, x) = beta_x;
            eta[x] = eta_x;
        }
        std::swap(eta, eta_next);
    }
    return b;
}

Matrix fold_observations(const SeveredModel& sm, const Matrix& per_xa) {
    const KnownModel& m = sm.model();
    Matrix out(m.no(), m.na());
    for (std::size_t x = 0; x < m.nx(); ++x)
        for (const auto& e : sm.compiled().po_row(x))
            for (std::size_t a = 0; a < m.na(); ++a) out(e.index, a) += e.value * per_xa(x, a);
    return out;
}

}  // namespace

CompiledModel::CompiledModel(std::shared_ptr<const KnownModel> model) : model_(std::move(model)) {
    if (!model_) throw std::invalid_argument("null model");
    build_sparse(model_->p_x, px_offsets_, px_entries_);
    build_sparse(model_->p_o, po_offsets_, po_entries_);
}

SeveredModel::SeveredModel(const CompiledModel& compiled, const Policy& policy)
    : SeveredModel(compiled, policy.action_probs()) {}

SeveredModel::SeveredModel(const CompiledModel& compiled, Matrix action_probs)
    : compiled_(&compiled), probs_(std::move(action_probs)) {
    const KnownModel& m = compiled.model();
    nx_ = m.nx();
    nz_ = m.nz();
    na_ = m.na();
    if (probs_.rows() != m.no() || probs_.cols() != na_)
        throw std::invalid_argument("policy shape does not match the model's observation/action spaces");

    weights_.assign(nx_ * na_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
        for (const auto& e : compiled.po_row(x))
            for (std::size_t a = 0; a < na_; ++a) weights_[x * na_ + a] += e.value * probs_(e.index, a);

    emission_.assign(nx_ * nz_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t a = 0; a < na_; ++a)
            for (std::size_t z = 0; z < nz_; ++z) emission_[x * nz_ + z] += weights_[x * na_ + a] * m.pz(z, x, a);

    const std::size_t ny = m.ny();
    t_offsets_.assign(ny * nz_ * nx_ + 1, 0);
    std::vector<double> dense(nx_, 0.0);
    std::vector<char> touched(nx_, 0);
    std::vector<std::size_t> cols;
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t z = 0; z < nz_; ++z)
            for (std::size_t x = 0; x < nx_; ++x) {
                cols.clear();
                for (std::size_t a = 0; a < na_; ++a) {
                    const double wz = weights_[x * na_ + a] * m.pz(z, x, a);
                    if (wz == 0.0) continue;
                    for (const auto& e : compiled.px_row(x, y, a)) {
                        if (!touched[e.index]) {
                            touched[e.index] = 1;
                            cols.push_back(e.index);
                        }
                        dense[e.index] += wz * e.value;
                    }
                }
                std::sort(cols.begin(), cols.end());
                for (std::size_t c : cols) {
                    t_entries_.push_back({c, dense[c]});
                    dense[c] = 0.0;
                    touched[c] = 0;
                }
                t_offsets_[(y * nz_ + z) * nx_ + x + 1] = t_entries_.size();
            }
}

Matrix transition_matrix(const KnownModel& model, const Policy& policy, std::size_t y, std::size_t z) {
    if (y >= model.ny() || z >= model.nz()) throw std::invalid_argument("interface value out of range");
    if (policy.num_observations() != model.no() || policy.num_actions() != model.na())
        throw std::invalid_argument("policy shape does not match the model's observation/action spaces");
    Matrix t(model.nx(), model.nx());
    for (std::size_t x = 0; x < model.nx(); ++x)
        for (std::size_t o = 0; o < model.no(); ++o) {
            const double po = model.po(o, x);
            if (po == 0.0) continue;
            for (std::size_t a = 0; a < model.na(); ++a) {
                const double w = po * policy.prob(o, a) * model.pz(z, x, a);
                if (w == 0.0) continue;
                for (std::size_t xn = 0; xn < model.nx(); ++xn) t(x, xn) += w * model.px(xn, x, y, a);
            }
        }
    return t;
}

SequenceValue evaluate_sequence(const SeveredModel& severed, std::span<const std::size_t> y_seq,
                                std::span<const std::size_t> z_seq) {
    const KnownModel& m = severed.model();
    check_sequences(m, y_seq, z_seq);
    const std::size_t H = y_seq.size(), nx = m.nx();
    std::vector<double> alpha(nx), rho(nx), alpha_next(nx), rho_next(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        alpha[x] = m.px0(x, y_seq[0]);
        rho[x] = m.r_x[x] * alpha[x];
    }
    SequenceValue out;
    for (std::size_t t = 0;; ++t) {
        const double c = slice_scale(severed, alpha, z_seq[t], t);
        out.log_K += std::log(c);
        if (t + 1 == H) {
            double v = 0.0;
            for (std::size_t x = 0; x < nx; ++x) v += rho[x] * severed.emission(x, z_seq[t]);
            out.v_ratio = v / c;
            return out;
        }
        advance(severed, y_seq[t + 1], z_seq[t], 1.0 / c, alpha, alpha_next);
        advance(severed, y_seq[t + 1], z_seq[t], 1.0 / c, rho, rho_next);
        for (std::size_t x = 0; x < nx; ++x) rho_next[x] += m.r_x[x] * alpha_next[x];
        std::swap(alpha, alpha_next);
        std::swap(rho, rho_next);
    }
}

ForwardBackwardResult forward_backward(const SeveredModel& severed, std::span<const std::size_t> y_seq,
                                       std::span<const std::size_t> z_seq) {
    check_sequences(severed.model(), y_seq, z_seq);
    ForwardPass f = run_forward(severed, y_seq, z_seq);
    BackwardPass b = run_backward(severed, f, y_seq, z_seq, false);
    ForwardBackwardResult r;
    r.alpha_hat = std::move(f.alpha);
    r.beta_hat = std::move(b.beta);
    r.scale_log.reserve(f.scale.size());
    for (double c : f.scale) r.scale_log.push_back(std::log(c));
    r.log_K = f.log_K;
    r.v_ratio = f.v_ratio;
    return r;
}

SequenceGradient sequence_gradient(const SeveredModel& severed, std::span<const std::size_t> y_seq,
                                   std::span<const std::size_t> z_seq) {
    check_sequences(severed.model(), y_seq, z_seq);
    const ForwardPass f = run_forward(severed, y_seq, z_seq);
    const BackwardPass b = run_backward(severed, f, y_seq, z_seq, true);
    SequenceGradient g;
    g.log_K = f.log_K;
    g.v_ratio = f.v_ratio;
    g.grad_log_K = fold_observations(severed, b.grad_k_xa);
    g.grad_V_over_K = fold_observations(severed, b.grad_v_xa);
    return g;
}

namespace {

struct Bound {
    CompiledModel compiled;
    SeveredModel severed;
    Bound(const KnownModel& model, const Policy& policy)
        : compiled(std::make_shared<const KnownModel>(model)), severed(compiled, policy) {}
    Bound(const Bound&) = delete;
};

}  // namespace

ForwardBackwardResult forward_backward(const KnownModel& model, const Policy& policy,
                                       std::span<const std::size_t> y_seq, std::span<const std::size_t> z_seq) {
    const Bound bound(model, policy);
    return forward_backward(bound.severed, y_seq, z_seq);
}

Matrix grad_log_K(const KnownModel& model, const Policy& policy, std::span<const std::size_t> y_seq,
                  std::span<const std::size_t> z_seq) {
    const Bound bound(model, policy);
    return sequence_gradient(bound.severed, y_seq, z_seq).grad_log_K;
}

Matrix grad_V(const KnownModel& model, const Policy& policy, std::span<const std::size_t> y_seq,
              std::span<const std::size_t> z_seq, double* v_ratio) {
    const Bound bound(model, policy);
    auto g = sequence_gradient(bound.severed, y_seq, z_seq);
    if (v_ratio) *v_ratio = g.v_ratio;
    return std::move(g.grad_V_over_K);
}

}  // namespace pkmdp
