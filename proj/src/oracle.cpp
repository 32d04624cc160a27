#include "pkmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pkmdp::oracle {

namespace {

void fill_random_table(CondTable& table, std::mt19937_64& rng, double sparsity) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        auto row = table.row(r);
        double sum = 0.0;
        for (auto& p : row) {
            p = unit(rng) < sparsity ? 0.0 : 0.05 + unit(rng);
            sum += p;
        }
        if (sum == 0.0) {
            std::uniform_int_distribution<std::size_t> pick(0, row.size() - 1);
            row[pick(rng)] = 1.0;
            sum = 1.0;
        }
        for (auto& p : row) p /= sum;
    }
}

std::size_t draw(std::span<const double> probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last = i;
        if (u < probs[i]) return i;
        u -= probs[i];
    }
    return last;
}

double path_count(const KnownModel& m, std::size_t horizon) {
    return std::pow(static_cast<double>(m.nx() * m.no() * m.na()), static_cast<double>(horizon));
}

/// Dense T(y, z) written out from its definition.
Matrix dense_transition(const KnownModel& m, const Matrix& probs, std::size_t y, std::size_t z) {
    Matrix t(m.nx(), m.nx());
    for (std::size_t x = 0; x < m.nx(); ++x)
        for (std::size_t xn = 0; xn < m.nx(); ++xn) {
            double sum = 0.0;
            for (std::size_t o = 0; o < m.no(); ++o)
                for (std::size_t a = 0; a < m.na(); ++a)
                    sum += m.po(o, x) * probs(o, a) * m.pz(z, x, a) * m.px(xn, x, y, a);
            t(x, xn) = sum;
        }
    return t;
}

/// The last-slice factor sum_{o,a} p_o(o|x) p(a|o) p_z(z|x,a).
std::vector<double> final_factor(const KnownModel& m, const Matrix& probs, std::size_t z) {
    std::vector<double> out(m.nx(), 0.0);
    for (std::size_t x = 0; x < m.nx(); ++x)
        for (std::size_t o = 0; o < m.no(); ++o)
            for (std::size_t a = 0; a < m.na(); ++a) out[x] += m.po(o, x) * probs(o, a) * m.pz(z, x, a);
    return out;
}

}  // namespace

KnownModel random_known_model(std::mt19937_64& rng, std::size_t nx, std::size_t ny, std::size_t nz, std::size_t no,
                              std::size_t na, double sparsity) {
    KnownModel m = KnownModel::allocate(make_space("x", nx), make_space("y", ny), make_space("z", nz),
                                        make_space("o", no), make_space("a", na));
    fill_random_table(m.p_x0, rng, sparsity);
    fill_random_table(m.p_x, rng, sparsity);
    fill_random_table(m.p_o, rng, sparsity);
    fill_random_table(m.p_z, rng, sparsity);
    std::uniform_real_distribution<double> reward(-1.0, 1.0);
    for (auto& r : m.r_x) r = reward(rng);
    return m;
}

Policy random_policy(std::mt19937_64& rng, std::size_t no, std::size_t na, double scale) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix logits(no, na);
    for (auto& v : logits.data()) v = normal(rng);
    return Policy(std::move(logits));
}

TinyInstance random_tiny_instance(std::mt19937_64& rng, const TinyInstanceOptions& options) {
    std::uniform_int_distribution<std::size_t> space(1, options.max_space);
    std::uniform_int_distribution<std::size_t> horizon(1, options.max_horizon);
    const std::size_t nx = space(rng), ny = space(rng), nz = space(rng), no = space(rng), na = space(rng);
    TinyInstance inst{random_known_model(rng, nx, ny, nz, no, na, options.sparsity),
                      random_policy(rng, no, na), {}, {}};
    if (options.zero_reward) std::fill(inst.model.r_x.begin(), inst.model.r_x.end(), 0.0);
    const KnownModel& m = inst.model;
    const std::size_t H = horizon(rng);
    std::uniform_int_distribution<std::size_t> pick_y(0, ny - 1);
    for (std::size_t t = 0; t < H; ++t) inst.y_seq.push_back(pick_y(rng));
    // Z drawn from the severed model so that it has positive probability.
    std::size_t x = draw(m.p_x0.row(inst.y_seq[0]), rng), a = 0;
    for (std::size_t t = 0; t < H; ++t) {
        if (t > 0) x = draw(m.p_x.row((x * ny + inst.y_seq[t]) * na + a), rng);
        const std::size_t o = draw(m.p_o.row(x), rng);
        a = draw(inst.policy.action_probs().row(o), rng);
        inst.z_seq.push_back(draw(m.p_z.row(x * na + a), rng));
    }
    return inst;
}

KV brute_force_KV(const KnownModel& m, const Matrix& probs, std::span<const std::size_t> y_seq,
                  std::span<const std::size_t> z_seq) {
    const std::size_t H = y_seq.size();
    if (H == 0 || z_seq.size() != H) throw std::invalid_argument("sequences must be non-empty and equal length");
    if (path_count(m, H) > kMaxEnumeration)
        throw EnumerationLimitError("instance too large to enumerate (" + std::to_string(path_count(m, H)) + " paths)");

    // Odometer over (x_t, o_t, a_t) for every slice.
    std::vector<std::size_t> xs(H, 0), os(H, 0), as(H, 0);
    KV out;
    for (;;) {
        double p = m.px0(xs[0], y_seq[0]);
        double reward = 0.0;
        for (std::size_t t = 0; t < H && p != 0.0; ++t) {
            if (t > 0) p *= m.px(xs[t], xs[t - 1], y_seq[t], as[t - 1]);
            p *= m.po(os[t], xs[t]) * probs(os[t], as[t]) * m.pz(z_seq[t], xs[t], as[t]);
            reward += m.r_x[xs[t]];
        }
        if (p != 0.0) {
            out.K += p;
            out.V += p * reward;
        }
        std::size_t t = 0;
        for (; t < H; ++t) {
            if (++as[t] < m.na()) break;
            as[t] = 0;
            if (++os[t] < m.no()) break;
            os[t] = 0;
            if (++xs[t] < m.nx()) break;
            xs[t] = 0;
        }
        if (t == H) break;
    }
    return out;
}

KV brute_force_KV(const TinyInstance& instance) {
    return brute_force_KV(instance.model, instance.policy.action_probs(), instance.y_seq, instance.z_seq);
}

double brute_force_Z_normalization(const KnownModel& m, const Matrix& probs, std::span<const std::size_t> y_seq) {
    const std::size_t H = y_seq.size();
    const double sequences = std::pow(static_cast<double>(m.nz()), static_cast<double>(H));
    if (sequences * path_count(m, H) > 100 * kMaxEnumeration)
        throw EnumerationLimitError("too many Z sequences to enumerate");
    std::vector<std::size_t> z(H, 0);
    double total = 0.0;
    for (;;) {
        total += brute_force_KV(m, probs, y_seq, z).K;
        std::size_t t = 0;
        for (; t < H; ++t) {
            if (++z[t] < m.nz()) break;
            z[t] = 0;
        }
        if (t == H) break;
    }
    return total;
}

UnscaledForwardBackward unscaled_forward_backward(const KnownModel& m, const Matrix& probs,
                                                  std::span<const std::size_t> y_seq,
                                                  std::span<const std::size_t> z_seq) {
    const std::size_t H = y_seq.size(), nx = m.nx();
    UnscaledForwardBackward r{Matrix(H, nx), Matrix(H, nx)};
    for (std::size_t x = 0; x < nx; ++x) r.alpha(0, x) = m.px0(x, y_seq[0]);
    for (std::size_t t = 0; t + 1 < H; ++t) {
        const Matrix T = dense_transition(m, probs, y_seq[t + 1], z_seq[t]);
        for (std::size_t xn = 0; xn < nx; ++xn)
            for (std::size_t x = 0; x < nx; ++x) r.alpha(t + 1, xn) += T(x, xn) * r.alpha(t, x);
    }
    const auto last = final_factor(m, probs, z_seq[H - 1]);
    for (std::size_t x = 0; x < nx; ++x) r.beta(H - 1, x) = last[x];
    for (std::size_t t = H - 1; t-- > 0;) {
        const Matrix T = dense_transition(m, probs, y_seq[t + 1], z_seq[t]);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t xn = 0; xn < nx; ++xn) r.beta(t, x) += T(x, xn) * r.beta(t + 1, xn);
    }
    return r;
}

Matrix tangent_grad_V(const KnownModel& m, const Matrix& probs, std::span<const std::size_t> y_seq,
                      std::span<const std::size_t> z_seq) {
    const std::size_t H = y_seq.size(), nx = m.nx();
    const auto fb = unscaled_forward_backward(m, probs, y_seq, z_seq);
    std::vector<Matrix> T;
    for (std::size_t t = 0; t + 1 < H; ++t) T.push_back(dense_transition(m, probs, y_seq[t + 1], z_seq[t]));

    Matrix grad(m.no(), m.na());
    for (std::size_t po = 0; po < m.no(); ++po)
        for (std::size_t pa = 0; pa < m.na(); ++pa) {
            // dT/dp(pa|po) between slices t and t+1.
            auto dT = [&](std::size_t t, std::size_t x, std::size_t xn) {
                return m.po(po, x) * m.pz(z_seq[t], x, pa) * m.px(xn, x, y_seq[t + 1], pa);
            };
            Matrix d_alpha(H, nx), d_beta(H, nx);
            for (std::size_t t = 0; t + 1 < H; ++t)
                for (std::size_t xn = 0; xn < nx; ++xn)
                    for (std::size_t x = 0; x < nx; ++x)
                        d_alpha(t + 1, xn) += T[t](x, xn) * d_alpha(t, x) + dT(t, x, xn) * fb.alpha(t, x);
            for (std::size_t x = 0; x < nx; ++x) d_beta(H - 1, x) = m.po(po, x) * m.pz(z_seq[H - 1], x, pa);
            for (std::size_t t = H - 1; t-- > 0;)
                for (std::size_t x = 0; x < nx; ++x)
                    for (std::size_t xn = 0; xn < nx; ++xn)
                        d_beta(t, x) += T[t](x, xn) * d_beta(t + 1, xn) + dT(t, x, xn) * fb.beta(t + 1, xn);
            double dv = 0.0;
            for (std::size_t x = 0; x < nx; ++x)
                for (std::size_t t = 0; t < H; ++t)
                    dv += m.r_x[x] * (fb.alpha(t, x) * d_beta(t, x) + fb.beta(t, x) * d_alpha(t, x));
            grad(po, pa) = dv;
        }
    return grad;
}

std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& fn,
                                      std::span<const double> point, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
    std::vector<double> x(point.begin(), point.end()), grad(point.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double up = fn(x);
        x[i] = orig - step;
        const double down = fn(x);
        x[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace pkmdp::oracle
