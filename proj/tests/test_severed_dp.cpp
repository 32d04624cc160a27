#include "pkmdp/oracle.hpp"
#include "pkmdp/severed_dp.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

using namespace pkmdp;

namespace {

/// Every table random, then y and z spaces collapsed to one value.
KnownModel degenerate_interface_model(std::mt19937_64& rng) {
    return oracle::random_known_model(rng, 3, 1, 1, 2, 3);
}

double max_norm_rel(const std::vector<double>& exact, const std::vector<double>& approx) {
    double diff = 0.0, scale = 1e-8;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        diff = std::max(diff, std::abs(exact[i] - approx[i]));
        scale = std::max(scale, std::abs(exact[i]));
    }
    return diff / scale;
}

}  // namespace

TEST_CASE("transition matrix degenerate spaces give scalar one") {
    auto m = KnownModel::allocate(make_space("x", 1), make_space("y", 1), make_space("z", 1), make_space("o", 1),
                                  make_space("a", 1));
    m.p_x0.at(0, 0) = m.p_x.at(0, 0) = m.p_o.at(0, 0) = m.p_z.at(0, 0) = 1.0;
    const auto t = transition_matrix(m, Policy::uniform(1, 1), 0, 0);
    REQUIRE(t.rows() == 1);
    CHECK(t(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("transition matrix row sums") {
    std::mt19937_64 rng(21);
    const auto m = oracle::random_known_model(rng, 3, 2, 1, 3, 2);
    const auto pi = oracle::random_policy(rng, 3, 2);
    for (std::size_t y = 0; y < 2; ++y) {
        const auto t = transition_matrix(m, pi, y, 0);
        for (std::size_t x = 0; x < 3; ++x) {
            double s = 0.0;
            for (double v : t.row(x)) s += v;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
    const auto m2 = oracle::random_known_model(rng, 3, 2, 3, 3, 2);
    for (std::size_t x = 0; x < 3; ++x) {
        double s = 0.0;
        for (std::size_t z = 0; z < 3; ++z) {
            const auto t = transition_matrix(m2, pi, 1, z);
            for (double v : t.row(x)) s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("transition matrix matches nested-loop summation") {
    std::mt19937_64 rng(22);
    const auto m = oracle::random_known_model(rng, 3, 2, 3, 3, 3, 0.3);
    const auto pi = oracle::random_policy(rng, 3, 3);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t z = 0; z < 3; ++z) {
            const auto t = transition_matrix(m, pi, y, z);
            for (std::size_t x = 0; x < 3; ++x)
                for (std::size_t xn = 0; xn < 3; ++xn) {
                    double expect = 0.0;
                    for (std::size_t o = 0; o < 3; ++o)
                        for (std::size_t a = 0; a < 3; ++a)
                            expect += m.po(o, x) * pi.prob(o, a) * m.pz(z, x, a) * m.px(xn, x, y, a);
                    CHECK(std::abs(t(x, xn) - expect) < 1e-12);
                }
        }
}

TEST_CASE("forward-backward agrees with brute-force enumeration") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
        const auto inst = oracle::random_tiny_instance(rng, {.sparsity = (i % 3 == 0) ? 0.3 : 0.0});
        const auto bf = oracle::brute_force_KV(inst);
        const auto fb = forward_backward(inst.model, inst.policy, inst.y_seq, inst.z_seq);
        const double k = std::exp(fb.log_K);
        CHECK(std::abs(k - bf.K) < 1e-9);
        CHECK(std::abs(fb.v_ratio * k - bf.V) < 1e-9);
    }
}

TEST_CASE("scaled quantities: normalization, log K, posterior identity") {
    std::mt19937_64 rng(24);
    for (int i = 0; i < 50; ++i) {
        const auto inst = oracle::random_tiny_instance(rng);
        const auto fb = forward_backward(inst.model, inst.policy, inst.y_seq, inst.z_seq);
        double log_k = 0.0;
        for (std::size_t t = 0; t < inst.horizon(); ++t) {
            double alpha_sum = 0.0, identity = 0.0;
            for (std::size_t x = 0; x < inst.model.nx(); ++x) {
                alpha_sum += fb.alpha_hat(t, x);
                identity += fb.posterior(t, x);
            }
            CHECK(alpha_sum == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::abs(identity - 1.0) < 1e-9);
            log_k += fb.scale_log[t];
        }
        CHECK(fb.log_K == doctest::Approx(log_k).epsilon(1e-14));

        // Scaling transparency against the unscaled recursions.
        const auto raw = oracle::unscaled_forward_backward(inst.model, inst.policy.action_probs(), inst.y_seq,
                                                           inst.z_seq);
        const double k = std::exp(fb.log_K);
        for (std::size_t t = 0; t < inst.horizon(); ++t)
            for (std::size_t x = 0; x < inst.model.nx(); ++x)
                CHECK(std::abs(raw.alpha(t, x) * raw.beta(t, x) / k - fb.posterior(t, x)) < 1e-12);
    }
}

TEST_CASE("unscaled alpha-beta product is constant in t") {
    std::mt19937_64 rng(25);
    for (int i = 0; i < 100; ++i) {
        const auto inst = oracle::random_tiny_instance(rng);
        const auto raw = oracle::unscaled_forward_backward(inst.model, inst.policy.action_probs(), inst.y_seq,
                                                           inst.z_seq);
        double first = 0.0;
        for (std::size_t t = 0; t < inst.horizon(); ++t) {
            double k = 0.0;
            for (std::size_t x = 0; x < inst.model.nx(); ++x) k += raw.alpha(t, x) * raw.beta(t, x);
            if (t == 0) first = k;
            CHECK(std::abs(k - first) < 1e-12);
        }
    }
}

TEST_CASE("scaled identity holds at H = 100") {
    std::mt19937_64 rng(26);
    const auto model = oracle::random_known_model(rng, 3, 2, 3, 3, 3);
    const auto pi = oracle::random_policy(rng, 3, 3);
    std::vector<std::size_t> y(100), z(100);
    std::uniform_int_distribution<std::size_t> pick(0, 1);
    for (auto& v : y) v = pick(rng);
    for (auto& v : z) v = pick(rng);
    const auto fb = forward_backward(model, pi, y, z);
    CHECK(fb.log_K < -50.0);
    for (std::size_t t = 0; t < 100; ++t) {
        double s = 0.0;
        for (std::size_t x = 0; x < 3; ++x) s += fb.posterior(t, x);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("K sums to one over Z sequences") {
    std::mt19937_64 rng(27);
    for (int i = 0; i < 30; ++i) {
        const auto inst = oracle::random_tiny_instance(rng, {.max_horizon = 3});
        const auto& m = inst.model;
        const std::size_t H = inst.horizon();
        std::vector<std::size_t> z(H, 0);
        double total = 0.0;
        for (;;) {
            try {
                total += std::exp(forward_backward(m, inst.policy, inst.y_seq, z).log_K);
            } catch (const ImpossibleSequenceError&) {
            }
            std::size_t t = 0;
            for (; t < H && ++z[t] == m.nz(); ++t) z[t] = 0;
            if (t == H) break;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(std::abs(oracle::brute_force_Z_normalization(m, inst.policy.action_probs(), inst.y_seq) - 1.0) < 1e-9);
    }
}

TEST_CASE("degenerate interface: K = 1 and gradients vanish on the simplex") {
    std::mt19937_64 rng(28);
    const auto m = degenerate_interface_model(rng);
    const auto pi = oracle::random_policy(rng, 2, 3);
    for (std::size_t H : {1u, 5u, 40u}) {
        const std::vector<std::size_t> zeros(H, 0);
        const auto fb = forward_backward(m, pi, zeros, zeros);
        CHECK(std::abs(fb.log_K) < 1e-12);
        // With raw p(a|o) free, K = prod_t (sum_a p)-type terms: the derivative is
        // the same for every action of an observation, so it has no component
        // along the simplex and chains to zero in logit space.
        const auto g = grad_log_K(m, pi, zeros, zeros);
        for (std::size_t o = 0; o < 2; ++o)
            for (std::size_t a = 1; a < 3; ++a) CHECK(std::abs(g(o, a) - g(o, 0)) < 1e-12);
        const auto chained = policy_logit_chain_rule(pi, g);
        for (double v : chained.data()) CHECK(std::abs(v) < 1e-12);
    }
}

TEST_CASE("zero known reward gives zero V and zero V gradient") {
    std::mt19937_64 rng(29);
    auto inst = oracle::random_tiny_instance(rng, {.zero_reward = true});
    double v_ratio = -1.0;
    const auto g = grad_V(inst.model, inst.policy, inst.y_seq, inst.z_seq, &v_ratio);
    CHECK(v_ratio == 0.0);
    for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("indicator reward keeps V/K within [0, H]") {
    std::mt19937_64 rng(30);
    for (int i = 0; i < 20; ++i) {
        auto inst = oracle::random_tiny_instance(rng);
        std::fill(inst.model.r_x.begin(), inst.model.r_x.end(), 0.0);
        inst.model.r_x[0] = 1.0;
        const auto fb = forward_backward(inst.model, inst.policy, inst.y_seq, inst.z_seq);
        CHECK(fb.v_ratio >= 0.0);
        CHECK(fb.v_ratio <= static_cast<double>(inst.horizon()) + 1e-12);
    }
}

TEST_CASE("impossible interface sequence is reported") {
    auto m = KnownModel::allocate(make_space("x", 2), make_space("y", 1), make_space("z", 2), make_space("o", 2),
                                  make_space("a", 1));
    m.p_x0.at(0, 0) = 1.0;
    for (std::size_t r = 0; r < m.p_x.num_rows(); ++r) m.p_x.at(r, 0) = 1.0;
    m.p_o.at(0, 0) = m.p_o.at(1, 1) = 1.0;
    for (std::size_t r = 0; r < m.p_z.num_rows(); ++r) m.p_z.at(r, 0) = 1.0;
    const std::vector<std::size_t> y{0, 0}, z{0, 1};
    CHECK_THROWS_AS(forward_backward(m, Policy::uniform(2, 1), y, z), ImpossibleSequenceError);
}

TEST_CASE("mismatched sequence lengths are rejected") {
    std::mt19937_64 rng(31);
    const auto inst = oracle::random_tiny_instance(rng);
    const std::vector<std::size_t> shorter(inst.z_seq.begin(), inst.z_seq.end() - 1);
    CHECK_THROWS(forward_backward(inst.model, inst.policy, inst.y_seq, shorter));
    const std::vector<std::size_t> bad(inst.horizon(), inst.model.nz());
    CHECK_THROWS(forward_backward(inst.model, inst.policy, inst.y_seq, bad));
}

TEST_CASE("single action model: K is homogeneous of degree H in p") {
    std::mt19937_64 rng(32);
    const auto model = std::make_shared<const KnownModel>(oracle::random_known_model(rng, 3, 2, 2, 1, 1));
    const CompiledModel compiled(model);
    for (std::size_t H : {1u, 2u, 4u}) {
        const std::vector<std::size_t> y(H, 1), z(H, 0);
        Matrix p(1, 1, 0.7);
        const auto g = sequence_gradient(SeveredModel(compiled, p), y, z);
        CHECK(g.grad_log_K(0, 0) == doctest::Approx(static_cast<double>(H) / 0.7).epsilon(1e-12));
        // V/K is invariant to scaling p.
        CHECK(std::abs(g.grad_V_over_K(0, 0) - g.v_ratio * g.grad_log_K(0, 0)) < 1e-12);
    }
}

TEST_CASE("H = 1 gradient of V matches hand expansion") {
    std::mt19937_64 rng(33);
    for (int i = 0; i < 10; ++i) {
        const auto m = oracle::random_known_model(rng, 3, 2, 2, 2, 3);
        const auto pi = oracle::random_policy(rng, 2, 3);
        const std::vector<std::size_t> y{1}, z{0};
        double K = 0.0;
        Matrix dV(2, 3);
        for (std::size_t x = 0; x < 3; ++x) {
            double beta = 0.0;
            for (std::size_t o = 0; o < 2; ++o)
                for (std::size_t a = 0; a < 3; ++a) {
                    beta += m.po(o, x) * pi.prob(o, a) * m.pz(0, x, a);
                    dV(o, a) += m.r_x[x] * m.px0(x, 1) * m.po(o, x) * m.pz(0, x, a);
                }
            K += m.px0(x, 1) * beta;
        }
        const auto g = grad_V(m, pi, y, z);
        for (std::size_t i2 = 0; i2 < dV.size(); ++i2) CHECK(std::abs(g.data()[i2] * K - dV.data()[i2]) < 1e-12);
    }
}

TEST_CASE("gradients match central finite differences on raw probabilities") {
    std::mt19937_64 rng(34);
    for (int i = 0; i < 50; ++i) {
        const auto inst = oracle::random_tiny_instance(rng);
        const CompiledModel compiled(std::make_shared<const KnownModel>(inst.model));
        const auto& p0 = inst.policy.action_probs();
        auto eval = [&](std::span<const double> p) {
            Matrix probs(p0.rows(), p0.cols());
            std::copy(p.begin(), p.end(), probs.data().begin());
            return evaluate_sequence(SeveredModel(compiled, std::move(probs)), inst.y_seq, inst.z_seq);
        };
        const auto g = sequence_gradient(SeveredModel(compiled, inst.policy), inst.y_seq, inst.z_seq);
        const auto fd_log_k = oracle::finite_difference([&](auto p) { return eval(p).log_K; }, p0.data(), 1e-6);
        const auto fd_v = oracle::finite_difference(
            [&](auto p) {
                const auto v = eval(p);
                return v.v_ratio * std::exp(v.log_K);
            },
            p0.data(), 1e-6);
        std::vector<double> dv = g.grad_V_over_K.data();
        for (auto& v : dv) v *= std::exp(g.log_K);
        CHECK(max_norm_rel(g.grad_log_K.data(), fd_log_k) < 1e-5);
        CHECK(max_norm_rel(dv, fd_v) < 1e-5);
    }
}

TEST_CASE("V gradient agrees with the explicit tangent recursions") {
    std::mt19937_64 rng(35);
    for (int i = 0; i < 50; ++i) {
        const auto inst = oracle::random_tiny_instance(rng, {.sparsity = 0.2});
        const auto tangent = oracle::tangent_grad_V(inst.model, inst.policy.action_probs(), inst.y_seq, inst.z_seq);
        const auto g = grad_V(inst.model, inst.policy, inst.y_seq, inst.z_seq);
        const double k = std::exp(forward_backward(inst.model, inst.policy, inst.y_seq, inst.z_seq).log_K);
        for (std::size_t j = 0; j < tangent.size(); ++j) CHECK(std::abs(g.data()[j] * k - tangent.data()[j]) < 1e-10);
    }
}

TEST_CASE("value-only evaluation matches forward-backward") {
    std::mt19937_64 rng(36);
    for (int i = 0; i < 20; ++i) {
        const auto inst = oracle::random_tiny_instance(rng);
        const CompiledModel compiled(std::make_shared<const KnownModel>(inst.model));
        const SeveredModel severed(compiled, inst.policy);
        const auto v = evaluate_sequence(severed, inst.y_seq, inst.z_seq);
        const auto fb = forward_backward(severed, inst.y_seq, inst.z_seq);
        CHECK(v.log_K == doctest::Approx(fb.log_K).epsilon(1e-13));
        CHECK(std::abs(v.v_ratio - fb.v_ratio) < 1e-12);
    }
}
