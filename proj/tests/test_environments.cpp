#include "pkmdp/environments.hpp"
#include "pkmdp/model_io.hpp"
#include "pkmdp/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace pkmdp;

namespace {

/// Deterministic load-unload walk under "memory bit = direction": set and go
/// right at the left end, clear and go left at the right end, otherwise keep
/// going the way the memory points. Counts deliveries directly.
double step_through_cycle_deliveries(std::size_t horizon) {
    std::size_t pos = 0;
    bool loaded = true, right = false;
    double deliveries = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        if (pos == 0) loaded = true;
        if (pos == 6 && loaded) {
            deliveries += 1.0;
            loaded = false;
        }
        if (pos == 0) right = true;
        if (pos == 6) right = false;
        pos = right ? pos + 1 : pos - 1;
    }
    return deliveries;
}

Policy cycle_policy() {
    Matrix logits(14, 4);
    for (std::size_t pos = 0; pos < 7; ++pos)
        for (std::size_t mem = 0; mem < 2; ++mem) {
            const std::size_t right = pos == 0 ? 1 : (pos == 6 ? 0 : mem);
            logits(pos * 2 + mem, right * 2 + right) = 50.0;
        }
    return Policy(logits);
}

/// Two-state world with every table stochastic, for enumeration.
FullModel tiny_world() {
    std::mt19937_64 rng(71);
    auto known = oracle::random_known_model(rng, 2, 2, 2, 2, 2);
    auto f = FullModel::allocate(known, make_space("s", 2));
    std::uniform_real_distribution<double> u(0.1, 1.0);
    f.p_s0 = {0.4, 0.6};
    for (std::size_t r = 0; r < f.p_s.num_rows(); ++r) {
        const double a = u(rng);
        f.p_s.at(r, 0) = a / (a + 0.5);
        f.p_s.at(r, 1) = 0.5 / (a + 0.5);
    }
    f.p_y.at(0, 0) = 0.7, f.p_y.at(0, 1) = 0.3, f.p_y.at(1, 0) = 0.2, f.p_y.at(1, 1) = 0.8;
    f.r_s = {0.0, 2.0};
    f.known.r_x = {1.0, 0.5};
    return f;
}

}  // namespace

TEST_CASE("environment sizes") {
    for (int v = 1; v <= 3; ++v) {
        const auto lu = make_load_unload(v);
        CHECK(lu.known().no() == 14);
        CHECK(lu.known().na() == 4);
        CHECK(validate_full_model(*lu.model).ok());
        const auto cp = make_clogged_pipe(v);
        CHECK(cp.known().no() == 12);
        CHECK(cp.known().na() == 8);
        CHECK(validate_full_model(*cp.model).ok());
        CHECK_FALSE(lu.description.empty());
    }
    CHECK(kCloggedPipeWorldStates == 144);
    const auto v3 = make_clogged_pipe(3);
    CHECK(v3.known().nz() == 1);
    CHECK(v3.known().ny() == 2);
    CHECK(v3.model->ns() == 3);
    CHECK_THROWS_AS(make_load_unload(4), std::invalid_argument);
    CHECK_THROWS_AS(make_clogged_pipe(0), std::invalid_argument);
    CHECK(parse_environment_name("clogged_pipe") == EnvironmentName::CloggedPipe);
    CHECK_THROWS_AS(parse_environment_name("maze"), std::invalid_argument);
}

TEST_CASE("reachable world states") {
    CHECK(reachable_joint_states(*make_load_unload(1).model) == 26);
    CHECK(reachable_joint_states(*make_clogged_pipe(1).model) == 144);
}

TEST_CASE("clogged pipe flow chain keeps clear with probability 0.9") {
    const auto spec = make_clogged_pipe(3);
    const auto& f = *spec.model;
    // s = flow, z single-valued.
    CHECK(f.ps(0, 0, 0) == doctest::Approx(0.9));
    CHECK(f.ps(1, 0, 0) == doctest::Approx(0.1));
    CHECK(f.ps(2, 0, 0) == 0.0);
    CHECK(f.ps(1, 1, 0) == doctest::Approx(0.8));
}

TEST_CASE("load-unload H = 1 earns nothing") {
    std::mt19937_64 rng(72);
    for (int v = 1; v <= 3; ++v) {
        const auto spec = make_load_unload(v);
        CHECK(exact_return(spec, Policy::uniform(14, 4), 1) == 0.0);
        CHECK(exact_return(spec, oracle::random_policy(rng, 14, 4, 3.0), 1) == 0.0);
    }
}

TEST_CASE("exact return matches enumeration of every length-2 trajectory") {
    const auto f = tiny_world();
    const auto& k = f.known;
    const auto pi = Policy::uniform(2, 2);
    double total = 0.0;
    for (std::size_t s0 = 0; s0 < 2; ++s0)
        for (std::size_t y0 = 0; y0 < 2; ++y0)
            for (std::size_t x0 = 0; x0 < 2; ++x0)
                for (std::size_t o0 = 0; o0 < 2; ++o0)
                    for (std::size_t a0 = 0; a0 < 2; ++a0)
                        for (std::size_t z0 = 0; z0 < 2; ++z0)
                            for (std::size_t s1 = 0; s1 < 2; ++s1)
                                for (std::size_t y1 = 0; y1 < 2; ++y1)
                                    for (std::size_t x1 = 0; x1 < 2; ++x1) {
                                        const double p = f.p_s0[s0] * f.py(y0, s0) * k.px0(x0, y0) * k.po(o0, x0) *
                                                         pi.prob(o0, a0) * k.pz(z0, x0, a0) * f.ps(s1, s0, z0) *
                                                         f.py(y1, s1) * k.px(x1, x0, y1, a0);
                                        total += p * (f.r_s[s0] + k.r_x[x0] + f.r_s[s1] + k.r_x[x1]);
                                    }
    CHECK(std::abs(exact_return(f, pi, 2) - total) < 1e-12);
}

TEST_CASE("memory-as-direction cycle reaches the step-through delivery count") {
    const double oracle_count = step_through_cycle_deliveries(100);
    CHECK(oracle_count == 8.0);
    for (int v = 1; v <= 3; ++v) CHECK(exact_return(make_load_unload(v), cycle_policy(), 100) == doctest::Approx(8.0));
}

TEST_CASE("returns lie in [0, H]") {
    std::mt19937_64 rng(73);
    for (auto name : {EnvironmentName::LoadUnload, EnvironmentName::CloggedPipe})
        for (int i = 0; i < 5; ++i) {
            const double r = exact_return(make_environment(name, 3), oracle::random_policy(rng, name == EnvironmentName::LoadUnload ? 14 : 12, name == EnvironmentName::LoadUnload ? 4 : 8, 2.0), 50);
            CHECK(r >= 0.0);
            CHECK(r <= 50.0);
        }
}

TEST_CASE("variants of one environment agree") {
    CHECK(check_variant_equivalence(EnvironmentName::LoadUnload, Policy::uniform(14, 4), 10).ok());
    std::mt19937_64 rng(74);
    for (int i = 0; i < 20; ++i) {
        const auto lu = check_variant_equivalence(EnvironmentName::LoadUnload, oracle::random_policy(rng, 14, 4, 2.0), 100);
        CHECK_MESSAGE(lu.ok(), (lu.ok() ? "" : lu.mismatches.front()));
        const auto cp = check_variant_equivalence(EnvironmentName::CloggedPipe, oracle::random_policy(rng, 12, 8, 2.0), 100);
        CHECK_MESSAGE(cp.ok(), (cp.ok() ? "" : cp.mismatches.front()));
    }
}

TEST_CASE("a corrupted variant is named by the equivalence check") {
    std::array<EnvironmentSpec, 3> variants{make_load_unload(1), make_load_unload(2), make_load_unload(3)};
    auto broken = *variants[1].model;
    // Swap the delivery reward onto a different latent value.
    for (std::size_t s = 0; s < broken.ns(); ++s) broken.r_s[s] = broken.r_s[s] > 0.0 ? 0.0 : broken.r_s[s];
    broken.r_s[0] = 1.0;
    variants[1].model = std::make_shared<const FullModel>(broken);
    const auto report = check_variant_equivalence(variants, Policy::uniform(14, 4), 30);
    REQUIRE_FALSE(report.ok());
    CHECK(report.mismatches.front().find("variant 2") != std::string::npos);
}

TEST_CASE("sampling is deterministic per seed") {
    const auto spec = make_clogged_pipe(2);
    const auto pi = Policy::uniform(12, 8);
    CHECK(sample_episode(spec, pi, 50, 9) == sample_episode(spec, pi, 50, 9));
    CHECK_FALSE(sample_episode(spec, pi, 50, 9) == sample_episode(spec, pi, 50, 10));
    const auto ep = sample_episode(spec, pi, 50, 9);
    REQUIRE(ep.debug_trace);
    CHECK(ep.horizon() == 50);
    double rs = 0.0;
    for (const auto& step : *ep.debug_trace) rs += step.r_s;
    CHECK(ep.unknown_return == rs);
}

TEST_CASE("Monte Carlo returns agree with exact returns") {
    std::mt19937_64 rng(75);
    for (auto [name, variant] : {std::pair{EnvironmentName::LoadUnload, 2}, std::pair{EnvironmentName::CloggedPipe, 2}}) {
        const auto spec = make_environment(name, variant);
        const auto pi = oracle::random_policy(rng, spec.known().no(), spec.known().na());
        const int n = 100000;
        const std::size_t H = 30;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto ep = sample_episode(spec, pi, H, rng());
            const double r = ep.unknown_return + ep.known_return_from_trace();
            sum += r;
            sq += r * r;
        }
        const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
        CHECK(std::abs(mean - exact_return(spec, pi, H)) < 3.0 * se);
    }
}

TEST_CASE("interface values are recoverable where the agent can see them") {
    for (int v = 1; v <= 3; ++v) CHECK(interface_determined_by_observation_action(make_load_unload(v).known()));
    CHECK(interface_determined_by_observation_action(make_clogged_pipe(1).known()));
    CHECK_FALSE(interface_determined_by_observation_action(make_clogged_pipe(3).known()));
}

TEST_CASE("environment models survive a text round trip") {
    for (auto name : {EnvironmentName::LoadUnload, EnvironmentName::CloggedPipe})
        for (int v = 1; v <= 3; ++v) {
            const auto spec = make_environment(name, v);
            std::stringstream buf;
            write_full_model(buf, *spec.model);
            CHECK(read_full_model(buf) == *spec.model);
        }
}
