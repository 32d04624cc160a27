#include "pkmdp/model.hpp"
#include "pkmdp/model_io.hpp"
#include "pkmdp/oracle.hpp"
#include "pkmdp/policy.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace pkmdp;

namespace {

KnownModel tiny_known() {
    auto m = KnownModel::allocate(make_space("x", 2), make_space("y", 1), make_space("z", 2), make_space("o", 2),
                                  make_space("a", 2));
    m.p_x0.at(0, 0) = 1.0;
    for (std::size_t r = 0; r < m.p_x.num_rows(); ++r) m.p_x.at(r, r % 2) = 1.0;
    m.p_o.at(0, 0) = m.p_o.at(1, 1) = 1.0;
    for (std::size_t r = 0; r < m.p_z.num_rows(); ++r) m.p_z.at(r, 0) = m.p_z.at(r, 1) = 0.5;
    m.r_x = {0.0, 1.0};
    return m;
}

}  // namespace

TEST_CASE("valid model passes validation") {
    const auto report = validate_known_model(tiny_known());
    CHECK(report.ok());
    CHECK(report.summary() == "ok");
}

TEST_CASE("row sum off by 1e-6 is reported with table and parent tuple") {
    auto m = tiny_known();
    m.p_x.at(3, 1) += 1e-6;
    const auto report = validate_known_model(m);
    REQUIRE_FALSE(report.ok());
    const auto text = report.summary();
    CHECK(text.find("p_x") != std::string::npos);
    CHECK(text.find(m.p_x.describe_row(3)) != std::string::npos);
}

TEST_CASE("negative and non-finite entries are rejected") {
    auto m = tiny_known();
    m.p_o.at(0, 0) = 1.5;
    m.p_o.at(0, 1) = -0.5;
    CHECK_FALSE(validate_known_model(m).ok());
    auto n = tiny_known();
    n.p_z.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(validate_known_model(n).ok());
    auto r = tiny_known();
    r.r_x[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(validate_known_model(r).ok());
}

TEST_CASE("condition table row indexing is row-major in parent order") {
    CondTable t(make_space("c", 2), {make_space("p", 3), make_space("q", 4)});
    CHECK(t.num_rows() == 12);
    const std::size_t values[] = {2, 1};
    CHECK(t.row_index(values) == 9);
    CHECK(t.parent_values(9) == std::vector<std::size_t>{2, 1});
}

TEST_CASE("softmax closed forms") {
    SUBCASE("all logits zero") {
        const auto p = Policy::uniform(3, 4);
        for (double v : p.action_probs().data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
    }
    SUBCASE("logits (ln 3, 0)") {
        Matrix l(1, 2);
        l(0, 0) = std::log(3.0);
        const Policy p(l);
        CHECK(p.prob(0, 0) == doctest::Approx(0.75).epsilon(1e-11));
        CHECK(p.prob(0, 1) == doctest::Approx(0.25).epsilon(1e-11));
    }
    SUBCASE("logits (1000, 0) stay strictly inside (0, 1)") {
        Matrix l(1, 2);
        l(0, 0) = 1000.0;
        const Policy p(l);
        for (double v : p.action_probs().data()) {
            CHECK(std::isfinite(v));
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        CHECK(p.prob(0, 0) + p.prob(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("non-finite logits are rejected") {
    Matrix l(1, 2);
    l(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Policy{l}, std::invalid_argument);
    l(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Policy{l}, std::invalid_argument);
}

TEST_CASE("logit chain rule") {
    SUBCASE("constant row gradient vanishes") {
        std::mt19937_64 rng(4);
        const auto p = oracle::random_policy(rng, 3, 3);
        Matrix g(3, 3);
        for (std::size_t o = 0; o < 3; ++o)
            for (std::size_t a = 0; a < 3; ++a) g(o, a) = static_cast<double>(o) + 0.5;
        const auto out = policy_logit_chain_rule(p, g);
        for (double v : out.data()) CHECK(std::abs(v) < 1e-15);
    }
    SUBCASE("uniform two actions, g = (1, 0)") {
        const auto p = Policy::uniform(1, 2);
        Matrix g(1, 2);
        g(0, 0) = 1.0;
        const auto out = policy_logit_chain_rule(p, g);
        CHECK(out(0, 0) == doctest::Approx(0.25).epsilon(1e-11));
        CHECK(out(0, 1) == doctest::Approx(-0.25).epsilon(1e-11));
    }
    SUBCASE("random 3x3 matches finite differences") {
        std::mt19937_64 rng(11);
        const auto p = oracle::random_policy(rng, 3, 3);
        std::normal_distribution<double> normal;
        Matrix g(3, 3);
        for (auto& v : g.data()) v = normal(rng);
        const auto analytic = policy_logit_chain_rule(p, g);
        const auto fd = oracle::finite_difference(
            [&](std::span<const double> l) {
                Matrix logits(3, 3);
                std::copy(l.begin(), l.end(), logits.data().begin());
                const auto probs = policy_action_probs(logits);
                double s = 0.0;
                for (std::size_t i = 0; i < probs.size(); ++i) s += probs.data()[i] * g.data()[i];
                return s;
            },
            p.logits().data(), 1e-6);
        for (std::size_t i = 0; i < fd.size(); ++i) CHECK(std::abs(fd[i] - analytic.data()[i]) < 1e-8);
    }
}

TEST_CASE("log_sum_exp") {
    const double v[] = {1000.0, 1000.0};
    CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
    CHECK(std::isinf(log_sum_exp({})));
}

TEST_CASE("model text round trip is bit exact") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5; ++i) {
        const auto m = oracle::random_known_model(rng, 3, 2, 2, 3, 2, 0.2);
        std::stringstream buf;
        write_known_model(buf, m);
        CHECK(read_known_model(buf) == m);
    }
    auto labelled = tiny_known();
    labelled.o_space = make_space("obs", {"left", "right"});
    labelled.p_o = CondTable(labelled.o_space, {labelled.x_space});
    labelled.p_o.at(0, 0) = labelled.p_o.at(1, 1) = 1.0;
    labelled.p_z = CondTable(labelled.z_space, {labelled.x_space, labelled.a_space});
    for (std::size_t r = 0; r < labelled.p_z.num_rows(); ++r) labelled.p_z.at(r, 1) = 1.0;
    std::stringstream buf;
    write_known_model(buf, labelled);
    CHECK(read_known_model(buf) == labelled);
}

TEST_CASE("malformed model text is rejected") {
    std::stringstream bad("pkmdp-model 1\nspace x x 2\ntable p_x0 1 3\n");
    CHECK_THROWS_AS(read_known_model(bad), ModelFormatError);
    std::stringstream wrong_header("something else\n");
    CHECK_THROWS_AS(read_known_model(wrong_header), ModelFormatError);
}

TEST_CASE("episode text round trip") {
    std::vector<Episode> episodes(2);
    episodes[0].y_seq = {0, 1, 0};
    episodes[0].z_seq = {1, 1, 0};
    episodes[0].unknown_return = 2.5;
    episodes[1].y_seq = {1};
    episodes[1].z_seq = {0};
    episodes[1].policy_index = 1;
    std::mt19937_64 rng(2);
    std::vector<Policy> policies{oracle::random_policy(rng, 2, 3), oracle::random_policy(rng, 2, 3)};
    std::stringstream buf;
    write_episodes(buf, episodes, policies);
    std::vector<Episode> e2;
    std::vector<Policy> p2;
    read_episodes(buf, e2, p2);
    CHECK(e2 == episodes);
    CHECK(p2 == policies);
}
