#pragma once

#include "pkmdp/episode.hpp"
#include "pkmdp/model.hpp"
#include "pkmdp/policy.hpp"

#include <random>
#include <span>

namespace pkmdp::testing {

inline std::size_t draw(std::span<const double> p, std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        if (u < p[k]) return k;
        u -= p[k];
    }
    return p.size() - 1;
}

/// Random Y; X, O, A, Z forward-simulated in the severed model; random return.
inline Episode severed_episode(const KnownModel& m, const Policy& pi, std::size_t horizon, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick_y(0, m.ny() - 1);
    Episode ep;
    std::size_t x = 0, a = 0;
    for (std::size_t t = 0; t < horizon; ++t) {
        ep.y_seq.push_back(pick_y(rng));
        x = t == 0 ? draw(m.p_x0.row(ep.y_seq[0]), rng) : draw(m.p_x.row((x * m.ny() + ep.y_seq[t]) * m.na() + a), rng);
        a = draw(pi.action_probs().row(draw(m.p_o.row(x), rng)), rng);
        ep.z_seq.push_back(draw(m.p_z.row(x * m.na() + a), rng));
    }
    ep.unknown_return = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    return ep;
}

}  // namespace pkmdp::testing

namespace pkmdp::testing {

/// Load-unload with the whole world in x (position, memory, loaded) and the
/// delivery reward in r_x; y, z and s are single-valued.
inline KnownModel known_load_unload() {
    auto m = KnownModel::allocate(make_space("x", 28), make_space("y", 1), make_space("z", 1), make_space("o", 14),
                                  make_space("a", 4));
    auto xid = [](std::size_t pos, std::size_t mem, std::size_t loaded) { return (pos * 2 + mem) * 2 + loaded; };
    m.p_x0.at(0, xid(0, 0, 1)) = 1.0;
    for (std::size_t pos = 0; pos < 7; ++pos)
        for (std::size_t mem = 0; mem < 2; ++mem)
            for (std::size_t loaded = 0; loaded < 2; ++loaded) {
                const std::size_t x = xid(pos, mem, loaded);
                m.p_o.at(x, pos * 2 + mem) = 1.0;
                m.r_x[x] = (pos == 6 && loaded) ? 1.0 : 0.0;
                for (std::size_t a = 0; a < 4; ++a) {
                    m.p_z.at(x * 4 + a, 0) = 1.0;
                    const std::size_t next_pos = a / 2 == 0 ? (pos == 0 ? 0 : pos - 1) : std::min<std::size_t>(pos + 1, 6);
                    const std::size_t next_loaded = next_pos == 0 ? 1 : (pos == 6 ? 0 : loaded);
                    m.p_x.at(x * 4 + a, xid(next_pos, a % 2, next_loaded)) = 1.0;
                }
            }
    return m;
}

}  // namespace pkmdp::testing
