#include "pkmdp/environments.hpp"
#include "pkmdp/severed_dp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace pkmdp {

EnvironmentName parse_environment_name(const std::string& name) {
    if (name == "load_unload" || name == "load-unload") return EnvironmentName::LoadUnload;
    if (name == "clogged_pipe" || name == "clogged-pipe") return EnvironmentName::CloggedPipe;
    throw std::invalid_argument("unknown environment '" + name + "' (load_unload, clogged_pipe)");
}

std::string to_string(EnvironmentName name) {
    return name == EnvironmentName::LoadUnload ? "load_unload" : "clogged_pipe";
}

namespace {

void check_variant(int variant) {
    if (variant < 1 || variant > 3) throw std::invalid_argument("variant must be 1, 2 or 3");
}

void set_point(CondTable& table, std::size_t row, std::size_t child) {
    auto r = table.row(row);
    std::fill(r.begin(), r.end(), 0.0);
    r[child] = 1.0;
}

// ---------------------------------------------------------------- load-unload

namespace lu {

constexpr std::size_t kPositions = 7;
constexpr std::size_t kLast = kPositions - 1;

std::size_t move_of(std::size_t a) { return a / 2; }  // 0 left, 1 right
std::size_t memory_of(std::size_t a) { return a % 2; }
std::size_t step(std::size_t pos, std::size_t move) {
    if (move == 0) return pos == 0 ? 0 : pos - 1;
    return pos == kLast ? kLast : pos + 1;
}
std::size_t observation(std::size_t pos, std::size_t mem) { return pos * 2 + mem; }
/// Load status after leaving `pos`: loaded on arrival at 0, emptied on
/// leaving position 6 loaded.
bool next_loaded(std::size_t pos, bool loaded, std::size_t pos_next) {
    if (pos_next == 0) return true;
    if (pos == kLast && loaded) return false;
    return loaded;
}

FiniteSpace observations() {
    std::vector<std::string> labels;
    for (std::size_t p = 0; p < kPositions; ++p)
        for (std::size_t m = 0; m < 2; ++m) labels.push_back("p" + std::to_string(p) + "m" + std::to_string(m));
    return make_space("obs", std::move(labels));
}
FiniteSpace actions() { return make_space("action", {"left-clear", "left-set", "right-clear", "right-set"}); }

void identity_observation(KnownModel& m) {
    for (std::size_t x = 0; x < m.nx(); ++x) set_point(m.p_o, x, x);
}

EnvironmentSpec variant1() {
    // s = (pos, loaded, mem); y = x = o = (pos, mem); z = a.
    const auto obs = observations();
    KnownModel k = KnownModel::allocate({"x_obs", obs.size, obs.labels}, {"y_obs", obs.size, obs.labels},
                                        {"z_action", 4, actions().labels}, obs, actions());
    for (std::size_t y = 0; y < k.ny(); ++y) set_point(k.p_x0, y, y);
    for (std::size_t x = 0; x < k.nx(); ++x)
        for (std::size_t y = 0; y < k.ny(); ++y)
            for (std::size_t a = 0; a < k.na(); ++a) set_point(k.p_x, (x * k.ny() + y) * k.na() + a, y);
    identity_observation(k);
    for (std::size_t x = 0; x < k.nx(); ++x)
        for (std::size_t a = 0; a < k.na(); ++a) set_point(k.p_z, x * k.na() + a, a);

    std::vector<std::string> s_labels;
    auto sid = [](std::size_t pos, std::size_t loaded, std::size_t mem) { return (pos * 2 + loaded) * 2 + mem; };
    for (std::size_t p = 0; p < kPositions; ++p)
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t m = 0; m < 2; ++m)
                s_labels.push_back("p" + std::to_string(p) + (l ? "L" : "E") + "m" + std::to_string(m));
    FullModel f = FullModel::allocate(std::move(k), make_space("s_world", std::move(s_labels)));
    for (std::size_t p = 0; p < kPositions; ++p)
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t m = 0; m < 2; ++m) {
                const std::size_t s = sid(p, l, m);
                for (std::size_t a = 0; a < 4; ++a) {
                    const std::size_t pn = step(p, move_of(a));
                    set_point(f.p_s, s * 4 + a, sid(pn, next_loaded(p, l, pn), memory_of(a)));
                }
                set_point(f.p_y, s, observation(p, m));
                f.r_s[s] = (p == kLast && l) ? 1.0 : 0.0;
            }
    f.p_s0[sid(0, 1, 0)] = 1.0;
    return {EnvironmentName::LoadUnload, 1, std::make_shared<const FullModel>(std::move(f)),
            "no world knowledge: s holds the whole world, observation and action copied through y, x, o and z"};
}

EnvironmentSpec variant2() {
    // s = (pos, loaded); y = pos; z = move; x = o = (pos, mem).
    std::vector<std::string> pos_labels;
    for (std::size_t p = 0; p < kPositions; ++p) pos_labels.push_back("p" + std::to_string(p));
    const auto obs = observations();
    KnownModel k = KnownModel::allocate({"x_posmem", obs.size, obs.labels}, make_space("y_pos", pos_labels),
                                        make_space("z_move", {"left", "right"}), obs, actions());
    for (std::size_t y = 0; y < k.ny(); ++y) set_point(k.p_x0, y, observation(y, 0));
    for (std::size_t x = 0; x < k.nx(); ++x)
        for (std::size_t y = 0; y < k.ny(); ++y)
            for (std::size_t a = 0; a < k.na(); ++a)
                set_point(k.p_x, (x * k.ny() + y) * k.na() + a, observation(y, memory_of(a)));
    identity_observation(k);
    for (std::size_t x = 0; x < k.nx(); ++x)
        for (std::size_t a = 0; a < k.na(); ++a) set_point(k.p_z, x * k.na() + a, move_of(a));

    std::vector<std::string> s_labels;
    for (std::size_t p = 0; p < kPositions; ++p)
        for (std::size_t l = 0; l < 2; ++l) s_labels.push_back("p" + std::to_string(p) + (l ? "L" : "E"));
    FullModel f = FullModel::allocate(std::move(k), make_space("s_posload", std::move(s_labels)));
    for (std::size_t p = 0; p < kPositions; ++p)
        for (std::size_t l = 0; l < 2; ++l) {
            const std::size_t s = p * 2 + l;
            for (std::size_t z = 0; z < 2; ++z) {
                const std::size_t pn = step(p, z);
                set_point(f.p_s, s * 2 + z, pn * 2 + (next_loaded(p, l, pn) ? 1 : 0));
            }
            set_point(f.p_y, s, p);
            f.r_s[s] = (p == kLast && l) ? 1.0 : 0.0;
        }
    f.p_s0[0 * 2 + 1] = 1.0;
    return {EnvironmentName::LoadUnload, 2, std::make_shared<const FullModel>(std::move(f)),
            "memory dynamics known: x = (position, memory) with the memory latch modelled, position copied from y"};
}

enum Status : std::size_t { kLoaded = 0, kUnloaded = 1, kDelivering = 2 };
enum Destination : std::size_t { kLeftEnd = 0, kMiddle = 1, kRightEnd = 2 };

std::size_t destination(std::size_t pos) { return pos == 0 ? kLeftEnd : (pos == kLast ? kRightEnd : kMiddle); }

EnvironmentSpec variant3() {
    // s in {loaded, unloaded, delivering}; y degenerate; z = destination class.
    const auto obs = observations();
    KnownModel k = KnownModel::allocate({"x_posmem", obs.size, obs.labels}, make_space("y_none", 1),
                                        make_space("z_dest", {"left-end", "middle", "right-end"}), obs, actions());
    set_point(k.p_x0, 0, observation(0, 0));
    for (std::size_t p = 0; p < kPositions; ++p)
        for (std::size_t m = 0; m < 2; ++m) {
            const std::size_t x = observation(p, m);
            for (std::size_t a = 0; a < k.na(); ++a) {
                const std::size_t pn = step(p, move_of(a));
                set_point(k.p_x, (x * k.ny() + 0) * k.na() + a, observation(pn, memory_of(a)));
                set_point(k.p_z, x * k.na() + a, destination(pn));
            }
        }
    identity_observation(k);

    FullModel f = FullModel::allocate(std::move(k), make_space("s_load", {"loaded", "unloaded", "delivering"}));
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t z = 0; z < 3; ++z) {
            std::size_t next = kUnloaded;
            if (z == kLeftEnd)
                next = kLoaded;
            else if (s == kLoaded)
                next = z == kRightEnd ? kDelivering : kLoaded;
            set_point(f.p_s, s * 3 + z, next);
        }
    for (std::size_t s = 0; s < 3; ++s) set_point(f.p_y, s, 0);
    f.r_s[kDelivering] = 1.0;
    f.p_s0[kLoaded] = 1.0;
    return {EnvironmentName::LoadUnload, 3, std::make_shared<const FullModel>(std::move(f)),
            "end-point and memory dynamics known: x walks the line and latches memory; s tracks the load"};
}

}  // namespace lu

// --------------------------------------------------------------- clogged pipe

namespace cp {

constexpr std::size_t kSections = 3;
constexpr std::size_t kFlows = 3;
enum NonMemory : std::size_t { kLeft = 0, kRight = 1, kWait = 2, kUnclog = 3 };
constexpr double kFlowChange = 0.1;
constexpr double kDebris[kFlows] = {0.0, 0.3, 0.5};

std::size_t non_memory_of(std::size_t a) { return a / 2; }
std::size_t memory_of(std::size_t a) { return a % 2; }
bool clogged(std::size_t clogs, std::size_t section) { return (clogs >> section) & 1U; }
std::size_t move(std::size_t pos, std::size_t nm) {
    if (nm == kLeft) return pos == 0 ? 0 : pos - 1;
    if (nm == kRight) return pos + 1 == kSections ? pos : pos + 1;
    return pos;
}
/// Debris in the unclogged section moves one section downstream.
std::size_t unclog(std::size_t clogs, std::size_t section) {
    if (!clogged(clogs, section)) return clogs;
    clogs &= ~(std::size_t{1} << section);
    if (section + 1 < kSections) clogs |= std::size_t{1} << (section + 1);
    return clogs;
}
std::size_t observation(std::size_t pos, std::size_t mem, bool here) { return (pos * 2 + mem) * 2 + (here ? 1 : 0); }
/// x = (pos, mem, clog bits) for variants 2 and 3.
std::size_t state_x(std::size_t pos, std::size_t mem, std::size_t clogs) { return (pos * 2 + mem) * 8 + clogs; }

std::vector<std::pair<std::size_t, double>> flow_next(std::size_t flow) {
    std::vector<std::pair<std::size_t, double>> out;
    double stay = 1.0;
    if (flow > 0) {
        out.emplace_back(flow - 1, kFlowChange);
        stay -= kFlowChange;
    }
    if (flow + 1 < kFlows) {
        out.emplace_back(flow + 1, kFlowChange);
        stay -= kFlowChange;
    }
    out.emplace_back(flow, stay);
    return out;
}

/// Distribution over (clogs', flow') after an optional unclog at `section`.
std::vector<std::tuple<std::size_t, std::size_t, double>> pipe_step(std::size_t clogs, std::size_t flow,
                                                                     std::optional<std::size_t> section) {
    const std::size_t base = section ? unclog(clogs, *section) : clogs;
    std::vector<std::tuple<std::size_t, std::size_t, double>> out;
    for (auto [fn, pf] : flow_next(flow)) {
        const double q = kDebris[fn];
        if (q > 0.0) out.emplace_back(base | 1U, fn, pf * q);
        if (q < 1.0) out.emplace_back(base, fn, pf * (1.0 - q));
    }
    return out;
}

FiniteSpace observations() {
    std::vector<std::string> labels;
    for (std::size_t p = 0; p < kSections; ++p)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t c = 0; c < 2; ++c)
                labels.push_back("p" + std::to_string(p) + "m" + std::to_string(m) + (c ? "C" : "F"));
    return make_space("obs", std::move(labels));
}
FiniteSpace actions() {
    return make_space("action", {"left-clear", "left-set", "right-clear", "right-set", "wait-clear", "wait-set",
                                 "unclog-clear", "unclog-set"});
}
FiniteSpace flows() { return make_space("flow", {"clear", "low", "high"}); }

std::vector<std::string> clog_labels() {
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < 8; ++c) {
        std::string l = "c";
        for (std::size_t i = 0; i < kSections; ++i) l += clogged(c, i) ? '1' : '0';
        labels.push_back(l);
    }
    return labels;
}

FiniteSpace x_space_full() {
    std::vector<std::string> labels;
    const auto clogs = clog_labels();
    for (std::size_t p = 0; p < kSections; ++p)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t c = 0; c < 8; ++c)
                labels.push_back("p" + std::to_string(p) + "m" + std::to_string(m) + clogs[c]);
    return make_space("x_posmemclog", std::move(labels));
}

void observe_full_x(KnownModel& k) {
    for (std::size_t p = 0; p < kSections; ++p)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t c = 0; c < 8; ++c) set_point(k.p_o, state_x(p, m, c), observation(p, m, clogged(c, p)));
}

EnvironmentSpec variant1() {
    // s = (clogs, pos, flow); y = (pos, clogged here); z = non-memory action;
    // x = o = (pos, mem, clogged here).
    const auto obs = observations();
    std::vector<std::string> y_labels;
    for (std::size_t p = 0; p < kSections; ++p)
        for (std::size_t c = 0; c < 2; ++c) y_labels.push_back("p" + std::to_string(p) + (c ? "C" : "F"));
    KnownModel k = KnownModel::allocate({"x_obs", obs.size, obs.labels}, make_space("y_poshere", y_labels),
                                        make_space("z_move", {"left", "right", "wait", "unclog"}), obs, actions());
    auto y_pos = [](std::size_t y) { return y / 2; };
    auto y_here = [](std::size_t y) { return (y % 2) == 1; };
    for (std::size_t y = 0; y < k.ny(); ++y) set_point(k.p_x0, y, observation(y_pos(y), 0, y_here(y)));
    for (std::size_t x = 0; x < k.nx(); ++x)
        for (std::size_t y = 0; y < k.ny(); ++y)
            for (std::size_t a = 0; a < k.na(); ++a)
                set_point(k.p_x, (x * k.ny() + y) * k.na() + a, observation(y_pos(y), memory_of(a), y_here(y)));
    for (std::size_t x = 0; x < k.nx(); ++x) set_point(k.p_o, x, x);
    for (std::size_t x = 0; x < k.nx(); ++x)
        for (std::size_t a = 0; a < k.na(); ++a) set_point(k.p_z, x * k.na() + a, non_memory_of(a));

    std::vector<std::string> s_labels;
    const auto clogs = clog_labels();
    const auto flow = flows();
    auto sid = [](std::size_t c, std::size_t p, std::size_t fl) { return (c * kSections + p) * kFlows + fl; };
    for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t p = 0; p < kSections; ++p)
            for (std::size_t fl = 0; fl < kFlows; ++fl)
                s_labels.push_back(clogs[c] + "p" + std::to_string(p) + flow.labels[fl]);
    FullModel f = FullModel::allocate(std::move(k), make_space("s_pipe", std::move(s_labels)));
    for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t p = 0; p < kSections; ++p)
            for (std::size_t fl = 0; fl < kFlows; ++fl) {
                const std::size_t s = sid(c, p, fl);
                for (std::size_t z = 0; z < 4; ++z) {
                    const auto section = z == kUnclog ? std::optional<std::size_t>(p) : std::nullopt;
                    for (auto [cn, fn, pr] : pipe_step(c, fl, section)) f.p_s.at(s * 4 + z, sid(cn, move(p, z), fn)) += pr;
                }
                set_point(f.p_y, s, p * 2 + (clogged(c, p) ? 1 : 0));
                f.r_s[s] = c == 0 ? 1.0 : 0.0;
            }
    f.p_s0[sid(0, 0, 0)] = 1.0;
    return {EnvironmentName::CloggedPipe, 1, std::make_shared<const FullModel>(std::move(f)),
            "only memory known: s holds pipe, position and flow; x = observation with the memory latch modelled"};
}

EnvironmentSpec variant2() {
    // s = (clogs, flow); y = clogs; z = unclogged section or none;
    // x = (pos, mem, clogs copied from y); reward in r_x.
    KnownModel k = KnownModel::allocate(x_space_full(), make_space("y_clogs", clog_labels()),
                                        make_space("z_unclog", {"none", "s0", "s1", "s2"}), observations(), actions());
    for (std::size_t y = 0; y < k.ny(); ++y) set_point(k.p_x0, y, state_x(0, 0, y));
    for (std::size_t p = 0; p < kSections; ++p)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t c = 0; c < 8; ++c) {
                const std::size_t x = state_x(p, m, c);
                for (std::size_t a = 0; a < k.na(); ++a) {
                    const std::size_t nm = non_memory_of(a);
                    for (std::size_t y = 0; y < k.ny(); ++y)
                        set_point(k.p_x, (x * k.ny() + y) * k.na() + a, state_x(move(p, nm), memory_of(a), y));
                    set_point(k.p_z, x * k.na() + a, nm == kUnclog ? p + 1 : 0);
                }
                k.r_x[x] = c == 0 ? 1.0 : 0.0;
            }
    observe_full_x(k);

    std::vector<std::string> s_labels;
    const auto clogs = clog_labels();
    const auto flow = flows();
    for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t fl = 0; fl < kFlows; ++fl) s_labels.push_back(clogs[c] + flow.labels[fl]);
    FullModel f = FullModel::allocate(std::move(k), make_space("s_pipe", std::move(s_labels)));
    for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t fl = 0; fl < kFlows; ++fl) {
            const std::size_t s = c * kFlows + fl;
            for (std::size_t z = 0; z < 4; ++z) {
                const auto section = z == 0 ? std::nullopt : std::optional<std::size_t>(z - 1);
                for (auto [cn, fn, pr] : pipe_step(c, fl, section)) f.p_s.at(s * 4 + z, cn * kFlows + fn) += pr;
            }
            set_point(f.p_y, s, c);
        }
    f.p_s0[0] = 1.0;
    return {EnvironmentName::CloggedPipe, 2, std::make_shared<const FullModel>(std::move(f)),
            "known cart control: x = (position, memory, clog bits from y); z reports the unclogged section"};
}

EnvironmentSpec variant3() {
    // s = flow; y = debris entered section 0; z degenerate; x = (pos, mem, clogs).
    KnownModel k = KnownModel::allocate(x_space_full(), make_space("y_inflow", {"none", "debris"}),
                                        make_space("z_none", 1), observations(), actions());
    for (std::size_t y = 0; y < 2; ++y) set_point(k.p_x0, y, state_x(0, 0, y));
    for (std::size_t p = 0; p < kSections; ++p)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t c = 0; c < 8; ++c) {
                const std::size_t x = state_x(p, m, c);
                for (std::size_t a = 0; a < k.na(); ++a) {
                    const std::size_t nm = non_memory_of(a);
                    const std::size_t base = nm == kUnclog ? unclog(c, p) : c;
                    for (std::size_t y = 0; y < 2; ++y)
                        set_point(k.p_x, (x * k.ny() + y) * k.na() + a,
                                  state_x(move(p, nm), memory_of(a), y ? (base | 1U) : base));
                    set_point(k.p_z, x * k.na() + a, 0);
                }
                k.r_x[x] = c == 0 ? 1.0 : 0.0;
            }
    observe_full_x(k);

    FullModel f = FullModel::allocate(std::move(k), flows());
    for (std::size_t fl = 0; fl < kFlows; ++fl) {
        for (auto [fn, pf] : flow_next(fl)) f.p_s.at(fl, fn) += pf;
        f.p_y.at(fl, 1) = kDebris[fl];
        f.p_y.at(fl, 0) = 1.0 - kDebris[fl];
    }
    f.p_s0[0] = 1.0;
    return {EnvironmentName::CloggedPipe, 3, std::make_shared<const FullModel>(std::move(f)),
            "only incoming flow unknown: pipe, position and memory dynamics known; y reports new debris"};
}

}  // namespace cp

struct SparseRows {
    std::vector<std::size_t> offsets;
    std::vector<SparseEntry> entries;

    explicit SparseRows(const CondTable& table) : offsets(table.num_rows() + 1, 0) {
        for (std::size_t r = 0; r < table.num_rows(); ++r) {
            const auto row = table.row(r);
            for (std::size_t c = 0; c < row.size(); ++c)
                if (row[c] != 0.0) entries.push_back({c, row[c]});
            offsets[r + 1] = entries.size();
        }
    }
    std::span<const SparseEntry> row(std::size_t r) const {
        return {entries.data() + offsets[r], offsets[r + 1] - offsets[r]};
    }
};

/// Sparse kernel of the joint (s, x) chain under a fixed reactive policy.
class JointChain {
public:
    JointChain(const FullModel& model, const Matrix& action_probs)
        : m_(model), k_(model.known), ps_(model.p_s), py_(model.p_y), px_(model.known.p_x), po_(model.known.p_o),
          pz_(model.known.p_z), probs_(action_probs) {
        if (probs_.rows() != k_.no() || probs_.cols() != k_.na())
            throw std::invalid_argument("policy shape does not match the environment");
    }

    std::size_t size() const { return m_.ns() * k_.nx(); }
    std::size_t index(std::size_t s, std::size_t x) const { return s * k_.nx() + x; }

    std::vector<double> initial() const {
        std::vector<double> p(size(), 0.0);
        for (std::size_t s = 0; s < m_.ns(); ++s) {
            if (m_.p_s0[s] == 0.0) continue;
            for (const auto& y : py_.row(s))
                for (std::size_t x = 0; x < k_.nx(); ++x) p[index(s, x)] += m_.p_s0[s] * y.value * k_.px0(x, y.index);
        }
        return p;
    }

    template <class Visit>
    void successors(std::size_t s, std::size_t x, Visit&& visit) const {
        for (std::size_t a = 0; a < k_.na(); ++a) {
            double w = 0.0;
            for (const auto& o : po_.row(x)) w += o.value * probs_(o.index, a);
            if (w == 0.0) continue;
            for (const auto& z : pz_.row(x * k_.na() + a))
                for (const auto& sn : ps_.row(s * k_.nz() + z.index))
                    for (const auto& y : py_.row(sn.index))
                        for (const auto& xn : px_.row((x * k_.ny() + y.index) * k_.na() + a))
                            visit(index(sn.index, xn.index), w * z.value * sn.value * y.value * xn.value);
        }
    }

    double reward(std::size_t i) const { return m_.r_s[i / k_.nx()] + k_.r_x[i % k_.nx()]; }

private:
    const FullModel& m_;
    const KnownModel& k_;
    SparseRows ps_, py_, px_, po_, pz_;
    const Matrix& probs_;
};

std::size_t sample_from(std::span<const double> probs, std::mt19937_64& rng) {
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

}  // namespace

EnvironmentSpec make_load_unload(int variant) {
    check_variant(variant);
    switch (variant) {
        case 1: return lu::variant1();
        case 2: return lu::variant2();
        default: return lu::variant3();
    }
}

EnvironmentSpec make_clogged_pipe(int variant) {
    check_variant(variant);
    switch (variant) {
        case 1: return cp::variant1();
        case 2: return cp::variant2();
        default: return cp::variant3();
    }
}

EnvironmentSpec make_environment(EnvironmentName name, int variant) {
    return name == EnvironmentName::LoadUnload ? make_load_unload(variant) : make_clogged_pipe(variant);
}

Episode sample_episode(const EnvironmentSpec& spec, const Policy& policy, std::size_t horizon, std::uint64_t seed) {
    const FullModel& f = *spec.model;
    const KnownModel& k = f.known;
    if (policy.num_observations() != k.no() || policy.num_actions() != k.na())
        throw std::invalid_argument("policy shape does not match the environment");
    if (horizon == 0) throw std::invalid_argument("horizon must be at least 1");
    std::mt19937_64 rng(seed);
    Episode e;
    e.debug_trace.emplace();
    e.debug_trace->reserve(horizon);
    TraceStep prev;
    for (std::size_t t = 0; t < horizon; ++t) {
        TraceStep cur;
        cur.s = t == 0 ? sample_from(f.p_s0, rng) : sample_from(f.p_s.row(prev.s * k.nz() + prev.z), rng);
        cur.y = sample_from(f.p_y.row(cur.s), rng);
        cur.x = t == 0 ? sample_from(k.p_x0.row(cur.y), rng)
                       : sample_from(k.p_x.row((prev.x * k.ny() + cur.y) * k.na() + prev.a), rng);
        cur.o = sample_from(k.p_o.row(cur.x), rng);
        cur.a = sample_from(policy.action_probs().row(cur.o), rng);
        cur.z = sample_from(k.p_z.row(cur.x * k.na() + cur.a), rng);
        cur.r_s = f.r_s[cur.s];
        cur.r_x = k.r_x[cur.x];
        e.y_seq.push_back(cur.y);
        e.z_seq.push_back(cur.z);
        e.unknown_return += cur.r_s;
        e.debug_trace->push_back(cur);
        prev = cur;
    }
    return e;
}

double exact_return(const FullModel& model, const Policy& policy, std::size_t horizon) {
    const JointChain chain(model, policy.action_probs());
    std::vector<double> p = chain.initial(), next(chain.size());
    double total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] != 0.0) total += p[i] * chain.reward(i);
        if (t + 1 == horizon) break;
        std::fill(next.begin(), next.end(), 0.0);
        const std::size_t nx = model.known.nx();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 0.0) continue;
            const double mass = p[i];
            chain.successors(i / nx, i % nx, [&](std::size_t j, double pr) { next[j] += mass * pr; });
        }
        std::swap(p, next);
    }
    return total;
}

std::size_t reachable_joint_states(const FullModel& model) {
    const Policy uniform = Policy::uniform(model.known.no(), model.known.na());
    const JointChain chain(model, uniform.action_probs());
    const std::size_t nx = model.known.nx();
    std::vector<char> seen(chain.size(), 0);
    std::vector<std::size_t> frontier;
    const auto init = chain.initial();
    for (std::size_t i = 0; i < init.size(); ++i)
        if (init[i] > 0.0) {
            seen[i] = 1;
            frontier.push_back(i);
        }
    while (!frontier.empty()) {
        const std::size_t i = frontier.back();
        frontier.pop_back();
        chain.successors(i / nx, i % nx, [&](std::size_t j, double pr) {
            if (pr > 0.0 && !seen[j]) {
                seen[j] = 1;
                frontier.push_back(j);
            }
        });
    }
    return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
}

VariantEquivalenceReport check_variant_equivalence(const std::array<EnvironmentSpec, 3>& variants,
                                                   const Policy& policy, std::size_t horizon, double tolerance) {
    VariantEquivalenceReport report;
    for (std::size_t i = 0; i < 3; ++i) report.returns[i] = exact_return(variants[i], policy, horizon);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) {
            const double diff = std::abs(report.returns[i] - report.returns[j]);
            report.max_difference = std::max(report.max_difference, diff);
            if (!(diff <= tolerance)) {
                std::ostringstream os;
                os.precision(17);
                os << "variant " << variants[i].variant << " vs variant " << variants[j].variant << ": "
                   << report.returns[i] << " != " << report.returns[j];
                report.mismatches.push_back(os.str());
            }
        }
    return report;
}

VariantEquivalenceReport check_variant_equivalence(EnvironmentName name, const Policy& policy, std::size_t horizon,
                                                   double tolerance) {
    return check_variant_equivalence(
        {make_environment(name, 1), make_environment(name, 2), make_environment(name, 3)}, policy, horizon, tolerance);
}

bool interface_determined_by_observation_action(const KnownModel& m) {
    for (std::size_t o = 0; o < m.no(); ++o) {
        std::size_t sources = 0;
        for (std::size_t x = 0; x < m.nx(); ++x) sources += m.po(o, x) > 0.0 ? 1 : 0;
        if (sources > 1) return false;
    }
    for (std::size_t x = 0; x < m.nx(); ++x) {
        std::set<std::size_t> ys;
        for (std::size_t y = 0; y < m.ny(); ++y) {
            if (m.px0(x, y) > 0.0) ys.insert(y);
            for (std::size_t xp = 0; xp < m.nx(); ++xp)
                for (std::size_t a = 0; a < m.na(); ++a)
                    if (m.px(x, xp, y, a) > 0.0) ys.insert(y);
        }
        if (ys.size() > 1) return false;
        for (std::size_t a = 0; a < m.na(); ++a) {
            std::size_t support = 0;
            for (std::size_t z = 0; z < m.nz(); ++z) support += m.pz(z, x, a) > 0.0 ? 1 : 0;
            if (support != 1) return false;
        }
    }
    return true;
}

}  // namespace pkmdp
