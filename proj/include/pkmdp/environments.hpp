#pragma once

#include "pkmdp/episode.hpp"
#include "pkmdp/model.hpp"
#include "pkmdp/policy.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pkmdp {

enum class EnvironmentName { LoadUnload, CloggedPipe };

EnvironmentName parse_environment_name(const std::string& name);
std::string to_string(EnvironmentName name);

struct EnvironmentSpec {
    EnvironmentName name = EnvironmentName::LoadUnload;
    int variant = 1;
    std::shared_ptr<const FullModel> model;
    std::string description;

    const KnownModel& known() const { return model->known; }
    std::shared_ptr<const KnownModel> known_ptr() const {
        return std::shared_ptr<const KnownModel>(model, &model->known);
    }
};

/**
 * Load-unload: a cart on a line of seven positions with one memory bit.
 * Observation = (position, memory), action = {left, right} x {clear, set}.
 * The cart is loaded in any slice it occupies position 0; a slice spent at
 * position 6 while loaded earns 1 and the cart is empty from the next slice.
 *
 *   variant 1: s is the whole world, x = y = o is the observation, z = a.
 *   variant 2: s = (position, load status), y = position, z = movement,
 *              x = (position, memory) with the memory latch known.
 *   variant 3: s in {loaded, unloaded, unloading}, y degenerate,
 *              z = {left end, middle, right end} destination,
 *              x = (position, memory) with line-walk and latch known.
 */
EnvironmentSpec make_load_unload(int variant);

/**
 * Clogged pipe: three pipe sections, agent position in {0,1,2}, one memory
 * bit and an incoming flow in {clear, low, high}. Observation =
 * (position, memory, clogged here), action = {left, right, wait, unclog} x
 * {clear, set}. Reward 1 in every slice with all sections clear.
 *
 * Transition order: the unclog action pushes debris at the agent's section
 * one section downstream (off the end for section 2), the flow moves to an
 * adjacent level with probability 0.1 each, new debris enters section 0 with
 * probability 0 / 0.3 / 0.5 for the new flow level, then the agent moves and
 * sets its memory bit.
 *
 *   variant 1: only the memory latch known; y = (position, clogged here),
 *              z = non-memory action.
 *   variant 2: x = (position, memory, clog bits copied from y), y = clog bits,
 *              z = unclogged section or none, reward in r_x.
 *   variant 3: s = flow, y = new debris entered, z degenerate, everything else
 *              known, reward in r_x.
 */
EnvironmentSpec make_clogged_pipe(int variant);

EnvironmentSpec make_environment(EnvironmentName name, int variant);

inline constexpr std::size_t kLoadUnloadWorldStates = 7 * 2 * 2;
inline constexpr std::size_t kCloggedPipeWorldStates = 8 * 3 * 2 * 3;

/// Draws H slices from the full model in generative order s, y, x, o, a, z.
Episode sample_episode(const EnvironmentSpec& spec, const Policy& policy, std::size_t horizon, std::uint64_t seed);

/// Expected sum of r_s + r_x over H slices, by propagating the exact joint
/// distribution of (s, x).
double exact_return(const FullModel& model, const Policy& policy, std::size_t horizon);
inline double exact_return(const EnvironmentSpec& spec, const Policy& policy, std::size_t horizon) {
    return exact_return(*spec.model, policy, horizon);
}

/// Number of (s, x) pairs reachable from the initial distribution under a
/// policy with full support.
std::size_t reachable_joint_states(const FullModel& model);

struct VariantEquivalenceReport {
    std::array<double, 3> returns{};
    double max_difference = 0.0;
    std::vector<std::string> mismatches;  ///< e.g. "variant 1 vs variant 3: ..."

    bool ok() const { return mismatches.empty(); }
};

inline constexpr double kVariantEquivalenceTolerance = 1e-9;

VariantEquivalenceReport check_variant_equivalence(const std::array<EnvironmentSpec, 3>& variants,
                                                   const Policy& policy, std::size_t horizon,
                                                   double tolerance = kVariantEquivalenceTolerance);
VariantEquivalenceReport check_variant_equivalence(EnvironmentName name, const Policy& policy,
                                                   std::size_t horizon,
                                                   double tolerance = kVariantEquivalenceTolerance);

/// True when, for every x, at most one y can produce it and every (x, a)
/// emits a single z, i.e. the interface values are recoverable from the
/// observation and action in the same slice when o determines x.
bool interface_determined_by_observation_action(const KnownModel& model);

}  // namespace pkmdp
