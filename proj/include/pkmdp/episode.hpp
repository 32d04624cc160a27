#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace pkmdp {

/// Full per-slice record of a simulated trial. Never consumed by the learner.
struct TraceStep {
    std::size_t s = 0, y = 0, x = 0, o = 0, a = 0, z = 0;
    double r_s = 0.0;
    double r_x = 0.0;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// What the learner keeps from one trial: the interface sequences revealed
/// after the trial and the realized unknown-state return.
struct Episode {
    std::vector<std::size_t> y_seq;
    std::vector<std::size_t> z_seq;
    double unknown_return = 0.0;
    std::size_t policy_index = 0;
    std::optional<std::vector<TraceStep>> debug_trace;

    std::size_t horizon() const { return y_seq.size(); }

    /// Sum of r_x over the trace; zero when no trace is attached.
    double known_return_from_trace() const;

    friend bool operator==(const Episode&, const Episode&) = default;
};

}  // namespace pkmdp
