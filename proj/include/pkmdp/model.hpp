#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pkmdp {

/// A finite set of values identified by ids 0..size-1, optionally labelled.
struct FiniteSpace {
    std::string name;
    std::size_t size = 1;
    std::vector<std::string> labels;

    friend bool operator==(const FiniteSpace&, const FiniteSpace&) = default;
};

FiniteSpace make_space(std::string name, std::size_t size);
FiniteSpace make_space(std::string name, std::vector<std::string> labels);

/**
 * Conditional probability table p(child | parents).
 *
 * Rows are indexed by the parent tuple in row-major order (the first parent
 * varies slowest); each row holds one probability per child value. A table
 * with no parents has a single row.
 */
class CondTable {
public:
    CondTable() = default;
    CondTable(FiniteSpace child, std::vector<FiniteSpace> parents);

    const FiniteSpace& child() const { return child_; }
    const std::vector<FiniteSpace>& parents() const { return parents_; }

    std::size_t num_rows() const { return num_rows_; }
    std::size_t row_size() const { return child_.size; }

    std::size_t row_index(std::span<const std::size_t> parent_values) const;
    std::vector<std::size_t> parent_values(std::size_t row) const;

    std::span<const double> row(std::size_t r) const {
        return {probs_.data() + r * child_.size, child_.size};
    }
    std::span<double> row(std::size_t r) { return {probs_.data() + r * child_.size, child_.size}; }

    double operator()(std::size_t row, std::size_t child) const { return probs_[row * child_.size + child]; }
    double& at(std::size_t row, std::size_t child) { return probs_[row * child_.size + child]; }

    const std::vector<double>& probs() const { return probs_; }
    std::vector<double>& probs() { return probs_; }

    /// Human-readable parent tuple for diagnostics, e.g. "(x=3, y=0)".
    std::string describe_row(std::size_t row) const;

    friend bool operator==(const CondTable&, const CondTable&) = default;

private:
    FiniteSpace child_;
    std::vector<FiniteSpace> parents_;
    std::size_t num_rows_ = 0;
    std::vector<double> probs_;
};

/**
 * The part of a partially known world the learner is given: spaces for the
 * known state x, the interface variables y and z, observations and actions,
 * with their conditionals and the known-state reward.
 *
 *   p_x0 : x0 | y0
 *   p_x  : x' | x, y', a
 *   p_o  : o  | x
 *   p_z  : z  | x, a
 */
struct KnownModel {
    FiniteSpace x_space, y_space, z_space, o_space, a_space;
    CondTable p_x0;
    CondTable p_x;
    CondTable p_o;
    CondTable p_z;
    std::vector<double> r_x;

    std::size_t nx() const { return x_space.size; }
    std::size_t ny() const { return y_space.size; }
    std::size_t nz() const { return z_space.size; }
    std::size_t no() const { return o_space.size; }
    std::size_t na() const { return a_space.size; }

    double px0(std::size_t x, std::size_t y0) const { return p_x0(y0, x); }
    double px(std::size_t x_next, std::size_t x, std::size_t y_next, std::size_t a) const {
        return p_x((x * ny() + y_next) * na() + a, x_next);
    }
    double po(std::size_t o, std::size_t x) const { return p_o(x, o); }
    double pz(std::size_t z, std::size_t x, std::size_t a) const { return p_z(x * na() + a, z); }

    /// Tables allocated with the right signatures and zero-filled.
    static KnownModel allocate(FiniteSpace x, FiniteSpace y, FiniteSpace z, FiniteSpace o, FiniteSpace a);

    friend bool operator==(const KnownModel&, const KnownModel&) = default;
};

/// Simulator-side world: the known part plus the unknown state s.
///
///   p_s0 : s0
///   p_s  : s' | s, z
///   p_y  : y  | s
struct FullModel {
    KnownModel known;
    FiniteSpace s_space;
    std::vector<double> p_s0;
    CondTable p_s;
    CondTable p_y;
    std::vector<double> r_s;

    std::size_t ns() const { return s_space.size; }
    double ps(std::size_t s_next, std::size_t s, std::size_t z) const { return p_s(s * known.nz() + z, s_next); }
    double py(std::size_t y, std::size_t s) const { return p_y(s, y); }

    /// Allocates the unknown-side tables around an existing known model.
    static FullModel allocate(KnownModel known, FiniteSpace s);

    friend bool operator==(const FullModel&, const FullModel&) = default;
};

struct ValidationReport {
    std::vector<std::string> problems;

    bool ok() const { return problems.empty(); }
    std::string summary() const;
};

inline constexpr double kRowSumTolerance = 1e-12;

ValidationReport validate_table(const CondTable& table, const std::string& table_name);
ValidationReport validate_known_model(const KnownModel& model);
ValidationReport validate_full_model(const FullModel& model);

}  // namespace pkmdp
