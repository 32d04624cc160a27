#include "pkmdp/model.hpp"
#include "pkmdp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pkmdp {

double log_sum_exp(std::span<const double> values) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) hi = std::max(hi, v);
    if (!std::isfinite(hi)) return hi;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - hi);
    return hi + std::log(sum);
}

FiniteSpace make_space(std::string name, std::size_t size) {
    if (size == 0) throw std::invalid_argument("space '" + name + "' must have at least one element");
    return FiniteSpace{std::move(name), size, {}};
}

FiniteSpace make_space(std::string name, std::vector<std::string> labels) {
    if (labels.empty()) throw std::invalid_argument("space '" + name + "' must have at least one element");
    const std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() != labels.size()) throw std::invalid_argument("space '" + name + "' has duplicate labels");
    const std::size_t size = labels.size();
    return FiniteSpace{std::move(name), size, std::move(labels)};
}

CondTable::CondTable(FiniteSpace child, std::vector<FiniteSpace> parents)
    : child_(std::move(child)), parents_(std::move(parents)), num_rows_(1) {
    if (child_.size == 0) throw std::invalid_argument("table child space is empty");
    for (const auto& p : parents_) {
        if (p.size == 0) throw std::invalid_argument("table parent space is empty");
        num_rows_ *= p.size;
    }
    probs_.assign(num_rows_ * child_.size, 0.0);
}

std::size_t CondTable::row_index(std::span<const std::size_t> parent_values) const {
    if (parent_values.size() != parents_.size()) throw std::invalid_argument("wrong number of parent values");
    std::size_t r = 0;
    for (std::size_t i = 0; i < parents_.size(); ++i) {
        if (parent_values[i] >= parents_[i].size) throw std::out_of_range("parent value out of range");
        r = r * parents_[i].size + parent_values[i];
    }
    return r;
}

std::vector<std::size_t> CondTable::parent_values(std::size_t row) const {
    std::vector<std::size_t> values(parents_.size());
    for (std::size_t i = parents_.size(); i-- > 0;) {
        values[i] = row % parents_[i].size;
        row /= parents_[i].size;
    }
    return values;
}

std::string CondTable::describe_row(std::size_t row) const {
    const auto values = parent_values(row);
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ", ";
        os << parents_[i].name << '=';
        if (!parents_[i].labels.empty())
            os << parents_[i].labels[values[i]];
        else
            os << values[i];
    }
    os << ')';
    return os.str();
}

KnownModel KnownModel::allocate(FiniteSpace x, FiniteSpace y, FiniteSpace z, FiniteSpace o, FiniteSpace a) {
    KnownModel m;
    m.p_x0 = CondTable(x, {y});
    m.p_x = CondTable(x, {x, y, a});
    m.p_o = CondTable(o, {x});
    m.p_z = CondTable(z, {x, a});
    m.r_x.assign(x.size, 0.0);
    m.x_space = std::move(x);
    m.y_space = std::move(y);
    m.z_space = std::move(z);
    m.o_space = std::move(o);
    m.a_space = std::move(a);
    return m;
}

FullModel FullModel::allocate(KnownModel known, FiniteSpace s) {
    FullModel m;
    m.p_s = CondTable(s, {s, known.z_space});
    m.p_y = CondTable(known.y_space, {s});
    m.p_s0.assign(s.size, 0.0);
    m.r_s.assign(s.size, 0.0);
    m.s_space = std::move(s);
    m.known = std::move(known);
    return m;
}

std::string ValidationReport::summary() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < problems.size(); ++i) {
        if (i) os << '\n';
        os << problems[i];
    }
    return os.str();
}

namespace {

void merge(ValidationReport& into, ValidationReport from) {
    for (auto& p : from.problems) into.problems.push_back(std::move(p));
}

void check_space(ValidationReport& report, const FiniteSpace& space) {
    if (space.size == 0) report.problems.push_back("space '" + space.name + "' is empty");
    if (!space.labels.empty()) {
        if (space.labels.size() != space.size)
            report.problems.push_back("space '" + space.name + "' has " + std::to_string(space.labels.size()) +
                                      " labels for " + std::to_string(space.size) + " elements");
        const std::set<std::string> distinct(space.labels.begin(), space.labels.end());
        if (distinct.size() != space.labels.size())
            report.problems.push_back("space '" + space.name + "' has duplicate labels");
    }
}

void check_signature(ValidationReport& report, const CondTable& table, const std::string& name,
                     const FiniteSpace& child, const std::vector<FiniteSpace>& parents) {
    bool same = table.child() == child && table.parents().size() == parents.size();
    for (std::size_t i = 0; same && i < parents.size(); ++i) same = table.parents()[i] == parents[i];
    if (!same) report.problems.push_back(name + ": table does not have the expected child/parent spaces");
}

void check_vector(ValidationReport& report, const std::vector<double>& v, std::size_t size,
                  const std::string& name) {
    if (v.size() != size) {
        report.problems.push_back(name + ": expected " + std::to_string(size) + " entries, got " +
                                  std::to_string(v.size()));
        return;
    }
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) report.problems.push_back(name + "[" + std::to_string(i) + "] is not finite");
}

}  // namespace

ValidationReport validate_table(const CondTable& table, const std::string& name) {
    ValidationReport report;
    if (table.probs().size() != table.num_rows() * table.row_size()) {
        report.problems.push_back(name + ": storage size does not match its spaces");
        return report;
    }
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        const auto row = table.row(r);
        double sum = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!(row[c] >= 0.0) || !std::isfinite(row[c])) {
                std::ostringstream os;
                os << name << ": entry " << table.child().name << '=' << c << " given " << table.describe_row(r)
                   << " is " << row[c];
                report.problems.push_back(os.str());
            }
            sum += row[c];
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            std::ostringstream os;
            os.precision(17);
            os << name << ": row " << table.describe_row(r) << " sums to " << sum;
            report.problems.push_back(os.str());
        }
    }
    return report;
}

ValidationReport validate_known_model(const KnownModel& m) {
    ValidationReport report;
    for (const auto* s : {&m.x_space, &m.y_space, &m.z_space, &m.o_space, &m.a_space}) check_space(report, *s);
    if (!report.ok()) return report;
    check_signature(report, m.p_x0, "p_x0", m.x_space, {m.y_space});
    check_signature(report, m.p_x, "p_x", m.x_space, {m.x_space, m.y_space, m.a_space});
    check_signature(report, m.p_o, "p_o", m.o_space, {m.x_space});
    check_signature(report, m.p_z, "p_z", m.z_space, {m.x_space, m.a_space});
    if (!report.ok()) return report;
    merge(report, validate_table(m.p_x0, "p_x0"));
    merge(report, validate_table(m.p_x, "p_x"));
    merge(report, validate_table(m.p_o, "p_o"));
    merge(report, validate_table(m.p_z, "p_z"));
    check_vector(report, m.r_x, m.nx(), "r_x");
    return report;
}

ValidationReport validate_full_model(const FullModel& m) {
    ValidationReport report = validate_known_model(m.known);
    check_space(report, m.s_space);
    if (!report.ok()) return report;
    check_signature(report, m.p_s, "p_s", m.s_space, {m.s_space, m.known.z_space});
    check_signature(report, m.p_y, "p_y", m.known.y_space, {m.s_space});
    if (!report.ok()) return report;
    merge(report, validate_table(m.p_s, "p_s"));
    merge(report, validate_table(m.p_y, "p_y"));
    check_vector(report, m.r_s, m.ns(), "r_s");
    check_vector(report, m.p_s0, m.ns(), "p_s0");
    if (m.p_s0.size() == m.ns()) {
        double sum = 0.0;
        for (double p : m.p_s0) {
            if (p < 0.0) report.problems.push_back("p_s0 has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) report.problems.push_back("p_s0 does not sum to 1");
    }
    return report;
}

}  // namespace pkmdp
