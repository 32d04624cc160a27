#include "pkmdp/model_io.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace pkmdp {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kModelMagic = "pkmdp-model";
constexpr const char* kEpisodesMagic = "pkmdp-episodes";

void write_space(std::ostream& out, const std::string& role, const FiniteSpace& space) {
    for (const auto& label : space.labels)
        if (label.empty() || label.find_first_of(" \t\r\n") != std::string::npos)
            throw ModelFormatError("label '" + label + "' in space " + space.name + " cannot be written");
    if (space.name.empty() || space.name.find_first_of(" \t\r\n") != std::string::npos)
        throw ModelFormatError("space name '" + space.name + "' cannot be written");
    out << "space " << role << ' ' << space.name << ' ' << space.size;
    for (const auto& label : space.labels) out << ' ' << label;
    out << '\n';
}

void write_values(std::ostream& out, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ' ';
        out << format_double(values[i]);
    }
    out << '\n';
}

void write_table(std::ostream& out, const std::string& name, const CondTable& table) {
    out << "table " << name << ' ' << table.num_rows() << ' ' << table.row_size() << '\n';
    for (std::size_t r = 0; r < table.num_rows(); ++r) write_values(out, table.row(r));
}

void write_vector(std::ostream& out, const std::string& name, const std::vector<double>& v) {
    out << "vector " << name << ' ' << v.size() << '\n';
    write_values(out, v);
}

void write_known_body(std::ostream& out, const KnownModel& m) {
    write_space(out, "x", m.x_space);
    write_space(out, "y", m.y_space);
    write_space(out, "z", m.z_space);
    write_space(out, "o", m.o_space);
    write_space(out, "a", m.a_space);
}

void write_known_tables(std::ostream& out, const KnownModel& m) {
    write_table(out, "p_x0", m.p_x0);
    write_table(out, "p_x", m.p_x);
    write_table(out, "p_o", m.p_o);
    write_table(out, "p_z", m.p_z);
    write_vector(out, "r_x", m.r_x);
}

/// Line-oriented tokenizer that skips blank and comment lines.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::istringstream next_line() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            return std::istringstream(line);
        }
        fail("unexpected end of input");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ModelFormatError("line " + std::to_string(line_no_) + ": " + what);
    }

    std::vector<double> read_values(std::size_t count) {
        auto ls = next_line();
        std::vector<double> values;
        values.reserve(count);
        std::string tok;
        while (ls >> tok) values.push_back(parse_double(tok));
        if (values.size() != count)
            fail("expected " + std::to_string(count) + " values, got " + std::to_string(values.size()));
        return values;
    }

    double parse_double(const std::string& tok) const {
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("bad number '" + tok + "'");
        return v;
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

struct ParsedModel {
    std::map<std::string, FiniteSpace> spaces;
    std::map<std::string, std::pair<std::size_t, std::vector<double>>> tables;  // cols, data
    std::map<std::string, std::vector<double>> vectors;
};

ParsedModel parse_model(std::istream& in) {
    Reader reader(in);
    {
        auto ls = reader.next_line();
        std::string magic;
        int version = 0;
        ls >> magic >> version;
        if (magic != kModelMagic || version != 1) reader.fail("not a pkmdp-model version 1 file");
    }
    ParsedModel parsed;
    for (;;) {
        auto ls = reader.next_line();
        std::string kind;
        ls >> kind;
        if (kind == "end") break;
        if (kind == "space") {
            std::string role, name;
            std::size_t size = 0;
            if (!(ls >> role >> name >> size) || size == 0) reader.fail("malformed space line");
            FiniteSpace space{name, size, {}};
            std::string label;
            while (ls >> label) space.labels.push_back(label);
            if (!space.labels.empty() && space.labels.size() != size) reader.fail("label count mismatch");
            if (!parsed.spaces.emplace(role, std::move(space)).second) reader.fail("duplicate space " + role);
        } else if (kind == "table") {
            std::string name;
            std::size_t rows = 0, cols = 0;
            if (!(ls >> name >> rows >> cols)) reader.fail("malformed table line");
            std::vector<double> data;
            data.reserve(rows * cols);
            for (std::size_t r = 0; r < rows; ++r) {
                auto row = reader.read_values(cols);
                data.insert(data.end(), row.begin(), row.end());
            }
            parsed.tables[name] = {cols, std::move(data)};
        } else if (kind == "vector") {
            std::string name;
            std::size_t n = 0;
            if (!(ls >> name >> n)) reader.fail("malformed vector line");
            parsed.vectors[name] = reader.read_values(n);
        } else {
            reader.fail("unknown record '" + kind + "'");
        }
    }
    return parsed;
}

const FiniteSpace& need_space(const ParsedModel& p, const std::string& role) {
    auto it = p.spaces.find(role);
    if (it == p.spaces.end()) throw ModelFormatError("missing space " + role);
    return it->second;
}

void fill_table(const ParsedModel& p, const std::string& name, CondTable& table) {
    auto it = p.tables.find(name);
    if (it == p.tables.end()) throw ModelFormatError("missing table " + name);
    if (it->second.first != table.row_size() || it->second.second.size() != table.probs().size())
        throw ModelFormatError("table " + name + " has the wrong shape");
    table.probs() = it->second.second;
}

std::vector<double> need_vector(const ParsedModel& p, const std::string& name, std::size_t n) {
    auto it = p.vectors.find(name);
    if (it == p.vectors.end()) throw ModelFormatError("missing vector " + name);
    if (it->second.size() != n) throw ModelFormatError("vector " + name + " has the wrong length");
    return it->second;
}

KnownModel build_known(const ParsedModel& p) {
    KnownModel m = KnownModel::allocate(need_space(p, "x"), need_space(p, "y"), need_space(p, "z"),
                                        need_space(p, "o"), need_space(p, "a"));
    fill_table(p, "p_x0", m.p_x0);
    fill_table(p, "p_x", m.p_x);
    fill_table(p, "p_o", m.p_o);
    fill_table(p, "p_z", m.p_z);
    m.r_x = need_vector(p, "r_x", m.nx());
    return m;
}

}  // namespace

void write_known_model(std::ostream& out, const KnownModel& model) {
    out << kModelMagic << " 1\n";
    write_known_body(out, model);
    write_known_tables(out, model);
    out << "end\n";
}

void write_full_model(std::ostream& out, const FullModel& model) {
    out << kModelMagic << " 1\n";
    write_known_body(out, model.known);
    write_space(out, "s", model.s_space);
    write_known_tables(out, model.known);
    write_vector(out, "p_s0", model.p_s0);
    write_table(out, "p_s", model.p_s);
    write_table(out, "p_y", model.p_y);
    write_vector(out, "r_s", model.r_s);
    out << "end\n";
}

KnownModel read_known_model(std::istream& in) { return build_known(parse_model(in)); }

FullModel read_full_model(std::istream& in) {
    const ParsedModel p = parse_model(in);
    FullModel m = FullModel::allocate(build_known(p), need_space(p, "s"));
    m.p_s0 = need_vector(p, "p_s0", m.ns());
    fill_table(p, "p_s", m.p_s);
    fill_table(p, "p_y", m.p_y);
    m.r_s = need_vector(p, "r_s", m.ns());
    return m;
}

void write_episodes(std::ostream& out, const std::vector<Episode>& episodes, const std::vector<Policy>& policies) {
    if (episodes.size() != policies.size()) throw std::invalid_argument("one policy per episode is required");
    out << kEpisodesMagic << " 1\n";
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const Episode& e = episodes[i];
        out << "episode " << e.horizon() << ' ' << format_double(e.unknown_return) << ' ' << e.policy_index << '\n';
        out << 'y';
        for (auto v : e.y_seq) out << ' ' << v;
        out << "\nz";
        for (auto v : e.z_seq) out << ' ' << v;
        out << '\n';
        const Matrix& logits = policies[i].logits();
        out << "policy " << logits.rows() << ' ' << logits.cols() << '\n';
        for (std::size_t o = 0; o < logits.rows(); ++o) write_values(out, logits.row(o));
    }
    out << "end\n";
}

void read_episodes(std::istream& in, std::vector<Episode>& episodes, std::vector<Policy>& policies) {
    Reader reader(in);
    {
        auto ls = reader.next_line();
        std::string magic;
        int version = 0;
        ls >> magic >> version;
        if (magic != kEpisodesMagic || version != 1) reader.fail("not a pkmdp-episodes version 1 file");
    }
    auto read_ids = [&](char tag, std::size_t n) {
        auto ls = reader.next_line();
        char got = 0;
        ls >> got;
        if (got != tag) reader.fail(std::string("expected '") + tag + "' line");
        std::vector<std::size_t> ids;
        std::size_t v = 0;
        while (ls >> v) ids.push_back(v);
        if (ids.size() != n) reader.fail("sequence length mismatch");
        return ids;
    };
    for (;;) {
        auto ls = reader.next_line();
        std::string kind;
        ls >> kind;
        if (kind == "end") break;
        if (kind != "episode") reader.fail("expected 'episode'");
        std::size_t horizon = 0;
        std::string ret;
        Episode e;
        if (!(ls >> horizon >> ret >> e.policy_index)) reader.fail("malformed episode line");
        e.unknown_return = reader.parse_double(ret);
        e.y_seq = read_ids('y', horizon);
        e.z_seq = read_ids('z', horizon);
        auto ps = reader.next_line();
        std::string tag;
        std::size_t rows = 0, cols = 0;
        if (!(ps >> tag >> rows >> cols) || tag != "policy") reader.fail("expected 'policy'");
        Matrix logits(rows, cols);
        for (std::size_t o = 0; o < rows; ++o) {
            const auto row = reader.read_values(cols);
            std::copy(row.begin(), row.end(), logits.row(o).begin());
        }
        episodes.push_back(std::move(e));
        policies.emplace_back(std::move(logits));
    }
}

}  // namespace pkmdp
