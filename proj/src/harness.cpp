#include "pkmdp/harness.hpp"

#include "pkmdp/estimator.hpp"
#include "pkmdp/model_io.hpp"
#include "pkmdp/oracle.hpp"
#include "pkmdp/severed_dp.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace pkmdp {

std::size_t default_episode_count(EnvironmentName env) { return env == EnvironmentName::LoadUnload ? 80 : 50; }

std::size_t ExperimentConfig::episode_count() const { return episodes.value_or(default_episode_count(env)); }

void ExperimentConfig::validate() const {
    if (runs < 1) throw std::invalid_argument("runs must be at least 1");
    if (episode_count() < 1) throw std::invalid_argument("episodes must be at least 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (variant && (*variant < 1 || *variant > 3)) throw std::invalid_argument("variant must be 1, 2, 3 or all");
    optimizer.validate();
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw std::invalid_argument("bad value '" + value + "' for " + key);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& value) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "env") {
        c.env = parse_environment_name(value);
    } else if (key == "variant") {
        if (value == "all")
            c.variant.reset();
        else
            c.variant = parse_number<int>(key, value);
    } else if (key == "runs") {
        c.runs = parse_number<std::size_t>(key, value);
    } else if (key == "episodes") {
        c.episodes = parse_number<std::size_t>(key, value);
    } else if (key == "horizon") {
        c.horizon = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
        c.base_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "out") {
        c.output_path = value;
    } else if (key == "threads") {
        c.threads = parse_number<std::size_t>(key, value);
    } else if (key == "max_iterations") {
        c.optimizer.max_iterations = parse_number<int>(key, value);
    } else if (key == "initial_step") {
        c.optimizer.line_search.initial_step = parse_number<double>(key, value);
    } else if (key == "contraction") {
        c.optimizer.line_search.contraction = parse_number<double>(key, value);
    } else if (key == "sufficient_increase") {
        c.optimizer.line_search.sufficient_increase = parse_number<double>(key, value);
    } else if (key == "max_contractions") {
        c.optimizer.line_search.max_contractions = parse_number<int>(key, value);
    } else if (key == "max_expansions") {
        c.optimizer.line_search.max_expansions = parse_number<int>(key, value);
    } else if (key == "restart_period") {
        c.optimizer.restart_period = parse_number<int>(key, value);
    } else if (key == "convergence_tol") {
        c.optimizer.convergence_tol = parse_number<double>(key, value);
    } else if (key == "direction_rule") {
        c.optimizer.direction_rule = parse_direction_rule(value);
    } else {
        throw std::invalid_argument("unknown config key '" + raw_key + "'");
    }
}

void load_config_file(ExperimentConfig& config, std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        apply_config_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

double LearningCurve::mean(std::size_t episode) const {
    double sum = 0.0;
    for (std::size_t r = 0; r < runs(); ++r) sum += returns(r, episode);
    return sum / static_cast<double>(runs());
}

double LearningCurve::std_dev(std::size_t episode) const {
    const double mu = mean(episode);
    double sum = 0.0;
    for (std::size_t r = 0; r < runs(); ++r) sum += (returns(r, episode) - mu) * (returns(r, episode) - mu);
    return std::sqrt(sum / static_cast<double>(runs()));
}

double LearningCurve::final_mean(std::size_t count) const {
    count = std::min(count, episodes());
    double sum = 0.0;
    for (std::size_t e = episodes() - count; e < episodes(); ++e) sum += mean(e);
    return sum / static_cast<double>(count);
}

namespace {

std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t episode) {
    std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                      static_cast<std::uint32_t>(episode), 0x706b6d64U};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t{words[0]} << 32) | words[1];
}

}  // namespace

std::vector<double> run_learning(const EnvironmentSpec& spec, std::size_t episodes, std::size_t horizon,
                                 std::uint64_t seed, const OptimizerConfig& optimizer) {
    ExperienceBuffer buffer(spec.known_ptr());
    Policy policy = Policy::uniform(spec.known().no(), spec.known().na());
    std::vector<double> returns(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
        try {
            policy = greedy_learning_step(buffer, policy, optimizer);
            returns[e] = exact_return(spec, policy, horizon);
            Episode episode = sample_episode(spec, policy, horizon, episode_seed(seed, e));
            episode.debug_trace.reset();
            buffer.add_episode(std::move(episode), policy);
        } catch (const std::exception& ex) {
            throw ExperimentError("episode " + std::to_string(e) + ": " + ex.what());
        }
    }
    return returns;
}

LearningCurve run_experiment(const ExperimentConfig& config, const EnvironmentSpec& spec) {
    config.validate();
    const std::size_t runs = config.runs, episodes = config.episode_count();
    LearningCurve curve{Matrix(runs, episodes)};

    std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, runs);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::vector<std::string> errors(runs);
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < runs;) {
            try {
                const auto row = run_learning(spec, episodes, config.horizon, config.base_seed + r, config.optimizer);
                std::copy(row.begin(), row.end(), curve.returns.row(r).begin());
            } catch (const std::exception& ex) {
                const std::lock_guard lock(error_mutex);
                errors[r] = ex.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (std::size_t r = 0; r < runs; ++r)
        if (!errors[r].empty())
            throw ExperimentError(to_string(spec.name) + " variant " + std::to_string(spec.variant) + ", run " +
                                  std::to_string(r) + ", " + errors[r]);
    return curve;
}

namespace {

std::string csv_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace

void write_csv(std::ostream& out, const LearningCurve& curve) {
    out << "episode,mean,std";
    for (std::size_t r = 0; r < curve.runs(); ++r) out << ",run_" << r;
    out << '\n';
    for (std::size_t e = 0; e < curve.episodes(); ++e) {
        out << e + 1 << ',' << csv_number(curve.mean(e)) << ',' << csv_number(curve.std_dev(e));
        for (std::size_t r = 0; r < curve.runs(); ++r) out << ',' << csv_number(curve.returns(r, e));
        out << '\n';
    }
}

void emit_csv(const LearningCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_csv(out, curve);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::filesystem::path variant_output_path(const std::filesystem::path& base, int variant) {
    std::filesystem::path out = base;
    out.replace_filename(base.stem().string() + "_variant" + std::to_string(variant) + base.extension().string());
    return out;
}

// ------------------------------------------------------------------ verify

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// max_i |a_i - b_i| / max(max_i |a_i|, floor)
double max_norm_relative_error(const std::vector<double>& exact, const std::vector<double>& approx,
                               double floor = 1e-8) {
    double diff = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) diff = std::max(diff, std::abs(exact[i] - approx[i]));
    return diff / std::max(max_abs(exact), floor);
}

VerifyCheck finish(std::string name, double worst, double tolerance, std::string detail = {}) {
    return {std::move(name), worst <= tolerance, worst, tolerance, std::move(detail)};
}

// Random Y; X, O, A and Z drawn from the severed model.
Episode simulate_severed(const KnownModel& m, const Policy& policy, std::size_t horizon, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](std::span<const double> p) {
        double u = unit(rng);
        for (std::size_t k = 0; k + 1 < p.size(); ++k) {
            if (u < p[k]) return k;
            u -= p[k];
        }
        return p.size() - 1;
    };
    std::uniform_int_distribution<std::size_t> pick_y(0, m.ny() - 1);
    Episode ep;
    std::size_t x = 0, a = 0;
    for (std::size_t t = 0; t < horizon; ++t) {
        ep.y_seq.push_back(pick_y(rng));
        x = t == 0 ? draw(m.p_x0.row(ep.y_seq[0])) : draw(m.p_x.row((x * m.ny() + ep.y_seq[t]) * m.na() + a));
        a = draw(policy.action_probs().row(draw(m.p_o.row(x))));
        ep.z_seq.push_back(draw(m.p_z.row(x * m.na() + a)));
    }
    ep.unknown_return = 3.0 * unit(rng);
    return ep;
}

FullModel corrupt(const FullModel& model) {
    FullModel out = model;
    for (std::size_t r = 0; r < out.p_s.num_rows(); ++r)
        for (auto& p : out.p_s.row(r)) p = 0.9 * p + 0.1 / static_cast<double>(out.ns());
    return out;
}

}  // namespace

std::vector<VerifyCheck> run_verification(const VerifyOptions& options) {
    const double scale = options.tolerance_scale;
    std::mt19937_64 rng(options.seed);
    std::vector<VerifyCheck> checks;

    {
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const auto inst = oracle::random_tiny_instance(rng, {.sparsity = i % 2 ? 0.3 : 0.0});
            const auto bf = oracle::brute_force_KV(inst);
            const auto fb = forward_backward(inst.model, inst.policy, inst.y_seq, inst.z_seq);
            const double k = std::exp(fb.log_K);
            worst = std::max({worst, std::abs(k - bf.K), std::abs(fb.v_ratio * k - bf.V)});
        }
        checks.push_back(finish("oracle agreement (K, V) on 200 tiny instances", worst, 1e-9 * scale));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const auto inst = oracle::random_tiny_instance(rng);
            const CompiledModel compiled(std::make_shared<const KnownModel>(inst.model));
            const SeveredModel severed(compiled, inst.policy);
            const auto g = sequence_gradient(severed, inst.y_seq, inst.z_seq);
            const auto& p0 = inst.policy.action_probs();
            auto at = [&](std::span<const double> p) {
                Matrix probs(p0.rows(), p0.cols());
                std::copy(p.begin(), p.end(), probs.data().begin());
                return sequence_gradient(SeveredModel(compiled, std::move(probs)), inst.y_seq, inst.z_seq);
            };
            const auto fd_k = oracle::finite_difference(
                [&](std::span<const double> p) { return at(p).log_K; }, p0.data(), 1e-6);
            const auto fd_v = oracle::finite_difference(
                [&](std::span<const double> p) {
                    const auto v = at(p);
                    return v.v_ratio * std::exp(v.log_K);
                },
                p0.data(), 1e-6);
            const double k = std::exp(g.log_K);
            std::vector<double> dv(g.grad_V_over_K.data());
            for (auto& v : dv) v *= k;
            worst = std::max({worst, max_norm_relative_error(g.grad_log_K.data(), fd_k),
                              max_norm_relative_error(dv, fd_v)});
        }
        checks.push_back(finish("grad log K and grad V vs finite differences (50 instances)", worst, 1e-5 * scale));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const std::size_t nx = 2 + i % 2, no = 2, na = 2 + (i / 2) % 2;
            auto model = std::make_shared<const KnownModel>(oracle::random_known_model(rng, nx, 2, 2, no, na));
            ExperienceBuffer buffer(model);
            for (int e = 0; e < 3; ++e) {
                const Policy behaviour = oracle::random_policy(rng, no, na);
                buffer.add_episode(simulate_severed(*model, behaviour, 3, rng), behaviour);
            }
            const Policy target = oracle::random_policy(rng, no, na);
            const auto g = estimate_gradient(buffer, target);
            const auto fd = oracle::finite_difference(
                [&](std::span<const double> l) {
                    Matrix logits(no, na);
                    std::copy(l.begin(), l.end(), logits.data().begin());
                    return estimate_return(buffer, Policy(std::move(logits)));
                },
                target.logits().data(), 1e-6);
            worst = std::max(worst, max_norm_relative_error(g.grad_logits.data(), fd));
        }
        checks.push_back(finish("estimator gradient vs finite differences (20 buffers)", worst, 1e-5 * scale));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto inst = oracle::random_tiny_instance(rng);
            const auto fb = oracle::unscaled_forward_backward(inst.model, inst.policy.action_probs(), inst.y_seq,
                                                              inst.z_seq);
            double first = 0.0;
            for (std::size_t t = 0; t < inst.horizon(); ++t) {
                double k = 0.0;
                for (std::size_t x = 0; x < inst.model.nx(); ++x) k += fb.alpha(t, x) * fb.beta(t, x);
                if (t == 0) first = k;
                worst = std::max(worst, std::abs(k - first));
            }
        }
        checks.push_back(finish("sum_x alpha_t beta_t constant in t (unscaled)", worst, 1e-12 * scale));
    }
    {
        double worst = 0.0;
        for (const auto name : {EnvironmentName::LoadUnload, EnvironmentName::CloggedPipe})
            for (int v = 1; v <= 3; ++v) {
                const auto spec = make_environment(name, v);
                const auto policy = oracle::random_policy(rng, spec.known().no(), spec.known().na());
                const auto ep = sample_episode(spec, policy, 100, rng());
                const auto fb = forward_backward(spec.known(), policy, ep.y_seq, ep.z_seq);
                for (std::size_t t = 0; t < ep.horizon(); ++t) {
                    double s = 0.0;
                    for (std::size_t x = 0; x < spec.known().nx(); ++x) s += fb.posterior(t, x);
                    worst = std::max(worst, std::abs(s - 1.0));
                }
            }
        checks.push_back(finish("scaled sum_x alpha_hat beta_hat = 1 at H = 100", worst, 1e-9 * scale));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
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
                for (; t < H; ++t) {
                    if (++z[t] < m.nz()) break;
                    z[t] = 0;
                }
                if (t == H) break;
            }
            worst = std::max({worst, std::abs(total - 1.0),
                              std::abs(oracle::brute_force_Z_normalization(m, inst.policy.action_probs(), inst.y_seq) -
                                       1.0)});
        }
        checks.push_back(finish("sum over Z of K(Y, Z) = 1 (H <= 3)", worst, 1e-9 * scale));
    }
    for (const auto name : {EnvironmentName::LoadUnload, EnvironmentName::CloggedPipe}) {
        std::array<EnvironmentSpec, 3> variants{make_environment(name, 1), make_environment(name, 2),
                                                make_environment(name, 3)};
        if (options.corrupt_variant && name == EnvironmentName::LoadUnload) {
            auto& target = variants.at(static_cast<std::size_t>(*options.corrupt_variant - 1));
            target.model = std::make_shared<const FullModel>(corrupt(*target.model));
        }
        double worst = 0.0;
        std::string detail;
        for (int i = 0; i < 20; ++i) {
            const auto policy = oracle::random_policy(rng, variants[0].known().no(), variants[0].known().na(), 2.0);
            const auto report = check_variant_equivalence(variants, policy, 100, kVariantEquivalenceTolerance * scale);
            worst = std::max(worst, report.max_difference);
            if (!report.ok() && detail.empty()) detail = report.mismatches.front();
        }
        checks.push_back(finish("variant equivalence, " + to_string(name) + " (20 policies, H = 100)", worst,
                                kVariantEquivalenceTolerance * scale, detail));
    }
    return checks;
}

}  // namespace pkmdp
