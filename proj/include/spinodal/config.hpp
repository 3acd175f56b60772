#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spinodal/dynamics.hpp"
#include "spinodal/functionals.hpp"
#include "spinodal/gibbs.hpp"
#include "spinodal/report.hpp"

// Flat key-value experiment configuration with [section] headers. Keys are
// addressed as "section.key". Parsing is strict: unknown keys are rejected
// so a typo cannot silently fall back to a default.

namespace spinodal {

class ConfigMap {
public:
    static ConfigMap parse_string(const std::string& text) {
        ConfigMap cfg;
        std::istringstream stream(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(stream, line)) {
            ++line_no;
            const std::string trimmed = trim(strip_comment(line));
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']')
                    throw ValidationError("config line " + std::to_string(line_no) +
                                          ": malformed section header");
                section = trim(trimmed.substr(1, trimmed.size() - 2));
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ValidationError("config line " + std::to_string(line_no) +
                                      ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
            cfg.set(section.empty() ? key : section + "." + key, value);
        }
        return cfg;
    }

    static ConfigMap parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("config: cannot open '" + path + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return parse_string(buffer.str());
    }

    void set(const std::string& key, const std::string& value) {
        if (values_.find(key) == values_.end()) order_.push_back(key);
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        consumed_.insert(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError("config: missing required key '" + key + "'");
        consumed_.insert(key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        return parse_double(key, require_string(key));
    }

    long long get_int(const std::string& key, long long fallback) const {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        const std::string raw = require_string(key);
        try {
            return std::stoll(raw);
        } catch (const std::exception&) {
            throw ValidationError("config: key '" + key + "' is not an integer: " + raw);
        }
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        const std::string raw = require_string(key);
        try {
            return std::stoull(raw);
        } catch (const std::exception&) {
            throw ValidationError("config: key '" + key + "' is not an unsigned integer: " + raw);
        }
    }

    bool get_flag(const std::string& key, bool fallback) const {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        const std::string raw = require_string(key);
        if (raw == "on" || raw == "true" || raw == "1") return true;
        if (raw == "off" || raw == "false" || raw == "0") return false;
        throw ValidationError("config: key '" + key + "' expects on/off: " + raw);
    }

    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& fallback) const {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        const std::string raw = require_string(key);
        std::vector<double> out;
        std::istringstream stream(raw);
        std::string item;
        while (std::getline(stream, item, ',')) {
            const std::string t = trim(item);
            if (t.empty()) continue;
            out.push_back(parse_double(key, t));
        }
        return out;
    }

    // Every key must have been consumed by the loader.
    void reject_unknown_keys() const {
        std::vector<std::string> unknown;
        for (const auto& key : order_)
            if (consumed_.find(key) == consumed_.end()) unknown.push_back(key);
        if (!unknown.empty()) {
            std::string msg = "config: unknown key(s):";
            for (const auto& k : unknown) msg += " " + k;
            throw ValidationError(msg);
        }
    }

private:
    static std::string strip_comment(const std::string& line) {
        const auto hash = line.find('#');
        return hash == std::string::npos ? line : line.substr(0, hash);
    }

    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }

    static double parse_double(const std::string& key, const std::string& raw) {
        try {
            std::size_t used = 0;
            const double v = std::stod(raw, &used);
            if (used != raw.size())
                throw ValidationError("config: trailing characters in '" + key + "': " + raw);
            return v;
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("config: key '" + key + "' is not a number: " + raw);
        }
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
    mutable std::set<std::string> consumed_;
};

enum class ExperimentKind { Simulate, CoupleDegenerate, CoupleWhite, Harnack, Gibbs, Moments, Validate };

inline ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "simulate") return ExperimentKind::Simulate;
    if (name == "couple-degenerate") return ExperimentKind::CoupleDegenerate;
    if (name == "couple-white") return ExperimentKind::CoupleWhite;
    if (name == "harnack") return ExperimentKind::Harnack;
    if (name == "gibbs") return ExperimentKind::Gibbs;
    if (name == "moments") return ExperimentKind::Moments;
    if (name == "validate") return ExperimentKind::Validate;
    throw ValidationError("config: unknown experiment kind '" + name + "'");
}

inline std::string experiment_kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Simulate: return "simulate";
        case ExperimentKind::CoupleDegenerate: return "couple-degenerate";
        case ExperimentKind::CoupleWhite: return "couple-white";
        case ExperimentKind::Harnack: return "harnack";
        case ExperimentKind::Gibbs: return "gibbs";
        case ExperimentKind::Moments: return "moments";
        case ExperimentKind::Validate: return "validate";
    }
    return "";
}

enum class TrajectoryMode { Off, Full, Reduced };

struct ExperimentConfig {
    ModelParams model;

    ExperimentKind kind = ExperimentKind::Validate;
    std::string harnack_kind = "asymptotic";
    SpectralField x;
    SpectralField y;
    SpectralField direction;       // gradient checks
    std::vector<double> times{0.1};
    double T = 0.02;               // coupling / moment horizon
    double a = 1.0;
    double power_p = 2.0;
    double q = 2.0;
    double varsigma = 10.0;
    double fd_eps = 1e-3;
    double coupling_tol = 1e-4;
    double kappa = 0.5;
    double ledger_tol = 1.02;
    double contraction_tol = 1.05;
    std::string phi_spec = "exp_sin_mode:1";
    long long ensemble = 2000;
    double T_long = 2.0;
    double burn_in = 0.5;
    long long chain_steps = 60000;
    double beta = 0.2;
    long long sample_stride = 8;
    long long chain_thin = 4;
    long long tracked_modes = 5;
    GibbsVariant gibbs_variant = GibbsVariant::FiniteN;

    std::uint64_t seed = 42;
    std::string out_dir = "out";
    int workers = 1;
    TrajectoryMode trajectory = TrajectoryMode::Off;
    bool samples = false;

    TestFunctional phi() const { return TestFunctional::parse(phi_spec); }

    // ------------------------------------------------------------------
    static SpectralField field_from_list(const std::vector<double>& coeffs, int truncation,
                                         double mass, const std::string& what) {
        if (static_cast<int>(coeffs.size()) > truncation + 1)
            throw ValidationError("config: " + what + " has more coefficients than modes");
        SpectralField u = SpectralField::zero(truncation);
        u.mean = coeffs.empty() ? mass : coeffs[0];
        for (std::size_t i = 1; i < coeffs.size(); ++i) u.modes[i - 1] = coeffs[i];
        if (u.mean != mass)
            throw ValidationError("config: " + what +
                                  " mode-0 coefficient must equal model.mass_c");
        return u;
    }

    static ExperimentConfig load(const ConfigMap& cfg) {
        ExperimentConfig ec;

        // model
        ec.model.lambda = cfg.get_double("model.lambda", 1.0);
        ec.model.n_poly = static_cast<int>(cfg.get_int("model.n_poly", 2));
        ec.model.M = static_cast<int>(cfg.get_int("model.M", 32));
        ec.model.Q = static_cast<int>(cfg.get_int("model.Q", 0));
        ec.model.dt = cfg.get_double("model.dt", 1e-4);
        ec.model.mass_c = cfg.get_double("model.mass_c", 0.0);
        ec.model.taming_threshold = cfg.get_double("model.taming_threshold", 1e6);
        ec.model.divergence_guard = cfg.get_double("model.divergence_guard", 1e6);
        ec.model.nonlinearity = cfg.get_flag("model.nonlinearity", true);
        const std::string noise = cfg.get_string("model.noise", "white");
        if (noise == "white") {
            ec.model.noise = NoiseSpec::white();
            cfg.get_list("model.b", {});
            cfg.get_int("model.N", 0);
        } else if (noise == "degenerate") {
            const auto b = cfg.get_list("model.b", {});
            const int n_active = static_cast<int>(cfg.get_int("model.N", 0));
            if (b.empty() || n_active <= 0)
                throw ValidationError("config: degenerate noise needs model.b and model.N");
            ec.model.noise = NoiseSpec::degenerate(b, n_active);
        } else {
            throw ValidationError("config: model.noise must be white or degenerate");
        }

        // experiment
        if (cfg.has("experiment.kind"))
            ec.kind = parse_experiment_kind(cfg.require_string("experiment.kind"));
        else
            cfg.get_string("experiment.kind", "");
        ec.harnack_kind = cfg.get_string("experiment.harnack_kind", "asymptotic");
        const auto xs = cfg.get_list("experiment.x", {});
        const auto ys = cfg.get_list("experiment.y", {});
        ec.x = field_from_list(xs, ec.model.M, ec.model.mass_c, "experiment.x");
        ec.y = ys.empty() ? ec.x : field_from_list(ys, ec.model.M, ec.model.mass_c, "experiment.y");
        auto dir = cfg.get_list("experiment.direction", {});
        if (dir.empty()) {
            ec.direction = SpectralField::zero(ec.model.M);
            if (ec.model.M >= 1) ec.direction.modes[0] = 1.0;
        } else {
            ec.direction = field_from_list(dir, ec.model.M, 0.0, "experiment.direction");
            if (ec.direction.mean != 0.0)
                throw ValidationError("config: gradient direction must have zero mean");
        }
        ec.times = cfg.get_list("experiment.times", {0.1});
        ec.T = cfg.get_double("experiment.T", 0.02);
        ec.a = cfg.get_double("experiment.a", 1.0);
        ec.power_p = cfg.get_double("experiment.p", 2.0);
        ec.q = cfg.get_double("experiment.q", 2.0);
        ec.varsigma = cfg.get_double("experiment.varsigma", 10.0);
        ec.fd_eps = cfg.get_double("experiment.fd_eps", 1e-3);
        ec.coupling_tol = cfg.get_double("experiment.coupling_tol", 1e-4);
        ec.kappa = cfg.get_double("experiment.kappa", 0.5);
        ec.ledger_tol = cfg.get_double("experiment.ledger_tol", 1.02);
        ec.contraction_tol = cfg.get_double("experiment.contraction_tol", 1.05);
        ec.phi_spec = cfg.get_string("experiment.phi", "exp_sin_mode:1");
        ec.ensemble = cfg.get_int("experiment.ensemble", 2000);
        ec.T_long = cfg.get_double("experiment.T_long", 2.0);
        ec.burn_in = cfg.get_double("experiment.burn_in", 0.5);
        ec.chain_steps = cfg.get_int("experiment.chain_steps", 60000);
        ec.beta = cfg.get_double("experiment.beta", 0.2);
        ec.sample_stride = cfg.get_int("experiment.sample_stride", 8);
        ec.chain_thin = cfg.get_int("experiment.chain_thin", 4);
        ec.tracked_modes = cfg.get_int("experiment.tracked_modes", 5);
        const std::string gv = cfg.get_string("experiment.gibbs_variant", "finite_n");
        if (gv == "finite_n") ec.gibbs_variant = GibbsVariant::FiniteN;
        else if (gv == "limit_f") ec.gibbs_variant = GibbsVariant::LimitF;
        else if (gv == "flat") ec.gibbs_variant = GibbsVariant::Flat;
        else throw ValidationError("config: experiment.gibbs_variant must be finite_n, limit_f or flat");

        // run
        ec.seed = cfg.get_u64("run.seed", 42);
        ec.out_dir = cfg.get_string("run.out", "out");
        ec.workers = static_cast<int>(cfg.get_int("run.workers", 1));
        const std::string traj = cfg.get_string("run.trajectory", "off");
        if (traj == "off") ec.trajectory = TrajectoryMode::Off;
        else if (traj == "full") ec.trajectory = TrajectoryMode::Full;
        else if (traj == "reduced") ec.trajectory = TrajectoryMode::Reduced;
        else throw ValidationError("config: run.trajectory must be off, full or reduced");
        ec.samples = cfg.get_flag("run.samples", false);

        cfg.reject_unknown_keys();
        return ec;
    }

    static ExperimentConfig load_file(const std::string& path) {
        return load(ConfigMap::parse_file(path));
    }

    // All applicable structural checks, run before any compute.
    void validate() const {
        model.validate();
        (void)phi();
        if (workers < 1) throw ValidationError("config: run.workers must be at least 1");
        if (ensemble < 1) throw ValidationError("config: experiment.ensemble must be positive");
        for (double t : times)
            if (t < 0.0) throw ValidationError("config: experiment.times must be nonnegative");
        switch (kind) {
            case ExperimentKind::CoupleDegenerate: {
                if (!model.noise.is_degenerate())
                    throw ValidationError("couple-degenerate requires degenerate noise; (A2) unavailable");
                if (!validate_a2(model.noise, model.lambda))
                    throw ValidationError("assumption (A2) fails: need b_i > 0 up to N and (N+1)^2 pi^2 > lambda");
                break;
            }
            case ExperimentKind::CoupleWhite: {
                if (model.noise.is_degenerate())
                    throw ValidationError("couple-white requires the white noise variant");
                GammaSchedule sched{T, a, model.lambda};
                sched.validate();
                break;
            }
            case ExperimentKind::Harnack: {
                if (harnack_kind == "asymptotic" || harnack_kind == "gradient") {
                    if (!model.noise.is_degenerate())
                        throw ValidationError("harnack_kind=" + harnack_kind +
                                              " requires degenerate noise");
                    if (!validate_a2(model.noise, model.lambda))
                        throw ValidationError("assumption (A2) fails: need b_i > 0 up to N and (N+1)^2 pi^2 > lambda");
                } else if (harnack_kind == "power" || harnack_kind == "log" ||
                           harnack_kind == "ergodic") {
                    if (model.noise.is_degenerate())
                        throw ValidationError("harnack_kind=" + harnack_kind +
                                              " requires white noise");
                    if (!(kPi * kPi > model.lambda))
                        throw ValidationError("hypothesis pi^2 > lambda fails");
                } else {
                    throw ValidationError("config: unknown harnack_kind '" + harnack_kind + "'");
                }
                break;
            }
            case ExperimentKind::Moments: {
                const double bstar = bstar_norm(model.noise, model.M);
                if (!(kPi * kPi * kPi * kPi > 2.0 * varsigma * bstar * bstar))
                    throw ValidationError("hypothesis pi^4 > 2 varsigma ||B*||^2 fails");
                break;
            }
            case ExperimentKind::Gibbs: {
                if (model.noise.is_degenerate())
                    throw ValidationError("gibbs requires the white noise variant");
                break;
            }
            case ExperimentKind::Simulate:
            case ExperimentKind::Validate:
                break;
        }
        if (model.noise.is_degenerate() && !validate_a1(model.noise))
            throw ValidationError("assumption (A1) fails: the noise must annihilate constants");
    }

    // Fully resolved config; parsing it back reproduces this configuration.
    std::string resolved() const {
        std::ostringstream out;
        out << "[model]\n";
        out << "lambda = " << format_double(model.lambda) << "\n";
        out << "n_poly = " << model.n_poly << "\n";
        out << "M = " << model.M << "\n";
        out << "Q = " << model.grid_size() << "\n";
        out << "dt = " << format_double(model.dt) << "\n";
        out << "mass_c = " << format_double(model.mass_c) << "\n";
        out << "noise = " << (model.noise.is_degenerate() ? "degenerate" : "white") << "\n";
        if (model.noise.is_degenerate()) {
            out << "b = " << join_list(model.noise.b) << "\n";
            out << "N = " << model.noise.active_modes << "\n";
        }
        out << "taming_threshold = " << format_double(model.taming_threshold) << "\n";
        out << "divergence_guard = " << format_double(model.divergence_guard) << "\n";
        out << "nonlinearity = " << (model.nonlinearity ? "on" : "off") << "\n";

        out << "\n[experiment]\n";
        out << "kind = " << experiment_kind_name(kind) << "\n";
        if (kind == ExperimentKind::Harnack) out << "harnack_kind = " << harnack_kind << "\n";
        out << "x = " << join_list(field_to_list(x)) << "\n";
        out << "y = " << join_list(field_to_list(y)) << "\n";
        switch (kind) {
            case ExperimentKind::Harnack:
                out << "times = " << join_list(times) << "\n";
                out << "phi = " << phi_spec << "\n";
                if (harnack_kind == "power") out << "p = " << format_double(power_p) << "\n";
                if (harnack_kind == "gradient") {
                    out << "direction = " << join_list(field_to_list(direction)) << "\n";
                    out << "fd_eps = " << format_double(fd_eps) << "\n";
                }
                out << "ensemble = " << ensemble << "\n";
                break;
            case ExperimentKind::CoupleDegenerate:
                out << "T = " << format_double(T) << "\n";
                out << "contraction_tol = " << format_double(contraction_tol) << "\n";
                out << "ensemble = " << ensemble << "\n";
                break;
            case ExperimentKind::CoupleWhite:
                out << "T = " << format_double(T) << "\n";
                out << "a = " << format_double(a) << "\n";
                out << "q = " << format_double(q) << "\n";
                out << "coupling_tol = " << format_double(coupling_tol) << "\n";
                out << "kappa = " << format_double(kappa) << "\n";
                out << "ledger_tol = " << format_double(ledger_tol) << "\n";
                out << "ensemble = " << ensemble << "\n";
                break;
            case ExperimentKind::Moments:
                out << "T = " << format_double(T) << "\n";
                out << "varsigma = " << format_double(varsigma) << "\n";
                out << "ensemble = " << ensemble << "\n";
                break;
            case ExperimentKind::Gibbs:
                out << "gibbs_variant = "
                    << (gibbs_variant == GibbsVariant::FiniteN
                            ? "finite_n"
                            : (gibbs_variant == GibbsVariant::LimitF ? "limit_f" : "flat"))
                    << "\n";
                out << "T_long = " << format_double(T_long) << "\n";
                out << "burn_in = " << format_double(burn_in) << "\n";
                out << "chain_steps = " << chain_steps << "\n";
                out << "beta = " << format_double(beta) << "\n";
                out << "sample_stride = " << sample_stride << "\n";
                out << "chain_thin = " << chain_thin << "\n";
                out << "tracked_modes = " << tracked_modes << "\n";
                out << "ensemble = " << ensemble << "\n";
                break;
            case ExperimentKind::Simulate:
                out << "T = " << format_double(T) << "\n";
                out << "ensemble = " << ensemble << "\n";
                break;
            case ExperimentKind::Validate:
                break;
        }

        out << "\n[run]\n";
        out << "seed = " << seed << "\n";
        out << "out = " << out_dir << "\n";
        out << "workers = " << workers << "\n";
        out << "trajectory = "
            << (trajectory == TrajectoryMode::Off
                    ? "off"
                    : (trajectory == TrajectoryMode::Full ? "full" : "reduced"))
            << "\n";
        out << "samples = " << (samples ? "on" : "off") << "\n";
        return out.str();
    }

private:
    static std::vector<double> field_to_list(const SpectralField& u) {
        std::vector<double> coeffs;
        coeffs.reserve(static_cast<std::size_t>(u.truncation()) + 1);
        coeffs.push_back(u.mean);
        for (double c : u.modes) coeffs.push_back(c);
        return coeffs;
    }

    static std::string join_list(const std::vector<double>& xs) {
        std::string out;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i > 0) out += ",";
            out += format_double(xs[i]);
        }
        return out;
    }
};

}  // namespace spinodal
