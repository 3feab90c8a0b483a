#pragma once

// Scenario ingestion, solver orchestration and report output.
//
// A scenario is one JSON document (schema/scenario.schema.json). OSNR targets
// may be given in dB here; everything past load_scenario is linear.

#include <osnr/errors.hpp>
#include <osnr/iterative.hpp>
#include <osnr/model.hpp>
#include <osnr/solver_direct.hpp>
#include <osnr/solver_qp.hpp>
#include <osnr/topology.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

namespace osnr {

using json = nlohmann::json;

enum class SolverMode { automatic, direct, iterative, qp };

[[nodiscard]] inline const char* to_string(SolverMode mode) {
    switch (mode) {
        case SolverMode::automatic: return "auto";
        case SolverMode::direct: return "direct";
        case SolverMode::iterative: return "iterative";
        case SolverMode::qp: return "qp";
    }
    return "auto";
}

struct RunSettings {
    SolverMode solver = SolverMode::automatic;
    double tol = 1e-8;
    int max_iter = 10000;
    /// Initial powers; a single entry is broadcast to every channel.
    std::vector<double> u0_mW{0.5};
    bool strict_nonneg = false;
    /// Auto mode: cross-check the direct solution with the iterative algorithm.
    bool crosscheck = true;
    /// Route straight to the least-squares fallback.
    bool force_qp = false;

    [[nodiscard]] PowerVector initial_powers(std::size_t n) const {
        if (u0_mW.size() == 1) return PowerVector::Constant(detail::idx(n), u0_mW.front());
        if (u0_mW.size() != n)
            throw Error(ErrorKind::Validation, "run.u0_mW: expected 1 or " + std::to_string(n) + " entries");
        return Eigen::Map<const PowerVector>(u0_mW.data(), detail::idx(n));
    }
};

struct StackedBlocks {
    Matrix gamma_tilde;
    Vector b_tilde;
    Matrix gamma_hat;
    Vector b_hat;
};

struct Scenario {
    std::string name;
    std::optional<LinkNetwork> network;
    std::optional<SystemMatrix> system_matrix;
    std::optional<StackedBlocks> stacked;
    std::vector<ChannelSpec> channels;
    ServicePartition partition;
    std::vector<PowerLimits> limits;
    RunSettings run;

    [[nodiscard]] std::size_t size() const {
        return stacked ? static_cast<std::size_t>(stacked->b_tilde.size() + stacked->b_hat.size()) : partition.size();
    }
};

namespace scenario_defaults {
inline constexpr int span_count = 5;
inline constexpr double center_nm = 1555.0;
inline constexpr double spacing_nm = 1.0;
inline constexpr double peak_gain_dB = 30.0;
inline constexpr double curvature_dB_per_nm2 = 0.05;
inline constexpr double span_loss_dB = 30.0;
inline constexpr double nsp = 1.5;
inline constexpr double optical_bandwidth_GHz = 12.5;
inline constexpr double output_power_mW = 20.0;
/// Transmitter noise as a fraction of a fixed reference input power.
inline constexpr double tx_noise_fraction = 0.005;
inline constexpr double reference_input_mW = 1.0;
}  // namespace scenario_defaults

namespace detail {

/// Typed access into a JSON object with field paths in error messages.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const json& node() const { return node_; }
    [[nodiscard]] bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

    [[nodiscard]] std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw Error(ErrorKind::Validation, "scenario: " + field(key) + ": " + msg);
    }

    [[nodiscard]] double number(const char* key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "required number is missing");
        }
        const json& v = node_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }

    [[nodiscard]] std::optional<double> optional_number(const char* key) const {
        if (!has(key) || node_.at(key).is_null()) return std::nullopt;
        return number(key);
    }

    [[nodiscard]] int integer(const char* key, int fallback) const {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<int>();
    }

    [[nodiscard]] bool boolean(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    [[nodiscard]] std::string string(const char* key, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "required string is missing");
        }
        const json& v = node_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    [[nodiscard]] Reader child(const char* key) const {
        if (!has(key)) fail(key, "required object is missing");
        if (!node_.at(key).is_object()) fail(key, "expected an object");
        return Reader(node_.at(key), field(key));
    }

    [[nodiscard]] std::vector<Reader> array(const char* key) const {
        if (!has(key)) fail(key, "required array is missing");
        const json& v = node_.at(key);
        if (!v.is_array()) fail(key, "expected an array");
        std::vector<Reader> out;
        for (std::size_t k = 0; k < v.size(); ++k)
            out.emplace_back(v[k], field(key) + "[" + std::to_string(k) + "]");
        return out;
    }

    [[nodiscard]] Vector vector(const char* key) const {
        const auto items = array(key);
        Vector out(idx(items.size()));
        for (std::size_t k = 0; k < items.size(); ++k) {
            if (!items[k].node().is_number()) items[k].fail_self("expected a number");
            out(idx(k)) = items[k].node().get<double>();
        }
        return out;
    }

    [[nodiscard]] Matrix matrix(const char* key, std::optional<Eigen::Index> cols = std::nullopt) const {
        const auto rows = array(key);
        const Eigen::Index n_cols = cols ? *cols : (rows.empty() ? 0 : idx(rows.front().node().size()));
        Matrix out(idx(rows.size()), n_cols);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!rows[r].node().is_array() || idx(rows[r].node().size()) != n_cols)
                rows[r].fail_self("expected a row of " + std::to_string(n_cols) + " numbers");
            for (Eigen::Index c = 0; c < n_cols; ++c) {
                const json& v = rows[r].node()[static_cast<std::size_t>(c)];
                if (!v.is_number()) rows[r].fail_self("expected a number in column " + std::to_string(c));
                out(idx(r), c) = v.get<double>();
            }
        }
        return out;
    }

    /// Rejects keys outside `allowed`, so misspelled fields do not silently fall back to defaults.
    void only(std::initializer_list<const char*> allowed) const {
        if (!node_.is_object()) return;
        for (const auto& item : node_.items()) {
            bool known = false;
            for (const char* key : allowed) known = known || item.key() == key;
            if (!known) fail(item.key(), "unknown field");
        }
    }

    [[noreturn]] void fail_self(const std::string& msg) const {
        throw Error(ErrorKind::Validation, "scenario: " + path_ + ": " + msg);
    }

private:
    const json& node_;
    std::string path_;
};

inline GainProfile read_gain(const Reader& r) {
    r.only({"shape", "peak_gain_dB", "center_nm", "curvature_dB_per_nm2", "table"});
    const std::string shape = r.string("shape", "parabolic");
    GainProfile g;
    if (shape == "parabolic") {
        g = GainProfile::parabolic(r.number("peak_gain_dB", scenario_defaults::peak_gain_dB),
                                   r.number("center_nm", scenario_defaults::center_nm),
                                   r.number("curvature_dB_per_nm2", scenario_defaults::curvature_dB_per_nm2));
    } else if (shape == "flat") {
        g = GainProfile::flat(r.number("peak_gain_dB", scenario_defaults::peak_gain_dB));
    } else if (shape == "tabulated") {
        std::vector<std::pair<double, double>> table;
        const Matrix t = r.matrix("table", 2);
        for (Eigen::Index k = 0; k < t.rows(); ++k) table.emplace_back(t(k, 0), t(k, 1));
        g = GainProfile::tabulated(std::move(table));
        if (r.has("peak_gain_dB")) g.peak_gain_dB = r.number("peak_gain_dB");
    } else {
        r.fail("shape", "expected parabolic, flat or tabulated");
    }
    try {
        g.validate();
    } catch (const Error& e) {
        r.fail_self(e.what());
    }
    return g;
}

inline Span read_span(const Reader& r) {
    r.only({"loss_dB", "gain", "ase"});
    Span s;
    s.loss_dB = r.number("loss_dB", scenario_defaults::span_loss_dB);
    s.gain = r.has("gain") ? read_gain(r.child("gain")) : read_gain(Reader(json::object(), r.field("gain")));
    if (r.has("ase")) {
        const Reader a = r.child("ase");
        a.only({"nsp", "optical_bandwidth_GHz", "fixed_ase_mW"});
        s.ase.nsp = a.number("nsp", scenario_defaults::nsp);
        s.ase.optical_bandwidth_GHz = a.number("optical_bandwidth_GHz", scenario_defaults::optical_bandwidth_GHz);
        s.ase.fixed_ase_mW = a.optional_number("fixed_ase_mW");
    } else {
        s.ase.nsp = scenario_defaults::nsp;
        s.ase.optical_bandwidth_GHz = scenario_defaults::optical_bandwidth_GHz;
    }
    try {
        s.validate();
    } catch (const Error& e) {
        r.fail_self(e.what());
    }
    return s;
}

inline Link read_link(const Reader& r, std::size_t position) {
    r.only({"id", "output_power_mW", "spans", "span_count", "span"});
    Link link;
    link.id = r.string("id", "L" + std::to_string(position + 1));
    link.output_power_mW = r.number("output_power_mW", scenario_defaults::output_power_mW);
    if (r.has("spans")) {
        for (const Reader& s : r.array("spans")) link.spans.push_back(read_span(s));
    } else {
        const int count = r.integer("span_count", scenario_defaults::span_count);
        if (count < 1) r.fail("span_count", "must be >= 1");
        const Span tmpl = r.has("span") ? read_span(r.child("span"))
                                        : read_span(Reader(json::object(), r.field("span")));
        link.spans.assign(static_cast<std::size_t>(count), tmpl);
    }
    try {
        link.validate();
    } catch (const Error& e) {
        r.fail_self(e.what());
    }
    return link;
}

/// "20 dB", 20 with target_osnr_dB, or a bare linear ratio.
inline double read_target(const Reader& r) {
    if (r.has("target_osnr_dB")) return db_to_linear(r.number("target_osnr_dB"));
    if (!r.has("target_osnr")) r.fail("target_osnr", "seeker needs target_osnr or target_osnr_dB");
    const json& v = r.node().at("target_osnr");
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) r.fail("target_osnr", "expected a number or a string like \"20 dB\"");
    const std::string text = v.get<std::string>();
    std::istringstream in(text);
    double value = 0.0;
    std::string unit;
    if (!(in >> value)) r.fail("target_osnr", "cannot parse '" + text + "'");
    in >> unit;
    std::string rest;
    if (in >> rest) r.fail("target_osnr", "cannot parse '" + text + "'");
    if (unit == "dB") return db_to_linear(value);
    if (unit.empty()) return value;
    r.fail("target_osnr", "unknown unit '" + unit + "' (expected dB)");
}

inline Role read_role(const Reader& r) {
    const std::string role = r.string("role");
    if (role == "player") {
        PlayerParams p{r.number("alpha"), r.number("beta"), r.number("a")};
        try {
            p.validate();
        } catch (const Error& e) {
            r.fail_self(e.what());
        }
        return p;
    }
    if (role == "seeker") {
        SeekerParams s{read_target(r)};
        try {
            s.validate();
        } catch (const Error& e) {
            r.fail_self(e.what());
        }
        return s;
    }
    r.fail("role", "expected player or seeker");
}

inline RunSettings read_run(const Reader& r) {
    r.only({"solver", "tol", "max_iter", "u0_mW", "strict_nonneg", "crosscheck", "force_qp"});
    RunSettings run;
    const std::string solver = r.string("solver", "auto");
    if (solver == "auto") run.solver = SolverMode::automatic;
    else if (solver == "direct") run.solver = SolverMode::direct;
    else if (solver == "iterative") run.solver = SolverMode::iterative;
    else if (solver == "qp") run.solver = SolverMode::qp;
    else r.fail("solver", "expected auto, direct, iterative or qp");
    run.tol = r.number("tol", run.tol);
    if (!(run.tol > 0.0)) r.fail("tol", "must be > 0");
    run.max_iter = r.integer("max_iter", run.max_iter);
    if (run.max_iter < 1) r.fail("max_iter", "must be >= 1");
    if (r.has("u0_mW")) {
        const json& v = r.node().at("u0_mW");
        if (v.is_number()) run.u0_mW = {v.get<double>()};
        else {
            const Vector u = r.vector("u0_mW");
            run.u0_mW.assign(u.data(), u.data() + u.size());
        }
    }
    run.strict_nonneg = r.boolean("strict_nonneg", run.strict_nonneg);
    run.crosscheck = r.boolean("crosscheck", run.crosscheck);
    run.force_qp = r.boolean("force_qp", run.force_qp);
    return run;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k)
        if (text[k] == '\n') ++line;
    return line;
}

}  // namespace detail

/// Parses and validates a scenario document. `source` names it in error messages.
[[nodiscard]] inline Scenario parse_scenario(const json& doc, const std::string& source = "scenario") {
    if (!doc.is_object()) throw Error(ErrorKind::Validation, source + ": top level must be an object");
    const detail::Reader root(doc, "");
    root.only({"name", "network", "system_matrix", "stacked_system", "channel_grid", "tx_noise", "channels", "run"});
    Scenario sc;
    sc.name = root.string("name", source);

    const int sources = int(root.has("network")) + int(root.has("system_matrix")) + int(root.has("stacked_system"));
    if (sources != 1)
        throw Error(ErrorKind::Validation,
                    "scenario: exactly one of network, system_matrix or stacked_system must be present");

    sc.run = root.has("run") ? detail::read_run(root.child("run")) : RunSettings{};

    if (root.has("stacked_system")) {
        const detail::Reader s = root.child("stacked_system");
        s.only({"gamma_tilde", "b_tilde", "gamma_hat", "b_hat"});
        if (root.has("channels")) root.fail("channels", "not used with stacked_system");
        StackedBlocks blocks;
        blocks.b_tilde = s.vector("b_tilde");
        blocks.b_hat = s.vector("b_hat");
        const Eigen::Index n = blocks.b_tilde.size() + blocks.b_hat.size();
        blocks.gamma_tilde = s.matrix("gamma_tilde", n);
        blocks.gamma_hat = s.matrix("gamma_hat", n);
        if (blocks.gamma_tilde.rows() != blocks.b_tilde.size())
            s.fail("gamma_tilde", "row count must match b_tilde");
        if (blocks.gamma_hat.rows() != blocks.b_hat.size()) s.fail("gamma_hat", "row count must match b_hat");
        sc.stacked = std::move(blocks);
        return sc;
    }

    const auto channel_nodes = root.array("channels");
    if (channel_nodes.empty()) root.fail("channels", "at least one channel is required");
    const std::size_t n = channel_nodes.size();
    std::vector<Role> roles;
    for (const auto& c : channel_nodes) {
        c.only({"role", "alpha", "beta", "a", "target_osnr", "target_osnr_dB", "wavelength_nm", "tx_noise_mW", "route",
                "u_min_mW", "u_max_mW"});
        roles.push_back(detail::read_role(c));
        sc.limits.push_back({c.optional_number("u_min_mW"), c.optional_number("u_max_mW")});
    }
    sc.partition = ServicePartition(std::move(roles));

    if (root.has("system_matrix")) {
        const detail::Reader m = root.child("system_matrix");
        m.only({"gamma", "n0_mW"});
        SystemMatrix sys;
        sys.n0 = m.vector("n0_mW");
        sys.gamma = m.matrix("gamma", sys.n0.size());
        if (static_cast<std::size_t>(sys.n0.size()) != n)
            m.fail("n0_mW", "length must equal the number of channels (" + std::to_string(n) + ")");
        try {
            sys.validate();
        } catch (const Error& e) {
            m.fail_self(e.what());
        }
        sc.system_matrix = std::move(sys);
        return sc;
    }

    const detail::Reader net = root.child("network");
    net.only({"links"});
    LinkNetwork network;
    if (net.has("links")) {
        const auto links = net.array("links");
        for (std::size_t k = 0; k < links.size(); ++k) network.links.push_back(detail::read_link(links[k], k));
    }
    if (network.links.empty()) network.links.push_back(detail::read_link(detail::Reader(json::object(), "network.links[0]"), 0));
    try {
        network.validate();
    } catch (const Error& e) {
        net.fail_self(e.what());
    }

    const detail::Reader grid =
        root.has("channel_grid") ? root.child("channel_grid") : detail::Reader(json::object(), "channel_grid");
    grid.only({"center_nm", "spacing_nm"});
    const double center = grid.number("center_nm", scenario_defaults::center_nm);
    const double spacing = grid.number("spacing_nm", scenario_defaults::spacing_nm);
    if (!(spacing > 0.0)) grid.fail("spacing_nm", "must be > 0");
    const detail::Reader noise =
        root.has("tx_noise") ? root.child("tx_noise") : detail::Reader(json::object(), "tx_noise");
    noise.only({"fraction", "reference_input_mW"});
    const double default_noise = noise.number("fraction", scenario_defaults::tx_noise_fraction) *
                                 noise.number("reference_input_mW", scenario_defaults::reference_input_mW);

    std::vector<std::string> all_links;
    for (const auto& l : network.links) all_links.push_back(l.id);
    for (std::size_t i = 0; i < n; ++i) {
        const detail::Reader& c = channel_nodes[i];
        ChannelSpec spec;
        spec.id = i;
        // Centered grid around the configured wavelength.
        spec.wavelength_nm = c.number("wavelength_nm", center + (static_cast<double>(i) -
                                                                 0.5 * static_cast<double>(n - 1)) * spacing);
        spec.tx_noise_mW = c.number("tx_noise_mW", default_noise);
        if (c.has("route")) {
            for (const auto& hop : c.array("route")) {
                if (!hop.node().is_string()) hop.fail_self("expected a link id string");
                spec.route.push_back(hop.node().get<std::string>());
            }
        } else {
            spec.route = all_links;
        }
        try {
            spec.validate(network);
        } catch (const Error& e) {
            throw Error(e.kind(), "scenario: " + c.path() + ": " + e.what());
        }
        sc.channels.push_back(std::move(spec));
    }
    sc.network = std::move(network);
    return sc;
}

[[nodiscard]] inline Scenario parse_scenario_text(const std::string& text, const std::string& source = "scenario") {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Validation, source + ": parse error at line " +
                                               std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    return parse_scenario(doc, source);
}

[[nodiscard]] inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open scenario file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str(), path);
}

// ---------------------------------------------------------------------------
// Orchestration

struct PhaseTiming {
    std::string phase;
    double ms = 0.0;
};

struct RunReport {
    std::string scenario;
    std::string path;  ///< direct | iterative | qp | check
    SystemMatrix system;
    bool synthetic = false;
    FeasibilityReport feasibility;
    std::optional<BoundsReport> bounds;
    std::optional<double> convergence_rate;
    std::variant<std::monostate, Solution, QpResult> result;
    /// OSNR evaluation of the QP primal (physical scenarios only).
    std::optional<Solution> qp_evaluation;
    std::optional<IterationTrace> trace;
    std::optional<double> crosscheck_deviation;
    std::vector<std::string> warnings;
    std::vector<PhaseTiming> timing;
};

namespace detail {

template <typename F>
auto timed_phase(RunReport& report, const char* phase, F&& f) -> decltype(f()) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
        const auto end = std::chrono::steady_clock::now();
        report.timing.push_back({phase, std::chrono::duration<double, std::milli>(end - start).count()});
    };
    try {
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            finish();
        } else {
            auto value = f();
            finish();
            return value;
        }
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(phase) + ": " + e.what());
    }
}

inline StackedSystem prepare(const Scenario& sc, RunReport& report) {
    if (sc.stacked) {
        report.synthetic = true;
        return timed_phase(report, "assemble", [&] {
            return stack_from_blocks(sc.stacked->gamma_tilde, sc.stacked->b_tilde, sc.stacked->gamma_hat,
                                     sc.stacked->b_hat);
        });
    }
    SystemMatrix sys;
    if (sc.system_matrix) {
        sys = *sc.system_matrix;
    } else {
        sys = timed_phase(report, "gamma", [&] {
            return build_system_matrix(*sc.network, sc.channels, &report.warnings);
        });
    }
    return timed_phase(report, "assemble", [&] { return assemble(sys, sc.partition); });
}

}  // namespace detail

/// Feasibility, bounds and contraction factor without solving.
[[nodiscard]] inline RunReport check_scenario(const Scenario& sc) {
    RunReport report;
    report.scenario = sc.name;
    report.path = "check";
    const StackedSystem stack = detail::prepare(sc, report);
    report.system = stack.system;
    report.feasibility = detail::timed_phase(report, "feasibility", [&] { return check_feasibility(stack); });
    if (report.feasibility.nonsingular)
        report.bounds = detail::timed_phase(report, "bounds", [&] { return power_bounds(stack); });
    if (!stack.synthetic) {
        try {
            report.convergence_rate = convergence_rate(stack.system, stack.partition);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("convergence rate: ") + e.what());
        }
    }
    return report;
}

[[nodiscard]] inline RunReport execute(const Scenario& sc) {
    RunReport report;
    report.scenario = sc.name;
    const StackedSystem stack = detail::prepare(sc, report);
    report.system = stack.system;
    report.feasibility = detail::timed_phase(report, "feasibility", [&] { return check_feasibility(stack); });
    if (!stack.synthetic) {
        try {
            report.convergence_rate = convergence_rate(stack.system, stack.partition);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("convergence rate: ") + e.what());
        }
    }

    auto run_qp = [&] {
        report.path = "qp";
        QpResult r = detail::timed_phase(report, "qp", [&] { return solve_ds2(stack); });
        if (!stack.synthetic) report.qp_evaluation = evaluate_solution(stack, r.u);
        report.result = std::move(r);
    };
    auto run_direct = [&] {
        report.path = "direct";
        Solution s = detail::timed_phase(report, "direct", [&] { return solve_dsnp(stack); });
        report.bounds = detail::timed_phase(report, "bounds", [&] { return power_bounds(stack); });
        report.result = std::move(s);
    };
    auto run_iterative = [&](const std::optional<PowerVector>& reference) {
        IterationConfig cfg;
        cfg.u0 = sc.run.initial_powers(stack.size());
        cfg.tol = sc.run.tol;
        cfg.max_iter = sc.run.max_iter;
        cfg.strict_nonneg = sc.run.strict_nonneg;
        return detail::timed_phase(report, "iterative",
                                   [&] { return run(cfg, stack.system, stack.partition, reference); });
    };

    const SolverMode mode = sc.run.force_qp ? SolverMode::qp : sc.run.solver;
    if (stack.synthetic && mode != SolverMode::qp && mode != SolverMode::automatic)
        throw Error(ErrorKind::Usage, "stacked_system scenarios support only the auto and qp solvers");

    switch (mode) {
        case SolverMode::qp:
            run_qp();
            break;
        case SolverMode::direct:
            run_direct();
            break;
        case SolverMode::iterative: {
            std::optional<PowerVector> reference;
            if (report.feasibility.nonsingular) {
                Solution direct = detail::timed_phase(report, "direct", [&] { return solve_dsnp(stack); });
                report.bounds = detail::timed_phase(report, "bounds", [&] { return power_bounds(stack); });
                reference = direct.u;
            }
            report.path = "iterative";
            report.trace = run_iterative(reference);
            if (reference) report.crosscheck_deviation = (report.trace->final_u - *reference).cwiseAbs().maxCoeff();
            report.result = evaluate_solution(stack, report.trace->final_u);
            break;
        }
        case SolverMode::automatic: {
            bool direct_ok = false;
            if (report.feasibility.nonsingular) {
                try {
                    run_direct();
                    direct_ok = true;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Singular) throw;
                    report.warnings.push_back(std::string(e.what()) + "; falling back to least squares");
                }
            }
            if (!direct_ok) {
                run_qp();
                break;
            }
            const bool contracts = report.convergence_rate && *report.convergence_rate < 1.0 &&
                                   report.feasibility.hypotheses_hold();
            if (sc.run.crosscheck && contracts) {
                const PowerVector& u_star = std::get<Solution>(report.result).u;
                report.trace = run_iterative(u_star);
                report.crosscheck_deviation = (report.trace->final_u - u_star).cwiseAbs().maxCoeff();
            }
            break;
        }
    }

    if (auto* s = std::get_if<Solution>(&report.result)) {
        for (const auto& w : s->warnings) report.warnings.push_back("solution: " + w);
        for (const auto& w : check_power_limits(s->u, sc.limits)) report.warnings.push_back("limits: " + w);
    } else if (report.qp_evaluation) {
        for (const auto& w : check_power_limits(report.qp_evaluation->u, sc.limits))
            report.warnings.push_back("limits: " + w);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (std::isfinite(v(k))) out.push_back(v(k));
        else out.push_back(nullptr);
    }
    return out;
}

inline json to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vector(m.row(r).transpose())));
    return out;
}

inline json to_json(const std::vector<bool>& v) {
    json out = json::array();
    for (bool b : v) out.push_back(b);
    return out;
}

inline json to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const Solution& s) {
    return json{{"u_mW", to_json(s.u)},
                {"osnr", to_json(s.osnr)},
                {"osnr_dB", to_json(s.osnr_db)},
                {"seeker_residuals", to_json(s.seeker_residuals)},
                {"player_foc_residuals", to_json(s.player_foc_residuals)},
                {"relative_residual", s.relative_residual},
                {"nonnegative", s.nonnegative},
                {"warnings", s.warnings}};
}

inline json to_json(const QpResult& r) {
    return json{{"mu", to_json(r.mu)},
                {"u_mW", to_json(r.u)},
                {"objective", r.objective},
                {"kkt",
                 {{"stationarity_residual", r.kkt.stationarity_residual},
                  {"primal_feasibility_violation", r.kkt.primal_feasibility_violation},
                  {"complementary_slackness", r.kkt.complementary_slackness}}},
                {"dual_iterations", r.dual_iterations},
                {"outer_iterations", r.outer_iterations},
                {"proximal", r.proximal}};
}

inline json to_json(const IterationTrace& t) {
    json iterates = json::array();
    json osnr = json::array();
    for (const auto& u : t.iterates) iterates.push_back(to_json(u));
    for (const auto& o : t.osnr_db_history) osnr.push_back(to_json(o));
    json ratios = json::array();
    for (const auto& r : t.contraction_ratios) ratios.push_back(to_json(r));
    return json{{"steps", t.steps},
                {"converged_at", t.converged_at ? json(*t.converged_at) : json(nullptr)},
                {"final_u_mW", to_json(t.final_u)},
                {"iterates_mW", iterates},
                {"osnr_dB", osnr},
                {"error_inf", t.error_history},
                {"contraction_ratios", ratios},
                {"negative_steps", t.negative_steps}};
}

}  // namespace detail

[[nodiscard]] inline json report_to_json(const RunReport& r, bool include_timing = false) {
    json out;
    out["scenario"] = r.scenario;
    out["path"] = r.path;
    if (!r.synthetic)
        out["system"] = {{"gamma", detail::to_json(r.system.gamma)}, {"n0_mW", detail::to_json(r.system.n0)}};
    const auto& f = r.feasibility;
    out["feasibility"] = {{"seeker_condition", detail::to_json(f.seeker_condition)},
                          {"player_condition", detail::to_json(f.player_condition)},
                          {"strictly_diagonally_dominant", f.strictly_diagonally_dominant},
                          {"nonsingular", f.nonsingular},
                          {"margins", detail::to_json(f.margins)},
                          {"smallest_pivot", f.smallest_pivot}};
    if (r.bounds) {
        const auto& b = *r.bounds;
        out["bounds"] = {{"preconditions_hold", b.preconditions_hold},
                         {"guaranteed", b.guaranteed},
                         {"player_row_sums", detail::to_json(b.player_row_sums)},
                         {"seeker_levels", detail::to_json(b.seeker_levels)},
                         {"kappa_inf", b.kappa_inf},
                         {"lower_inf", b.lower_inf},
                         {"upper_inf", detail::to_json(b.upper_inf)},
                         {"euclid_lower", b.euclid_lower},
                         {"euclid_upper", detail::to_json(b.euclid_upper)}};
    } else {
        out["bounds"] = nullptr;
    }
    out["convergence_rate"] = detail::to_json(r.convergence_rate);
    if (const auto* s = std::get_if<Solution>(&r.result)) out["solution"] = detail::to_json(*s);
    else out["solution"] = nullptr;
    if (const auto* q = std::get_if<QpResult>(&r.result)) {
        out["qp"] = detail::to_json(*q);
        if (r.qp_evaluation) out["qp"]["evaluation"] = detail::to_json(*r.qp_evaluation);
    } else {
        out["qp"] = nullptr;
    }
    out["trace"] = r.trace ? detail::to_json(*r.trace) : json(nullptr);
    out["crosscheck_deviation_inf"] = detail::to_json(r.crosscheck_deviation);
    out["warnings"] = r.warnings;
    if (include_timing) {
        json timing = json::object();
        for (const auto& t : r.timing) timing[t.phase] = t.ms;
        out["timing_ms"] = timing;
    }
    return out;
}

/// Plot-ready trace: one row per (step, channel), channels numbered from 1.
/// err_inf is empty when the run had no reference solution.
[[nodiscard]] inline std::string trace_to_csv(const IterationTrace* trace) {
    std::string out = "step,channel,u_mW,osnr_dB,err_inf\n";
    if (!trace) return out;
    // Without a recorded history only the final iterate is kept.
    const bool full = trace->iterates.size() == static_cast<std::size_t>(trace->steps) + 1;
    char buf[160];
    for (std::size_t s = 0; s < trace->iterates.size(); ++s) {
        const std::size_t step_index = full ? s : static_cast<std::size_t>(trace->steps);
        const PowerVector& u = trace->iterates[s];
        const Vector& o = trace->osnr_db_history[s];
        std::string err;
        if (step_index < trace->error_history.size()) {
            std::snprintf(buf, sizeof buf, "%.12e", trace->error_history[step_index]);
            err = buf;
        }
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            char osnr_text[48] = "";
            if (std::isfinite(o(i))) std::snprintf(osnr_text, sizeof osnr_text, "%.12f", o(i));
            std::snprintf(buf, sizeof buf, "%zu,%ld,%.12f,%s,", step_index, static_cast<long>(i + 1), u(i),
                          osnr_text);
            out += buf;
            out += err;
            out += '\n';
        }
    }
    return out;
}

enum class OutputFormat { json, csv };

[[nodiscard]] inline std::string render(const RunReport& report, OutputFormat format, bool include_timing = false) {
    if (format == OutputFormat::csv) return trace_to_csv(report.trace ? &*report.trace : nullptr);
    return report_to_json(report, include_timing).dump(2) + "\n";
}

/// Writes the report; an empty path or "-" means standard output.
inline void emit(const RunReport& report, OutputFormat format, const std::string& out_path,
                 bool include_timing = false) {
    const std::string text = render(report, format, include_timing);
    if (out_path.empty() || out_path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        std::fflush(stdout);
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open output file '" + out_path + "'");
    out << text;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "failed writing output file '" + out_path + "'");
}

}  // namespace osnr
