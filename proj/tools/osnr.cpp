// osnr: command-line front end for scenario files and the built-in demos.
//
//   osnr solve    SCENARIO [flags]   solve using the scenario's solver (auto by default)
//   osnr check    SCENARIO [flags]   feasibility, bounds and contraction factor only
//   osnr iterate  SCENARIO [flags]   run the distributed iteration and keep its trace
//   osnr gamma    SCENARIO [flags]   print Gamma and n0
//   osnr demo3 | demo30   [flags]    run a built-in demo
//
// Exit codes: 0 success, 1 validation or usage, 2 numerical failure, 3 I/O.

#include <osnr/demos.hpp>
#include <osnr/scenario.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Flags {
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::vector<double> u0;
    std::string format = "json";
    std::string out;
    bool strict_nonneg = false;
    bool timing = false;
    bool print_scenario = false;
    std::string scenario_path;
};

enum class Command { solve, check, iterate, gamma, demo3, demo30 };

void apply(const Flags& flags, osnr::RunSettings& run) {
    if (flags.tol) run.tol = *flags.tol;
    if (flags.max_iter) run.max_iter = *flags.max_iter;
    if (!flags.u0.empty()) run.u0_mW = flags.u0;
    if (flags.strict_nonneg) run.strict_nonneg = true;
    if (!(run.tol > 0.0)) throw osnr::Error(osnr::ErrorKind::Usage, "--tol must be > 0");
    if (run.max_iter < 1) throw osnr::Error(osnr::ErrorKind::Usage, "--max-iter must be >= 1");
}

void write_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw osnr::Error(osnr::ErrorKind::Io, "cannot open output file '" + path + "'");
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) throw osnr::Error(osnr::ErrorKind::Io, "failed writing '" + path + "'");
}

int run_command(Command command, const Flags& flags) {
    const auto format = flags.format == "csv" ? osnr::OutputFormat::csv : osnr::OutputFormat::json;

    osnr::Scenario scenario;
    osnr::json scenario_doc;
    switch (command) {
        case Command::demo3:
            scenario_doc = osnr::demos::demo3_json();
            scenario = osnr::parse_scenario(scenario_doc, "demo3");
            break;
        case Command::demo30:
            scenario_doc = osnr::demos::demo30_json();
            scenario = osnr::parse_scenario(scenario_doc, "demo30");
            break;
        default:
            scenario = osnr::load_scenario(flags.scenario_path);
            break;
    }
    if (flags.print_scenario) {
        if (scenario_doc.is_null())
            throw osnr::Error(osnr::ErrorKind::Usage, "--print-scenario applies to the built-in demos only");
        write_text(scenario_doc.dump(2) + "\n", flags.out);
        return 0;
    }
    apply(flags, scenario.run);

    if (command == Command::gamma) {
        if (format == osnr::OutputFormat::csv)
            throw osnr::Error(osnr::ErrorKind::Usage, "gamma supports --format json only");
        if (scenario.stacked)
            throw osnr::Error(osnr::ErrorKind::Usage, "stacked_system scenarios carry no system matrix");
        std::vector<std::string> warnings;
        const osnr::SystemMatrix sys =
            scenario.system_matrix ? *scenario.system_matrix
                                   : osnr::build_system_matrix(*scenario.network, scenario.channels, &warnings);
        const osnr::json doc{{"scenario", scenario.name},
                             {"gamma", osnr::detail::to_json(sys.gamma)},
                             {"n0_mW", osnr::detail::to_json(sys.n0)},
                             {"warnings", warnings}};
        write_text(doc.dump(2) + "\n", flags.out);
        return 0;
    }

    if (command == Command::iterate) scenario.run.solver = osnr::SolverMode::iterative;
    const osnr::RunReport report = command == Command::check ? osnr::check_scenario(scenario)
                                                           : osnr::execute(scenario);
    osnr::emit(report, format, flags.out, flags.timing);
    for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OSNR power control: direct, least-squares and distributed solvers for mixed "
                 "game/target WDM channels"};
    app.require_subcommand(1);

    Flags flags;
    Command command = Command::solve;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--tol", flags.tol, "iteration stopping tolerance on ||u(n+1)-u(n)||_inf (mW)");
        sub->add_option("--max-iter", flags.max_iter, "iteration cap");
        sub->add_option("--u0", flags.u0, "initial powers in mW: one value or one per channel")
            ->delimiter(',');
        sub->add_option("--format", flags.format, "output format")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--out", flags.out, "output file (default: standard output)");
        sub->add_flag("--strict-nonneg", flags.strict_nonneg, "abort the iteration on a negative power");
        sub->add_flag("--timing", flags.timing, "include per-phase wall-clock timing in json output");
    };
    auto add_scenario_command = [&](const char* name, const char* help, Command c) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("scenario", flags.scenario_path, "scenario JSON file")->required();
        add_common(sub);
        sub->callback([&command, c] { command = c; });
    };
    add_scenario_command("solve", "solve a scenario", Command::solve);
    add_scenario_command("check", "feasibility and power bounds only", Command::check);
    add_scenario_command("iterate", "distributed iteration with trace", Command::iterate);
    add_scenario_command("gamma", "print the system matrix and noise floor", Command::gamma);
    for (auto [name, c] : {std::pair{"demo3", Command::demo3}, std::pair{"demo30", Command::demo30}}) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the built-in ") + name + " scenario");
        add_common(sub);
        sub->add_flag("--print-scenario", flags.print_scenario, "print the scenario JSON instead of solving");
        sub->callback([&command, c = c] { command = c; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return run_command(command, flags);
    } catch (const osnr::Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", osnr::to_string(e.kind()), e.what());
        return osnr::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
