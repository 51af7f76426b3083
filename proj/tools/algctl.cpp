#include <CLI11.hpp>

#include "algctl/runner.hpp"

namespace {

struct CommonFlags {
    algctl::RunOptions options;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", options.config_path, "configuration file")->required();
        cmd->add_option("--out", options.out_path, "output file path");
        cmd->add_option("--tol", options.tol, "tolerance override");
        cmd->add_option("--seed", options.seed, "random seed override");
        cmd->add_flag("--quiet", options.quiet, "suppress the run report");
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometric optimal control on Lie algebroids"};
    app.require_subcommand(1);

    CommonFlags validate_flags, solve_flags, shoot_flags, orbit_flags, bracket_flags;
    std::string bracket_f, bracket_g, bracket_at;

    CLI::App* validate = app.add_subcommand("validate", "certify the algebroid axioms numerically");
    validate_flags.attach(validate);

    CLI::App* solve = app.add_subcommand("solve", "integrate the critical-trajectory equations");
    solve_flags.attach(solve);

    CLI::App* shoot = app.add_subcommand("shoot", "solve the two-point boundary problem for eta0");
    shoot_flags.attach(shoot);

    CLI::App* orbit = app.add_subcommand("orbit", "sample the coadjoint orbit of xi");
    orbit_flags.attach(orbit);

    CLI::App* bracket = app.add_subcommand("bracket", "evaluate a Poisson bracket at a phase point");
    bracket_flags.attach(bracket);
    bracket->add_option("F", bracket_f, "first expression")->required();
    bracket->add_option("G", bracket_g, "second expression")->required();
    bracket->add_option("--at", bracket_at, "phase point [x1..xn, eta1..etar]")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return algctl::kExitUsage;
    }

    try {
        if (validate->parsed()) return algctl::run_validate(validate_flags.options).exit_code;
        if (solve->parsed()) return algctl::run_solve(solve_flags.options).exit_code;
        if (shoot->parsed()) return algctl::run_shoot(shoot_flags.options).exit_code;
        if (orbit->parsed()) return algctl::run_orbit(orbit_flags.options).exit_code;
        if (bracket->parsed())
            return algctl::run_bracket(bracket_flags.options, bracket_f, bracket_g, bracket_at).exit_code;
    } catch (const std::exception& e) {
        algctl::log_msg(algctl::LogLevel::Error, e.what());
        return algctl::kExitUsage;
    }
    return algctl::kExitUsage;
}
