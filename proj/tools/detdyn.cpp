#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "detdyn/cli/scenario.hpp"

namespace {

std::optional<double> env_tolerance() {
    const char* raw = std::getenv("DETDYN_TOL_REL");
    if (!raw || !*raw) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != std::string(raw).size() || !(v > 0)) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw detdyn::Error(detdyn::ErrorKind::InvalidArgument, "DETDYN_TOL_REL must be a positive number");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Determinant dynamics under low-rank updates"};
    app.require_subcommand(1);

    std::string scenario_path, out_path, svg_path;
    std::optional<double> eps_min, tol_rel;
    std::optional<std::uint64_t> seed;
    for (auto kind : detdyn::cli::kScenarioKinds) {
        auto* sub = app.add_subcommand(std::string(kind), "run a " + std::string(kind) + " scenario");
        sub->add_option("--scenario", scenario_path, "scenario document (JSON) or CSV matrix")->required();
        sub->add_option("--out", out_path, "write the report here instead of stdout");
        sub->add_option("--svg", svg_path, "SVG output path (ellipse-plot)");
        sub->add_option("--eps-min", eps_min, "smallest epsilon of the default schedule")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "random seed (perturb-experiment)");
        sub->add_option("--tol-rel", tol_rel, "relative tolerance factor")->check(CLI::PositiveNumber);
    }
    CLI11_PARSE(app, argc, argv);
    const std::string kind = app.get_subcommands().front()->get_name();

    detdyn::cli::Report rep;
    try {
        detdyn::cli::RunOptions opt;
        opt.eps_min = eps_min;
        opt.seed = seed;
        opt.tol_rel = tol_rel;
        opt.svg_path = svg_path;
        opt.env_tol_rel = env_tolerance();
        rep = detdyn::cli::run_scenario(detdyn::cli::load_scenario(scenario_path, kind), opt);
    } catch (const detdyn::Error& e) {
        rep.text = "detdyn report\nkind = " + kind + "\n[error]\nkind = " + std::string(detdyn::to_string(e.kind())) +
                   "\nmessage = " + e.what() + "\nstatus: input-error\nexit_code = 1\n";
        rep.exit_code = 1;
    }

    if (out_path.empty()) {
        std::cout << rep.text;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot write '" << out_path << "'\n";
            return 1;
        }
        out << rep.text;
    }
    return rep.exit_code;
}
