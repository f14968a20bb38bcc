#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stlcvx/graph.hpp"
#include "stlcvx/linearizer.hpp"
#include "stlcvx/problem_spec.hpp"
#include "stlcvx/scvx.hpp"
#include "stlcvx/semantics.hpp"

namespace fs = std::filesystem;
using namespace stlcvx;

namespace {

constexpr int kExitUnsatisfied = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;

int cmd_check(const std::string& formula_text, const std::string& traj_path, double kappa) {
    (void)kappa;
    FormulaPtr core = desugar(parse_formula(formula_text));
    const Trajectory traj = read_trajectory_csv_file(traj_path);
    const ExactEvaluation eval = eval_exact(*core, traj);
    const bool satisfied = eval.root_margin > 0.0;
    std::cout << "formula:     " << print_formula(*core) << '\n';
    std::cout << "root margin: " << std::setprecision(12) << eval.root_margin << '\n';
    std::cout << "satisfied:   " << (satisfied ? "yes" : "no") << '\n';
    std::cout << "per-node terminal margins:\n";
    for (const NodeTrace& node : eval.nodes) {
        std::cout << "  " << node.label << ": " << node.values(node.values.size() - 1) << '\n';
    }
    return satisfied ? 0 : kExitUnsatisfied;
}

int cmd_compile(const std::string& formula_text, int n_steps, const std::string& json_out) {
    FormulaPtr core = desugar(parse_formula(formula_text));
    validate_top(*core);
    const StlGraph graph = compile(core, n_steps);
    std::cout << "core form: " << print_formula(*core) << '\n';
    std::cout << "nodes (" << graph.n_nodes() << "), grid N=" << n_steps << ":\n";
    std::cout << "  id  op          kind    direction  window    vars\n";
    for (const StlNode& node : graph.nodes) {
        std::ostringstream win, dir;
        if (node.is_bridge()) {
            win << "-";
            dir << "-";
        } else {
            win << '[' << node.k_a << ',' << node.k_b << ']';
            dir << (node.direction == Direction::Backward ? "backward" : "forward");
        }
        std::cout << "  " << std::left << std::setw(4) << node.id << std::setw(12)
                  << node_op_name(node.op) << std::setw(8)
                  << (node.is_bridge() ? "bridge" : "flow") << std::setw(11) << dir.str()
                  << std::setw(10) << win.str() << '[' << node.var_offset << ','
                  << node.var_offset + n_steps << ")\n";
    }
    std::cout << "block sparsity (rows: nodes; cols: x then node variables):\n";
    std::cout << sparsity_grid(graph);
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw std::runtime_error("cannot write " + json_out);
        out << graph_to_json(graph).dump(2) << '\n';
        std::cout << "graph JSON written to " << json_out << '\n';
    }
    return 0;
}

int cmd_solve(const std::string& spec_path, const std::string& output_dir_flag, double kappa_flag,
              bool kappa_set, double tol_flag, bool tol_set, int max_iter_flag, bool max_iter_set,
              bool nonlinear) {
    ProblemSpec spec = load_problem_spec_file(spec_path);
    if (kappa_set) spec.problem.config.kappa = kappa_flag;
    if (tol_set) spec.problem.config.qp_tol = tol_flag;
    if (max_iter_set) spec.problem.config.max_outer_iter = max_iter_flag;
    if (nonlinear) spec.problem.config.nonlinear_reprop = true;

    fs::path out_dir;
    if (!output_dir_flag.empty()) {
        out_dir = output_dir_flag;
    } else if (!spec.output_dir.empty()) {
        out_dir = spec.output_dir;
    } else {
        const char* env_root = std::getenv("STLCVX_OUTPUT_DIR");
        out_dir = fs::path(env_root != nullptr ? env_root : "out") / fs::path(spec_path).stem();
    }
    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "iterations");

    auto sink = [&](int iter, const Trajectory& traj) {
        std::ostringstream name;
        name << "iter_" << std::setfill('0') << std::setw(3) << iter << ".csv";
        write_trajectory_csv_file((out_dir / "iterations" / name.str()).string(), traj);
    };

    const auto t0 = std::chrono::steady_clock::now();
    auto [trajectory, trace] = run_scvx(spec.problem, sink);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_trajectory_csv_file((out_dir / "final_trajectory.csv").string(), trajectory);
    {
        std::ofstream trace_out(out_dir / "trace.csv");
        trace.write_csv(trace_out);
    }

    const double dv = delta_v(trajectory, spec.problem.plant.mass_kg);
    FormulaPtr core = desugar(spec.problem.formula);
    const double final_margin = eval_exact(*core, trajectory).root_margin;
    nlohmann::json summary;
    summary["formula"] = spec.formula_text;
    summary["iterations"] = trace.iterations.size();
    summary["converged"] = trace.converged;
    summary["satisfied"] = final_margin > 0.0;
    summary["delta_v_mps"] = dv;
    summary["final_margin"] = final_margin;
    summary["termination"] = trace.termination;
    summary["wall_time_s"] = wall_s;
    {
        std::ofstream summary_out(out_dir / "summary.json");
        summary_out << summary.dump(2) << '\n';
    }

    std::cout << "wrote " << out_dir.string() << ": " << trace.iterations.size() << " iterations, "
              << (trace.converged ? "converged" : "NOT converged") << ", "
              << (final_margin > 0.0 ? "satisfied" : "unsatisfied")
              << ", delta-v " << std::setprecision(6) << dv << " m/s, margin " << final_margin
              << ", " << wall_s << " s\n";
    return trace.converged && final_margin > 0.0 ? 0 : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STL-constrained convex trajectory optimization"};
    app.require_subcommand(1);

    std::string formula_text, traj_path, spec_path, json_out, output_dir;
    int n_steps = 101;
    double kappa = 0.0, tol = 1e-6;
    int max_iter = 60;
    long seed = 0;
    bool nonlinear = false;

    auto* check = app.add_subcommand("check", "evaluate a formula on a trajectory CSV");
    check->add_option("formula", formula_text, "STL formula (DSL)")->required();
    check->add_option("trajectory", traj_path, "trajectory CSV path")->required();

    auto* compile_cmd = app.add_subcommand("compile", "compile a formula and print its graph");
    compile_cmd->add_option("formula", formula_text, "STL formula (DSL)")->required();
    compile_cmd->add_option("-n,--n-steps", n_steps, "grid size N")->check(CLI::Range(2, 100000));
    compile_cmd->add_option("--json", json_out, "also dump the graph as JSON to this path");

    auto* solve = app.add_subcommand("solve", "run the optimization for a JSON problem spec");
    solve->add_option("spec", spec_path, "problem spec JSON path")->required();
    solve->add_option("-o,--output-dir", output_dir, "output directory");
    auto* kappa_opt = solve->add_option("--kappa", kappa, "smoothing gain override");
    auto* tol_opt = solve->add_option("--tol", tol, "subproblem solver tolerance");
    auto* max_iter_opt = solve->add_option("--max-iter", max_iter, "outer iteration limit");
    solve->add_flag("--nonlinear-reprop", nonlinear, "repropagate with the nonlinear model");
    app.add_option("--seed", seed, "seed for randomized test harnesses (unused by solve)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (check->parsed()) return cmd_check(formula_text, traj_path, kappa);
        if (compile_cmd->parsed()) return cmd_compile(formula_text, n_steps, json_out);
        return cmd_solve(spec_path, output_dir, kappa, kappa_opt->count() > 0, tol,
                         tol_opt->count() > 0, max_iter, max_iter_opt->count() > 0, nonlinear);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
