#pragma once

#include <string>

#include "json.hpp"
#include "stlcvx/scvx.hpp"

namespace stlcvx {

// JSON problem document driving the solve subcommand:
// {
//   "formula": "eventually (norm(r) >= 2500)",
//   "plant": {"mass_kg": 1000, "mean_motion_rad_s": 7.292e-5,
//             "horizon_s": 5000, "n_steps": 101, "max_thrust_n": 1},
//   "boundary": {"x0": [6 reals], "xf": [6 reals]},
//   "scvx": { optional ScvxConfig overrides },
//   "output_dir": "out/example1"
// }
struct ProblemSpec {
    ScvxProblem problem;
    std::string formula_text;
    std::string output_dir;
};

ProblemSpec load_problem_spec(const nlohmann::json& doc);
ProblemSpec load_problem_spec_file(const std::string& path);

}  // namespace stlcvx
