#include "stlcvx/problem_spec.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace stlcvx {

namespace {

double require_number(const nlohmann::json& obj, const std::string& key) {
    if (!obj.contains(key) || !obj[key].is_number()) {
        throw std::invalid_argument("problem spec: missing numeric field '" + key + "'");
    }
    return obj[key].get<double>();
}

Eigen::Matrix<double, 6, 1> require_state(const nlohmann::json& obj, const std::string& key) {
    if (!obj.contains(key) || !obj[key].is_array() || obj[key].size() != 6) {
        throw std::invalid_argument("problem spec: '" + key + "' must be an array of 6 reals");
    }
    Eigen::Matrix<double, 6, 1> x;
    for (int i = 0; i < 6; ++i) {
        if (!obj[key][i].is_number()) {
            throw std::invalid_argument("problem spec: '" + key + "' must contain numbers");
        }
        x(i) = obj[key][i].get<double>();
    }
    return x;
}

}  // namespace

ProblemSpec load_problem_spec(const nlohmann::json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("problem spec must be a JSON object");
    ProblemSpec spec;

    if (!doc.contains("formula") || !doc["formula"].is_string()) {
        throw std::invalid_argument("problem spec: missing string field 'formula'");
    }
    spec.formula_text = doc["formula"].get<std::string>();
    spec.problem.formula = parse_formula(spec.formula_text);

    if (!doc.contains("plant") || !doc["plant"].is_object()) {
        throw std::invalid_argument("problem spec: missing object field 'plant'");
    }
    const auto& plant = doc["plant"];
    PlantParams params;
    params.mass_kg = require_number(plant, "mass_kg");
    params.mean_motion_rad_s = require_number(plant, "mean_motion_rad_s");
    const double horizon = require_number(plant, "horizon_s");
    const double n_steps = require_number(plant, "n_steps");
    params.max_thrust_n = require_number(plant, "max_thrust_n");
    if (n_steps != std::floor(n_steps) || n_steps < 2) {
        throw std::invalid_argument("problem spec: n_steps must be an integer >= 2");
    }
    params.n_steps = static_cast<int>(n_steps);
    if (!(horizon > 0.0)) throw std::invalid_argument("problem spec: horizon_s must be positive");
    params.dt_s = horizon / (params.n_steps - 1);
    params.validate();
    spec.problem.plant = params;

    if (!doc.contains("boundary") || !doc["boundary"].is_object()) {
        throw std::invalid_argument("problem spec: missing object field 'boundary'");
    }
    spec.problem.x_initial = require_state(doc["boundary"], "x0");
    spec.problem.x_final = require_state(doc["boundary"], "xf");

    ScvxConfig cfg;
    if (doc.contains("scvx")) {
        const auto& s = doc["scvx"];
        if (!s.is_object()) throw std::invalid_argument("problem spec: 'scvx' must be an object");
        auto opt = [&](const char* key, double& target) {
            if (s.contains(key)) {
                if (!s[key].is_number()) {
                    throw std::invalid_argument(std::string("problem spec: scvx field '") + key +
                                                "' must be numeric");
                }
                target = s[key].get<double>();
            }
        };
        opt("trust_radius_init", cfg.trust_radius_init);
        opt("dilate_factor", cfg.dilate_factor);
        opt("shrink_factor", cfg.shrink_factor);
        opt("trust_radius_floor", cfg.trust_radius_floor);
        opt("trust_radius_ceil", cfg.trust_radius_ceil);
        opt("eps_converge", cfg.eps_converge);
        opt("w_omega_init", cfg.w_omega_init);
        opt("w_omega_grow", cfg.w_omega_grow);
        opt("w_omega_relax", cfg.w_omega_relax);
        opt("kappa", cfg.kappa);
        opt("accuracy_factor", cfg.accuracy_factor);
        opt("qp_tol", cfg.qp_tol);
        if (s.contains("max_outer_iter")) cfg.max_outer_iter = s["max_outer_iter"].get<int>();
        if (s.contains("qp_max_iter")) cfg.qp_max_iter = s["qp_max_iter"].get<int>();
        if (s.contains("nonlinear_reprop")) {
            cfg.nonlinear_reprop = s["nonlinear_reprop"].get<bool>();
        }
    }
    cfg.validate();
    spec.problem.config = cfg;

    if (doc.contains("output_dir")) {
        if (!doc["output_dir"].is_string()) {
            throw std::invalid_argument("problem spec: 'output_dir' must be a string");
        }
        spec.output_dir = doc["output_dir"].get<std::string>();
    }
    return spec;
}

ProblemSpec load_problem_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open problem spec: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("problem spec is not valid JSON: " + std::string(e.what()));
    }
    return load_problem_spec(doc);
}

}  // namespace stlcvx
