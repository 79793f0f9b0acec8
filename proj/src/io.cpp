#include "wrinkle/io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "wrinkle/energy.hpp"
#include "wrinkle/recovery.hpp"
#include "wrinkle/verify.hpp"

namespace wrinkle::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw InvalidConfigError("parse_config: unknown key " + path + "." + it.key());
    }
}

double get_num(const json& j, const char* key, double fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number())
        throw InvalidConfigError("parse_config: " + path + "." + key + " must be a number");
    return j[key].get<double>();
}

}  // namespace

std::map<std::string, double> default_tolerances() {
    return {
        {"oracle_max_norm", 1e-3},      {"el_decay_factor", 3.5},
        {"plancherel_rel", 1e-10},      {"excess_rel", 1e-8},
        {"homogeneity_rel", 1e-12},     {"convexity_slack", 1e-12},
        {"gradient_rel", 1e-6},         {"feasibility", 1e-10},
        {"equipartition_gap", 0.05},    {"smallk_fraction", 1e-6},
        {"logdiv_r2", 0.99},            {"grid_stability_rel", 0.01},
        {"gamma_gap", 0.25},            {"periodicity", 1e-10},
        {"kernel_excess", 1e-12},
    };
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw InvalidConfigError(std::string("parse_config: malformed JSON: ") + e.what());
    }
    RunConfig cfg;
    reject_unknown(j, {"lame", "grids", "tolerances", "schedule", "output_dir", "seed", "measure_path"},
                   "$");
    if (j.contains("lame")) {
        const auto& l = j["lame"];
        reject_unknown(l, {"T_in", "T_out", "R_in", "R_out"}, "$.lame");
        cfg.lame.T_in = get_num(l, "T_in", cfg.lame.T_in, "$.lame");
        cfg.lame.T_out = get_num(l, "T_out", cfg.lame.T_out, "$.lame");
        cfg.lame.R_in = get_num(l, "R_in", cfg.lame.R_in, "$.lame");
        cfg.lame.R_out = get_num(l, "R_out", cfg.lame.R_out, "$.lame");
    }
    if (j.contains("grids")) {
        const auto& g = j["grids"];
        reject_unknown(g, {"nr_relaxed", "nr_energy", "nr_measure", "nk", "ntheta"}, "$.grids");
        cfg.grids.nr_relaxed = std::size_t(get_num(g, "nr_relaxed", double(cfg.grids.nr_relaxed), "$.grids"));
        cfg.grids.nr_energy = std::size_t(get_num(g, "nr_energy", double(cfg.grids.nr_energy), "$.grids"));
        cfg.grids.nr_measure = std::size_t(get_num(g, "nr_measure", double(cfg.grids.nr_measure), "$.grids"));
        cfg.grids.nk = std::size_t(get_num(g, "nk", double(cfg.grids.nk), "$.grids"));
        cfg.grids.ntheta = std::size_t(get_num(g, "ntheta", double(cfg.grids.ntheta), "$.grids"));
        if (cfg.grids.ntheta < 4 || cfg.grids.ntheta % 2 != 0)
            throw InvalidConfigError("parse_config: $.grids.ntheta must be even and >= 4");
    }
    if (j.contains("tolerances")) {
        for (auto it = j["tolerances"].begin(); it != j["tolerances"].end(); ++it) {
            if (cfg.tolerances.find(it.key()) == cfg.tolerances.end())
                throw InvalidConfigError("parse_config: unknown key $.tolerances." + it.key());
            const double v = it.value().get<double>();
            if (!(v > 0.0))
                throw InvalidConfigError("parse_config: $.tolerances." + it.key() + " must be positive");
            cfg.tolerances[it.key()] = v;
        }
    }
    if (j.contains("schedule")) {
        cfg.schedule.clear();
        if (j["schedule"].is_array()) {
            for (const auto& v : j["schedule"]) cfg.schedule.push_back(v.get<double>());
        } else if (j["schedule"].is_object()) {
            reject_unknown(j["schedule"], {"L_min", "count"}, "$.schedule");
            const double L_min = get_num(j["schedule"], "L_min", 512.0, "$.schedule");
            const long count = long(get_num(j["schedule"], "count", 4.0, "$.schedule"));
            double L = L_min;
            for (long q = 0; q < count; ++q, L *= 2.0) cfg.schedule.push_back(L);
        } else {
            throw InvalidConfigError("parse_config: $.schedule must be a list or {L_min, count}");
        }
        if (cfg.schedule.empty()) throw InvalidConfigError("parse_config: $.schedule is empty");
    }
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("measure_path")) cfg.measure_path = j["measure_path"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.lame.validate();
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    json j;
    j["lame"] = {{"T_in", cfg.lame.T_in},
                 {"T_out", cfg.lame.T_out},
                 {"R_in", cfg.lame.R_in},
                 {"R_out", cfg.lame.R_out}};
    j["grids"] = {{"nr_relaxed", cfg.grids.nr_relaxed},
                  {"nr_energy", cfg.grids.nr_energy},
                  {"nr_measure", cfg.grids.nr_measure},
                  {"nk", cfg.grids.nk},
                  {"ntheta", cfg.grids.ntheta}};
    j["tolerances"] = cfg.tolerances;
    j["schedule"] = cfg.schedule;
    j["output_dir"] = cfg.output_dir;
    if (!cfg.measure_path.empty()) j["measure_path"] = cfg.measure_path;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

std::string config_hash_hex(const RunConfig& cfg) {
    // FNV-1a over the canonical serialization (nlohmann keeps keys sorted).
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

void write_manifest(const ResultManifest& man, const std::string& path) {
    json j;
    j["command"] = man.command;
    j["config_hash"] = man.config_hash;
    j["version"] = man.version;
    j["files"] = man.files;
    j["timings_ms"] = man.timings_ms;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

void save_measure(const measure::FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol,
                  const std::string& csv_path, const std::string& json_path) {
    const auto d = mu.db_dr();
    std::ofstream csv(csv_path);
    csv << "r,k,b,db_dr\n";
    for (std::size_t i = 0; i < mu.grid.size(); ++i)
        for (std::size_t j = 0; j < mu.k.size(); ++j)
            csv << fmt(mu.grid.node(i)) << "," << fmt(mu.k[j]) << "," << fmt(mu.b(i, j)) << ","
                << fmt(d(i, j)) << "\n";

    const auto split = measure::eval_Finfty(mu, sol);
    json j;
    j["grid"] = {{"lo", mu.grid.front()},
                 {"hi", mu.grid.back()},
                 {"n", mu.grid.size()},
                 {"cell_width", mu.grid.cell_width()}};
    j["k"] = mu.k;
    j["constraint_residual"] = measure::constraint_residual(mu, sol);
    j["energy"] = {{"stretching", split.stretching}, {"bending", split.bending}, {"total", split.total}};
    std::ofstream out(json_path);
    out << j.dump(2) << "\n";
}

measure::FrequencyMeasure load_measure(const std::string& csv_path, const std::string& json_path) {
    std::ifstream jin(json_path);
    if (!jin) throw InvalidConfigError("load_measure: cannot open " + json_path);
    json j = json::parse(jin);
    measure::FrequencyMeasure mu;
    const std::size_t n = j["grid"]["n"].get<std::size_t>();
    const double cw = j["grid"]["cell_width"].get<double>();
    const double lo = j["grid"]["lo"].get<double>();
    const double hi = j["grid"]["hi"].get<double>();
    if (cw > 0.0)
        mu.grid = RadialGrid::cell_centered(lo - 0.5 * cw, hi + 0.5 * cw, n);
    else
        throw InvalidConfigError("load_measure: only cell-centered grids are serialized");
    mu.k = j["k"].get<std::vector<double>>();
    mu.b = Array2D(n, mu.k.size());

    std::ifstream csv(csv_path);
    if (!csv) throw InvalidConfigError("load_measure: cannot open " + csv_path);
    std::string line;
    std::getline(csv, line);  // header
    std::size_t row = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        double vals[4];
        for (int t = 0; t < 4; ++t) {
            if (!std::getline(ss, tok, ',')) throw InvalidConfigError("load_measure: short CSV row");
            vals[t] = std::stod(tok);
        }
        const std::size_t i = row / mu.k.size(), jj = row % mu.k.size();
        if (i >= n) throw InvalidConfigError("load_measure: too many CSV rows");
        mu.b(i, jj) = vals[2];
        ++row;
    }
    mu.validate();
    return mu;
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

json hypothesis_json(const relaxed::HypothesisReport& rep) {
    return {{"admissible", rep.admissible},
            {"load_moment_ok", rep.load_moment_ok},
            {"load_moment_lhs", rep.load_moment_lhs},
            {"load_moment_rhs", rep.load_moment_rhs},
            {"load_ratio_ok", rep.load_ratio_ok},
            {"load_ratio_lhs", rep.load_ratio_lhs},
            {"load_ratio_rhs", rep.load_ratio_rhs}};
}

int cmd_relaxed(const RunConfig& cfg, ResultManifest& man) {
    Timer timer;
    const auto rep = relaxed::check_hypothesis(cfg.lame);
    json out;
    out["hypothesis_report"] = hypothesis_json(rep);
    if (!rep.admissible) {
        std::ofstream(join(cfg.output_dir, "relaxed.json")) << out.dump(2) << "\n";
        man.files.push_back("relaxed.json");
        return 1;
    }
    const auto sol = relaxed::RelaxedSolution::build(cfg.lame);
    const auto grid = RadialGrid::closed_uniform(cfg.lame.R_in, cfg.lame.R_out, cfg.grids.nr_relaxed);
    const auto res = relaxed::minimize_relaxed_numeric(cfg.lame, grid);
    double max_err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        max_err = std::max(max_err, std::abs(res.v[i] - sol.u(grid.node(i))));
    out["R0"] = sol.R0();
    out["R0_taut_form"] = sol.R0_taut_form();
    out["E0"] = sol.E0();
    out["E0_quadrature"] = relaxed::relaxed_energy_E0(sol, grid);
    out["oracle"] = {{"max_norm_error", max_err},
                     {"sign_change_radius", res.sign_change_radius},
                     {"objective", res.objective},
                     {"iterations", res.iterations},
                     {"grad_norm", res.grad_norm}};
    const double d_quad = std::abs(res.sign_change_radius - sol.R0());
    const double d_taut = std::abs(res.sign_change_radius - sol.R0_taut_form());
    out["oracle"]["verdict"] =
        d_quad <= d_taut ? "matched-derivative quadratic root" : "fully-taut zero sqrt(-A/B)";
    std::ofstream(join(cfg.output_dir, "relaxed.json")) << out.dump(2) << "\n";
    man.files.push_back("relaxed.json");

    std::ofstream csv(join(cfg.output_dir, "relaxed.csv"));
    csv << "r,ustar,ustar_prime,v_numeric\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid.node(i);
        csv << fmt(r) << "," << fmt(sol.u(r)) << "," << fmt(sol.du(r)) << "," << fmt(res.v[i]) << "\n";
    }
    man.files.push_back("relaxed.csv");
    man.timings_ms["relaxed"] = timer.ms();
    return 0;
}

int cmd_energy_eval(const RunConfig& cfg, ResultManifest& man) {
    Timer timer;
    const auto sol = relaxed::RelaxedSolution::build(cfg.lame);
    const auto grid = RadialGrid::closed_uniform(cfg.lame.R_in, cfg.lame.R_out, cfg.grids.nr_energy);
    const auto field =
        energy::make_bandlimited_field(grid, cfg.grids.ntheta, 2.0 * std::acos(-1.0), cfg.seed);
    const double h = 1e-3;
    const auto chk = energy::excess_identity_check(field, h, sol);
    const auto fl = energy::eval_FL(field, 1.0, sol);
    json out;
    out["E_h"] = chk.eh;
    out["E0"] = sol.E0();
    out["excess_form"] = chk.excess;
    out["identity_residual_rel"] = chk.residual_rel;
    out["h"] = h;
    out["FL_breakdown"] = {{"term1", fl.term[0]}, {"term2", fl.term[1]}, {"term3", fl.term[2]},
                           {"term4", fl.term[3]}, {"term5", fl.term[4]}, {"term6", fl.term[5]},
                           {"total", fl.total}};
    std::ofstream(join(cfg.output_dir, "energy.json")) << out.dump(2) << "\n";
    man.files.push_back("energy.json");

    std::ofstream csv(join(cfg.output_dir, "field.csv"));
    csv << "r,theta,u_r,u_theta,xi\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t q = 0; q < field.theta_count(); ++q) {
            const double th = field.period * double(q) / double(field.theta_count());
            csv << fmt(grid.node(i)) << "," << fmt(th) << "," << fmt(field.u_r(i, q)) << ","
                << fmt(field.u_theta(i, q)) << "," << fmt(field.xi(i, q)) << "\n";
        }
    man.files.push_back("field.csv");
    man.timings_ms["energy_eval"] = timer.ms();
    return 0;
}

measure::MinimizeResult run_minimize(const RunConfig& cfg, const relaxed::RelaxedSolution& sol) {
    const auto grid =
        RadialGrid::cell_centered(cfg.lame.R_in, sol.R0(), cfg.grids.nr_measure);
    const auto k_set = measure::suggest_k_set(sol, grid, cfg.grids.nk);
    return measure::minimize_Finfty(sol, grid, k_set);
}

int cmd_minimize(const RunConfig& cfg, ResultManifest& man) {
    Timer timer;
    const auto sol = relaxed::RelaxedSolution::build(cfg.lame);
    const auto res = run_minimize(cfg, sol);
    save_measure(res.mu, sol, join(cfg.output_dir, "measure.csv"), join(cfg.output_dir, "measure.json"));
    man.files.push_back("measure.csv");
    man.files.push_back("measure.json");

    const auto eq = measure::equipartition_report(res.mu, sol);
    const auto sk = measure::smallk_threshold_sweep(res.mu);
    json out;
    out["iterations"] = res.iterations;
    out["pg_norm"] = res.pg_norm;
    out["constraint_residual"] = res.constraint_residual;
    out["energy"] = {{"stretching", res.energy.stretching},
                     {"bending", res.energy.bending},
                     {"total", res.energy.total}};
    out["equipartition"] = {{"global_gap", eq.global_gap},
                            {"bending_total", eq.bending_total},
                            {"stretching_total", eq.stretching_total}};
    out["smallk"] = {{"threshold", sk.threshold},
                     {"mass_below", sk.mass_below},
                     {"fraction_below", sk.fraction_below}};
    std::ofstream(join(cfg.output_dir, "minimize.json")) << out.dump(2) << "\n";
    man.files.push_back("minimize.json");
    man.timings_ms["minimize"] = timer.ms();
    return 0;
}

void write_gamma_csv(const std::vector<recovery::GammaRow>& rows, const std::string& path) {
    std::ofstream csv(path);
    csv << "L,M,eps,delta,L0,n,term1,term2,term3,term4,term5,term6,total,Finfty_target,"
           "measure_discrepancy,constraint_max_rel,periodicity_defect,kernel_bound_excess\n";
    for (const auto& r : rows) {
        csv << fmt(r.params.L) << "," << r.params.M << "," << fmt(r.params.eps) << ","
            << fmt(r.params.delta) << "," << fmt(r.params.L0) << "," << r.params.n;
        for (int q = 0; q < 6; ++q) csv << "," << fmt(r.fl.term[q]);
        csv << "," << fmt(r.fl.total) << "," << fmt(r.finfty_target) << ","
            << fmt(r.measure_discrepancy) << "," << fmt(r.constraint_max_rel) << ","
            << fmt(r.periodicity_defect) << "," << fmt(r.kernel_bound_excess) << "\n";
    }
}

int cmd_recover(const RunConfig& cfg, ResultManifest& man, bool full_scan) {
    Timer timer;
    const auto sol = relaxed::RelaxedSolution::build(cfg.lame);
    measure::FrequencyMeasure mu;
    if (!cfg.measure_path.empty()) {
        mu = load_measure(cfg.measure_path + ".csv", cfg.measure_path + ".json");
    } else {
        auto res = run_minimize(cfg, sol);
        mu = std::move(res.mu);
        if (full_scan) {
            save_measure(mu, sol, join(cfg.output_dir, "measure.csv"),
                         join(cfg.output_dir, "measure.json"));
            man.files.push_back("measure.csv");
            man.files.push_back("measure.json");
        }
    }
    const auto rows = recovery::run_gamma_limsup(mu, cfg.schedule, sol);
    write_gamma_csv(rows, join(cfg.output_dir, "gamma.csv"));
    man.files.push_back("gamma.csv");
    man.timings_ms[full_scan ? "gamma_scan" : "recover"] = timer.ms();
    return 0;
}

}  // namespace

int run_command(const std::string& name, const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    ResultManifest man;
    man.command = name;
    man.config_hash = config_hash_hex(cfg);
    man.version = kVersion;
    int status = 0;
    if (name == "relaxed") {
        status = cmd_relaxed(cfg, man);
    } else if (name == "energy-eval") {
        status = cmd_energy_eval(cfg, man);
    } else if (name == "minimize") {
        status = cmd_minimize(cfg, man);
    } else if (name == "recover") {
        status = cmd_recover(cfg, man, false);
    } else if (name == "gamma-scan") {
        status = cmd_recover(cfg, man, true);
    } else if (name == "verify") {
        Timer timer;
        const std::string report = join(cfg.output_dir, "verify.txt");
        std::ofstream out(report);
        status = verify::run_acceptance(cfg, out) ? 0 : 1;
        man.files.push_back("verify.txt");
        man.timings_ms["verify"] = timer.ms();
    } else {
        throw InvalidConfigError("run_command: unknown command " + name);
    }
    write_manifest(man, join(cfg.output_dir, "manifest.json"));
    return status;
}

}  // namespace wrinkle::io
