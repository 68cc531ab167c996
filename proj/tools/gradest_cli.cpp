#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <omp.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gradest/anisotropy.hpp"
#include "gradest/barriers.hpp"
#include "gradest/config_util.hpp"
#include "gradest/scenario.hpp"
#include "gradest/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gradest;

namespace {

fs::path default_out(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("GRADEST_OUT"); env && *env) return env;
    return "gradest_out";
}

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

int cmd_run(const std::string& config, const RunOptions& opt, bool quiet) {
    const Scenario sc = Scenario::load(config);
    const ScenarioResult r = run_scenario(sc, opt);
    if (!quiet)
        for (const auto& rep : r.reports) std::cout << rep.table() << '\n';
    const int status = exit_status(r);
    std::cout << fmt::format("{}: {}{}\n", sc.name, status == 0 ? "PASS" : "FAIL (checks)",
                             r.artifact_dir.empty() ? "" : "  artifacts: " + r.artifact_dir.string());
    return status;
}

int cmd_list(const std::string& dir) {
    for (const auto& l : list_scenarios(dir))
        std::cout << fmt::format("{:<36} {:<28} {}\n", l.file, l.name, l.statement.empty() ? l.description : l.statement);
    return 0;
}

struct BarrierArgs {
    std::string family = "csf";
    double p = 2.0, M = 1.0, L = 1.0, t_max = 1.0, c = 0.5, B = 0.0, slope0 = 0.0;
    int n = 2, nodes = 2048;
    std::string out;
};

int cmd_barrier(const BarrierArgs& a) {
    ProfilePtr prof;
    AlphaFn alpha;
    double B = 0.0;
    json summary;
    if (a.family == "csf") {
        ComparisonOptions co;
        co.nodes = a.nodes;
        auto base = csf_profile(a.L / a.M, a.t_max / (a.M * a.M), co);
        prof = std::make_shared<ScaledProfile>(base, a.M, 1.0);
        alpha = csf_alpha();
        summary = {{"min_discrete_residual", base->min_discrete_residual(0.0)},
                   {"concavity_violation", base->max_concavity_violation(9.0 * base->start_time())},
                   {"monotonicity_violation", base->max_monotonicity_violation(9.0 * base->start_time())}};
    } else if (a.family == "plaplacian") {
        prof = std::make_shared<PLapBarrier>(a.p, a.M, a.L, a.t_max);
        alpha = plap_alpha(a.p);
        summary = {{"R_p", rp_constant(a.p)}, {"F_p_inf", fp_limit(a.p)}};
    } else if (a.family == "translator") {
        alpha = csf_alpha();
        B = a.B;
        auto tr = translator_profile(alpha, a.c, a.B, a.L, a.slope0);
        prof = tr;
        summary = tr->describe();
    } else if (a.family == "radial") {
        const RadialProfile rp = radial_profile(a.n);
        std::ofstream os(a.out.empty() ? "radial.csv" : a.out);
        os << "z,phi,dphi,ddphi,residual\n";
        for (std::size_t k = 0; k < rp.node_count(); k += 10) {
            const double z = rp.node(k);
            os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", z, rp.value(z), rp.dz(z), rp.dzz(z),
                              k == 0 ? 0.0 : rp.residual(z));
        }
        std::cout << json{{"n", a.n}, {"phi0", rp.phi0()}, {"phi0_exact_limit", radial_phi0_exact(a.n)},
                          {"slope_at_z_max", rp.dz(RadialProfile::kZmax)}}
                         .dump(2)
                  << '\n';
        return 0;
    } else {
        throw ConfigError("unknown barrier family '" + a.family + "'");
    }
    const double zmax = std::min(prof->z_max(), a.L);
    const double tmax = std::min(prof->t_max(), a.t_max);
    const auto zs = linspace(0.0, zmax, 201);
    const auto ts = linspace(0.0, tmax, 21);
    export_profile_csv(*prof, alpha, B, zs, ts, a.out.empty() ? a.family + ".csv" : a.out);
    json j = {{"family", a.family}, {"profile", prof->describe()}, {"summary", summary}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

struct AnisoArgs {
    std::string norm = "ellipsoid";
    std::string params = "{}";
    std::string mobility = "constant";
    double delta = 0.0;
    int dim = 2;
    int samples = 10000;
    std::uint64_t seed = 11;
};

int cmd_aniso(const AnisoArgs& a) {
    json params;
    try {
        params = json::parse(a.params);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("--params: ") + e.what());
    }
    const auto model = make_anisotropy(a.norm, params, a.mobility, a.delta, a.dim);
    const auto hom = verify_homogeneity(*model, 1000, a.seed);
    const auto k = sphere_constants(*model);
    const auto lem = ellipticity_lemma_check(*model, k, a.samples, 1e3, a.seed);
    const bool ok = hom.max() <= 1e-6 && lem.min_ratio >= 1.0 - 1e-4;
    json j = {{"anisotropy", model->to_json()},
              {"homogeneity", hom.to_json()},
              {"constants", k.to_json()},
              {"ellipticity", lem.to_json()},
              {"pass", ok}};
    std::cout << j.dump(2) << '\n';
    return ok ? 0 : 2;
}

int cmd_sweep(const std::string& config, int workers, const RunOptions& opt) {
    const json cfg = load_json(config);
    check_keys(cfg, {"base", "axes"}, "sweep");
    json base = cfg.at("base");
    if (base.is_string()) {
        fs::path p = base.get<std::string>();
        if (p.is_relative()) p = fs::path(config).parent_path() / p;
        base = load_json(p.string());
    }
    const auto rows = run_sweep(base, cfg.at("axes"), workers, opt);
    std::cout << sweep_table(rows);
    int status = 0;
    for (const auto& r : rows) status = std::max(status, r.status == 1 ? 1 : r.status);
    if (std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == 1; })) status = 1;
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gradient estimates for degenerate quasilinear parabolic flows: scenario runner"};
    app.require_subcommand(1);

    std::string out_flag;
    std::optional<std::uint64_t> seed;
    double tol_scale = 1.0;
    int workers = 0;
    bool serial = false, quiet = false;
    auto add_common = [&](CLI::App* c) {
        c->add_option("--out", out_flag, "artifact root (default $GRADEST_OUT or ./gradest_out)");
        c->add_option("--seed", seed, "override the scenario seed");
        c->add_option("--tolerance-scale", tol_scale, "multiply every check tolerance")->check(CLI::PositiveNumber);
        c->add_option("--workers", workers, "threads (run) or concurrent scenarios (sweep)")->check(CLI::NonNegativeNumber);
        c->add_flag("--serial", serial, "use the serial reference kernels");
    };

    std::string config;
    auto* run = app.add_subcommand("run", "run one scenario");
    run->add_option("--config,config", config, "scenario JSON")->required();
    run->add_flag("--quiet", quiet, "only print the verdict line");
    add_common(run);

    std::string list_dir = "scenarios";
    auto* list = app.add_subcommand("list", "list bundled scenarios");
    list->add_option("dir", list_dir, "scenario directory");

    BarrierArgs ba;
    auto* barrier = app.add_subcommand("barrier", "build a barrier profile and export it as CSV");
    barrier->add_option("--family", ba.family)->check(CLI::IsMember({"csf", "plaplacian", "translator", "radial"}));
    barrier->add_option("--p", ba.p);
    barrier->add_option("--M", ba.M);
    barrier->add_option("--L", ba.L);
    barrier->add_option("--t-max", ba.t_max);
    barrier->add_option("--c", ba.c);
    barrier->add_option("--B", ba.B);
    barrier->add_option("--slope0", ba.slope0);
    barrier->add_option("--n", ba.n);
    barrier->add_option("--nodes", ba.nodes);
    barrier->add_option("--csv", ba.out, "output CSV path");

    AnisoArgs aa;
    auto* aniso = app.add_subcommand("aniso-check", "homogeneity residuals, sphere constants and ellipticity check");
    aniso->add_option("--norm", aa.norm)->check(CLI::IsMember({"euclidean", "ellipsoid", "quartic"}));
    aniso->add_option("--params", aa.params, "norm parameters as JSON");
    aniso->add_option("--mobility", aa.mobility)->check(CLI::IsMember({"constant", "tilted"}));
    aniso->add_option("--delta", aa.delta);
    aniso->add_option("--dim", aa.dim);
    aniso->add_option("--samples", aa.samples);
    aniso->add_option("--seed", aa.seed);

    std::string sweep_cfg;
    auto* sweep = app.add_subcommand("sweep", "parameter grid over a base scenario");
    sweep->add_option("--config,config", sweep_cfg, "sweep JSON: {\"base\": ..., \"axes\": {path: [values]}}")
        ->required();
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        RunOptions opt;
        opt.out_root = default_out(out_flag);
        opt.seed = seed;
        opt.tolerance_scale = tol_scale;
        opt.exec = serial ? Exec::Serial : Exec::Parallel;
        opt.log = &std::cerr;
        if (*run) {
            if (workers > 0) omp_set_num_threads(workers);
            return cmd_run(config, opt, quiet);
        }
        if (*list) return cmd_list(list_dir);
        if (*barrier) return cmd_barrier(ba);
        if (*aniso) return cmd_aniso(aa);
        if (*sweep) return cmd_sweep(sweep_cfg, std::max(1, workers), opt);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
