#include "gradest/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "gradest/barriers.hpp"
#include "gradest/boundary_geometry.hpp"
#include "gradest/coeff_models.hpp"
#include "gradest/config_util.hpp"
#include "gradest/grid_io.hpp"

namespace gradest {

using json = nlohmann::ordered_json;

namespace {

Vec vec_from(const json& block, const char* key, const std::string& where) {
    const auto v = require<std::vector<double>>(block, key, where);
    if (v.empty() || static_cast<int>(v.size()) > kMaxDim) throw ConfigError(where + "." + key + ": bad length");
    Vec out(static_cast<int>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<int>(k)] = v[k];
    return out;
}

std::vector<int> resolution_from(const json& block, int n, const std::string& where) {
    if (!block.contains("resolution")) throw ConfigError(where + ": missing key 'resolution'");
    const json& r = block.at("resolution");
    if (r.is_number_integer()) return std::vector<int>(n, r.get<int>());
    auto v = require<std::vector<int>>(block, "resolution", where);
    if (static_cast<int>(v.size()) != n) throw ConfigError(where + ".resolution: expected " + std::to_string(n) + " entries");
    return v;
}

BoundaryCondition bc_from(const json& block, const std::string& where) {
    const auto s = require<std::string>(block, "bc", where);
    if (s == "dirichlet") return BoundaryCondition::Dirichlet;
    if (s == "neumann") return BoundaryCondition::Neumann;
    throw ConfigError(where + ".bc: expected 'dirichlet' or 'neumann', got '" + s + "'");
}

}  // namespace

DomainSpec parse_domain(const json& block) {
    const std::string where = "domain";
    const auto kind = require<std::string>(block, "kind", where);
    DomainSpec spec;
    try {
        if (kind == "periodic") {
            check_keys(block, {"kind", "dim", "generators", "resolution"}, where);
            LatticeSpec lat;
            if (block.contains("generators")) {
                const auto g = require<std::vector<std::vector<double>>>(block, "generators", where);
                for (const auto& row : g) {
                    Vec v(static_cast<int>(row.size()));
                    for (std::size_t k = 0; k < row.size(); ++k) v[static_cast<int>(k)] = row[k];
                    lat.generators.push_back(v);
                }
                if (block.contains("dim") && require<int>(block, "dim", where) != lat.dim())
                    throw ConfigError(where + ": dim disagrees with the generators");
            } else {
                const int n = require<int>(block, "dim", where);
                if (n < 1 || n > kMaxDim) throw ConfigError(where + ".dim out of range");
                lat = LatticeSpec::unit_cube(n, 8);
            }
            lat.resolution = resolution_from(block, lat.dim(), where);
            spec = DomainSpec::periodic(std::move(lat));
        } else if (kind == "rectangle") {
            check_keys(block, {"kind", "lower", "upper", "resolution", "bc"}, where);
            Vec lo = vec_from(block, "lower", where), hi = vec_from(block, "upper", where);
            if (lo.size() != hi.size()) throw ConfigError(where + ": lower and upper differ in length");
            spec = DomainSpec::rectangle(lo, hi, resolution_from(block, static_cast<int>(lo.size()), where),
                                         bc_from(block, where));
        } else if (kind == "disk") {
            check_keys(block, {"kind", "center", "radius", "resolution", "bc"}, where);
            spec = DomainSpec::disk(vec_from(block, "center", where), require<double>(block, "radius", where),
                                    require<int>(block, "resolution", where), bc_from(block, where));
        } else {
            throw ConfigError(where + ": unknown kind '" + kind + "'");
        }
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return spec;
}

// ---------------------------------------------------------------------------

Scenario Scenario::from_json(const json& j) {
    check_keys(j, {"schema_version", "name", "statement", "description", "model", "domain", "initial", "evolve",
                   "barrier", "checks", "fault", "output", "seed", "expect_failure"},
               "scenario");
    const int version = require<int>(j, "schema_version", "scenario");
    if (version != kScenarioSchemaVersion)
        throw ConfigError(fmt::format("scenario: schema_version {} is not supported (expected {})", version,
                                      kScenarioSchemaVersion));
    Scenario s;
    s.name = require<std::string>(j, "name", "scenario");
    if (s.name.empty() || s.name.find_first_of("/\\ ") != std::string::npos)
        throw ConfigError("scenario.name must be a nonempty identifier");
    s.statement = optional<std::string>(j, "statement", "", "scenario");
    s.description = optional<std::string>(j, "description", "", "scenario");
    s.model = require<json>(j, "model", "scenario");
    s.domain = require<json>(j, "domain", "scenario");
    s.initial = require<json>(j, "initial", "scenario");
    s.evolve = j.value("evolve", json());
    s.barrier = j.value("barrier", json());
    s.checks = require<json>(j, "checks", "scenario");
    if (!s.checks.is_array()) throw ConfigError("scenario.checks must be an array");
    s.fault = j.value("fault", json());
    s.output = j.value("output", json::object());
    s.seed = optional<std::uint64_t>(j, "seed", 11, "scenario");
    s.expect_failure = optional<bool>(j, "expect_failure", false, "scenario");
    s.validate();
    return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open scenario '" + path.string() + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

json Scenario::to_json() const {
    json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["name"] = name;
    j["statement"] = statement;
    j["description"] = description;
    j["model"] = model;
    j["domain"] = domain;
    j["initial"] = initial;
    if (!evolve.is_null()) j["evolve"] = evolve;
    if (!barrier.is_null()) j["barrier"] = barrier;
    j["checks"] = checks;
    if (!fault.is_null()) j["fault"] = fault;
    j["output"] = output;
    j["seed"] = seed;
    j["expect_failure"] = expect_failure;
    return j;
}

namespace {

const std::vector<std::string> kCheckKinds = {"modulus",         "gradient_bound",   "boundary_estimate",
                                              "aniso_diagnostics", "barrier_residual", "radial_profile",
                                              "radial_supersolution"};

}  // namespace

void Scenario::validate() const {
    const DomainSpec spec = parse_domain(domain);
    const auto kind = require<std::string>(model, "kind", "model");
    const bool has_barrier = !barrier.is_null() && require<std::string>(barrier, "kind", "barrier") != "none";
    if (!evolve.is_null()) {
        check_keys(evolve, {"t_end", "checkpoints", "sigma", "refresh", "exclude_ring"}, "evolve");
        if (!(require<double>(evolve, "t_end", "evolve") > 0.0)) throw ConfigError("evolve.t_end must be positive");
    }
    if (!output.is_object()) throw ConfigError("output: expected an object");
    check_keys(output, {"snapshots", "barrier_csv"}, "output");
    if (!fault.is_null()) {
        check_keys(fault, {"kind", "factor"}, "fault");
        const auto f = require<std::string>(fault, "kind", "fault");
        if (f != "scale_state" && f != "scale_barrier") throw ConfigError("fault: unknown kind '" + f + "'");
        require<double>(fault, "factor", "fault");
    }
    for (const auto& c : checks) {
        const auto ck = require<std::string>(c, "kind", "checks[]");
        if (std::find(kCheckKinds.begin(), kCheckKinds.end(), ck) == kCheckKinds.end())
            throw ConfigError("checks: unknown kind '" + ck + "'");
        const bool needs_run = ck == "modulus" || ck == "gradient_bound" || ck == "boundary_estimate" ||
                               ck == "radial_supersolution";
        if (needs_run && evolve.is_null()) throw ConfigError("check '" + ck + "' needs an evolve block");
        if ((ck == "modulus" || ck == "boundary_estimate" || ck == "barrier_residual") && !has_barrier)
            throw ConfigError("check '" + ck + "' needs a barrier");
        if (ck == "boundary_estimate" && spec.bc != BoundaryCondition::Dirichlet)
            throw ConfigError("check 'boundary_estimate' requires a Dirichlet domain, got " + gradest::to_string(spec.bc));
        if (ck == "modulus" && spec.bc == BoundaryCondition::Dirichlet)
            throw ConfigError("check 'modulus' requires a periodic or Neumann domain");
        if (ck == "aniso_diagnostics" && kind != "anisotropic")
            throw ConfigError("check 'aniso_diagnostics' requires an anisotropic model");
        if (ck == "radial_supersolution" && require<std::string>(initial, "kind", "initial") != "cone")
            throw ConfigError("check 'radial_supersolution' requires cone initial data");
    }
}

// ---------------------------------------------------------------------------

bool ScenarioResult::pass() const {
    return std::all_of(reports.begin(), reports.end(), [](const VerificationReport& r) { return r.pass(); });
}

json ScenarioResult::to_json() const {
    json j;
    j["name"] = name;
    j["pass"] = pass();
    j["info"] = info;
    json reps = json::array();
    for (const auto& r : reports) reps.push_back(r.to_json());
    j["reports"] = reps;
    return j;
}

int exit_status(const ScenarioResult& r) { return r.pass() ? 0 : 2; }

namespace {

class ScaledValueProfile final : public BarrierProfile {
public:
    ScaledValueProfile(ProfilePtr base, double f) : base_(std::move(base)), f_(f) {}
    double value(double z, double t) const override { return f_ * base_->value(z, t); }
    double dz(double z, double t) const override { return f_ * base_->dz(z, t); }
    double dzz(double z, double t) const override { return f_ * base_->dzz(z, t); }
    double dt(double z, double t) const override { return f_ * base_->dt(z, t); }
    double z_max() const override { return base_->z_max(); }
    double t_max() const override { return base_->t_max(); }
    std::string kind() const override { return base_->kind(); }
    json describe() const override { return {{"corrupted", base_->describe()}, {"factor", f_}}; }
    double amplitude() const override { return f_ * base_->amplitude(); }

private:
    ProfilePtr base_;
    double f_;
};

std::vector<double> boundary_distances(const AnisotropyModel* am, const Grid& grid, double& offset);

const AnisotropicModel* as_anisotropic(const CoefficientModel& m) { return dynamic_cast<const AnisotropicModel*>(&m); }

struct Context {
    const Scenario& sc;
    const RunOptions& opt;
    std::uint64_t seed;
    std::shared_ptr<const Grid> grid;
    std::shared_ptr<const CoefficientModel> model;
    GridFunction u0;
    double M = 0.0;    // oscillation of the initial data
    double sup = 0.0;  // sup |u0|
    double t_end = 0.0;
    std::optional<SphereConstants> sphere;

    ProfilePtr modulus;          // psi(s, t) for pair checks
    DistanceBarrier boundary;    // phi(d, t) for boundary checks
    json barrier_info = json::object();
    std::function<VerificationReport()> barrier_residual;
    AlphaFn alpha;  // equation the modulus profile solves

    std::vector<Checkpoint> checkpoints;
    json info = json::object();

    std::optional<std::vector<double>> dist;  // boundary distances (Dirichlet)
    double dist_offset = 0.0;
    bool dist_aniso = false;

    void log(const std::string& s) const {
        if (opt.log) *opt.log << "[" << sc.name << "] " << s << '\n';
    }

    const std::vector<double>& distances(bool aniso) {
        if (!dist || dist_aniso != aniso) {
            const auto* am = dynamic_cast<const AnisotropicModel*>(model.get());
            if (aniso && !am) throw ConfigError("anisotropic distance needs an anisotropic model");
            dist = boundary_distances(aniso ? &am->anisotropy() : nullptr, *grid, dist_offset);
            dist_aniso = aniso;
        }
        return *dist;
    }

    const SphereConstants& constants() {
        if (!sphere) {
            const auto* am = as_anisotropic(*model);
            if (!am) throw ConfigError("anisotropy constants requested for a non-anisotropic model");
            sphere = sphere_constants(am->anisotropy());
        }
        return *sphere;
    }
};

GridFunction build_initial(Context& cx) {
    const json& b = cx.sc.initial;
    const std::string where = "initial";
    check_keys(b, {"kind", "amplitude", "axis", "mollify", "width", "center", "slope", "offset", "path"}, where);
    const auto kind = require<std::string>(b, "kind", where);
    const DomainSpec& spec = cx.grid->spec();
    const double amp = optional<double>(b, "amplitude", 1.0, where);
    const double r = optional<double>(b, "mollify", 0.0, where);
    if (r < 0.0) throw ConfigError(where + ".mollify must be nonnegative");
    auto from_field = [&](const Field& f) { return r > 0.0 ? mollify(cx.grid, f, r) : sample(cx.grid, f); };
    try {
        if (kind == "square_wave") {
            const int axis = optional<int>(b, "axis", 0, where);
            if (spec.is_periodic()) {
                GridFunction u = make_square_wave(cx.grid, axis, amp);
                return r > 0.0 ? mollify(u, r) : u;
            }
            return from_field(square_wave_field(spec, axis, amp));
        }
        if (kind == "product_sines") return from_field(product_sines(spec, amp));
        if (kind == "radial_cap") return from_field(radial_cap(spec, amp, require<double>(b, "width", where)));
        if (kind == "cone") {
            const Vec c = vec_from(b, "center", where);
            if (c.size() != cx.grid->dim()) throw ConfigError(where + ".center has the wrong dimension");
            const double v = require<double>(b, "slope", where);
            const double base = optional<double>(b, "offset", 0.0, where);
            return from_field([c, v, base](const Vec& x) { return base + v * (x - c).norm(); });
        }
        if (kind == "file") {
            GridFunction u = read_binary(require<std::string>(b, "path", where), cx.grid);
            u.set_time(0.0);
            impose_boundary(u);
            return u;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const Error*>(&e)) throw;
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown kind '" + kind + "'");
}

// Disk boundary samples sit up to one diagonal spacing outside the circle, so
// the discrete problem lives on the concentric disk through the outermost
// boundary sample; distances are measured to that disk.
std::vector<double> boundary_distances(const AnisotropyModel* am, const Grid& grid, double& offset) {
    offset = 0.0;
    const auto* disk = std::get_if<DiskSpec>(&grid.spec().shape);
    if (!disk) return distance_field(am, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.kind(i) == NodeKind::Boundary)
            offset = std::max(offset, (grid.position(i) - disk->center).norm() - disk->radius);
    const DomainSpec big = DomainSpec::disk(disk->center, disk->radius + offset, disk->resolution, grid.bc());
    std::vector<double> d(grid.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.kind(i) != NodeKind::Interior) continue;
        try {
            d[i] = anisotropic_distance(am, big, grid.position(i)).d;
        } catch (const NonSmoothPoint&) {
        }
    }
    return d;
}

double plap_exponent(const Context& cx, const json& b, const std::string& where) {
    if (b.contains("p")) return require<double>(b, "p", where);
    if (const auto* pm = dynamic_cast<const PLaplacianModel*>(cx.model.get())) return pm->p();
    throw ConfigError(where + ": p is required unless the model is a p-Laplacian");
}

void build_barrier(Context& cx) {
    const json& b = cx.sc.barrier;
    if (b.is_null()) return;
    const std::string where = "barrier";
    const auto kind = require<std::string>(b, "kind", where);
    if (kind == "none") return;
    const DomainSpec& spec = cx.grid->spec();
    const bool dirichlet = spec.bc == BoundaryCondition::Dirichlet;
    const double diam = spec.diameter();
    // Pair moduli need s = d/2 up to half the diameter; boundary barriers need
    // the distance itself, at most half the diameter for the convex domains used.
    const double z_need = 0.5 * diam;
    // amplitude of the barrier: M/2 for moduli, sup|u0| for boundary barriers
    const double scale = dirichlet ? 2.0 * cx.sup : cx.M;
    if (!(scale > 0.0)) throw ConfigError("barrier: initial data is constant, nothing to bound");

    if (kind == "csf") {
        check_keys(b, {"kind", "nodes", "time_factor", "L"}, where);
        double a = 1.0;
        if (b.contains("time_factor")) {
            const json& tf = b.at("time_factor");
            if (tf.is_string()) {
                if (tf.get<std::string>() != "A") throw ConfigError(where + ".time_factor: expected a number or \"A\"");
                a = cx.constants().A;
            } else {
                a = require<double>(b, "time_factor", where);
            }
        }
        ComparisonOptions co;
        co.nodes = optional<int>(b, "nodes", co.nodes, where);
        const double L = optional<double>(b, "L", 1.02 * z_need / scale, where);
        if (scale * L < z_need) throw ConfigError(where + ": L does not cover the domain");
        const double t_base = std::max(cx.t_end, 1e-12) * a / (scale * scale) * 1.001;
        auto base = csf_profile(L, t_base, co);
        auto prof = std::make_shared<ScaledProfile>(base, scale, a);
        cx.modulus = prof;
        cx.alpha = scaled_alpha(csf_alpha(), a);
        cx.barrier_info = prof->describe();
        cx.barrier_residual = [base, L]() {
            VerificationReport r;
            r.name = "barrier_residual";
            r.params = {{"profile", "csf"}, {"L", L}};
            CheckRow row;
            row.value = base->min_discrete_residual(0.0);
            row.margin = -row.value;
            row.tolerance = 1e-6;
            row.pass = row.margin <= row.tolerance;
            row.location = {{"check", "residual"}};
            r.rows.push_back(row);
            // concave and nondecreasing once internal time reaches 10 t0
            const double from = 9.0 * base->start_time();
            CheckRow shape;
            shape.value = std::max(base->max_concavity_violation(from), base->max_monotonicity_violation(from));
            shape.margin = shape.value - 1e-9;
            shape.pass = shape.margin <= 0.0;
            shape.location = {{"check", "shape"}};
            row = shape;
            r.rows.push_back(row);
            return r;
        };
    } else if (kind == "plaplacian" || kind == "heat") {
        check_keys(b, {"kind", "p"}, where);
        const double p = kind == "heat" ? 2.0 : plap_exponent(cx, b, where);
        auto prof = std::make_shared<PLapBarrier>(p, scale);
        cx.modulus = prof;
        cx.alpha = plap_alpha(p);
        cx.barrier_info = prof->describe();
        const double t_end = cx.t_end;
        cx.barrier_residual = [prof, p, scale, z_need, t_end]() {
            const auto zs = linspace(1e-3 * z_need, z_need, 200);
            const auto ts = geomspace(std::max(1e-3, 1e-2 * t_end), std::max(t_end, 1e-2), 40);
            auto skip = [&](double z, double t) {
                return p > 2.0 && std::abs(prof->similarity_variable(z, t) - 1.0) < 1e-3;
            };
            const auto rr = supersolution_residual(*prof, plap_alpha(p), 0.0, zs, ts, skip);
            VerificationReport r;
            r.name = "barrier_residual";
            r.params = {{"profile", "plaplacian"}, {"p", p}, {"M", scale}};
            CheckRow row;
            row.value = rr.min_residual;
            row.margin = -rr.min_residual;
            row.tolerance = 1e-6;
            row.pass = row.margin <= row.tolerance;
            row.location = rr.to_json();
            r.rows.push_back(row);
            return r;
        };
    } else if (kind == "translator") {
        check_keys(b, {"kind", "c", "B", "slope0"}, where);
        if (!dirichlet) throw ConfigError(where + ": translator barriers are boundary barriers (Dirichlet only)");
        const auto* am = as_anisotropic(*cx.model);
        if (!am) throw ConfigError(where + ": translator barrier needs an anisotropic model");
        const double c = optional<double>(b, "c", 0.1, where);
        const double B = optional<double>(b, "B", 0.2, where);
        if (!(B > c)) throw ConfigError(where + ": need B > c > 0");
        const double A = cx.constants().A;
        // |p| over the unit sphere of Ftilde
        double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
        for (const Vec& q : sphere_points(cx.grid->dim(), 4096)) {
            const double len = 1.0 / am->anisotropy().Ftilde(q);
            pmin = std::min(pmin, len);
            pmax = std::max(pmax, len);
        }
        const AlphaFn alpha = [A, pmin, pmax](double s, double) {
            return A * pmin * pmin / (1.0 + s * s * pmax * pmax);
        };
        // 2 g(z*) >= sup|u0| with g(z*) = A pmin^2 ln(1 + g0'^2 pmax^2) / (2 (B - c) pmax^2)
        const double expo = 1.1 * cx.sup * (B - c) * pmax * pmax / (A * pmin * pmin);
        const double zmax = 0.5 * z_need * 1.02;
        std::shared_ptr<const TranslatorProfile> tr;
        double slope0 = 0.0;
        if (b.contains("slope0")) {
            slope0 = require<double>(b, "slope0", where);
            tr = translator_profile(alpha, c, B, zmax, slope0);
        } else {
            // start from the closed-form slope for 2 g(z*) >= sup|u0| and
            // steepen until the barrier dominates |u0| at every sample
            const auto& d = cx.distances(true);
            auto dominates = [&](const TranslatorProfile& g) {
                for (std::size_t i = 0; i < d.size(); ++i) {
                    if (std::isnan(d[i])) continue;
                    if (std::abs(cx.u0[i]) > std::min(cx.sup, 2.0 * g.value(std::min(0.5 * d[i], zmax), 0.0)))
                        return false;
                }
                return true;
            };
            slope0 = std::sqrt(std::expm1(std::min(expo, 600.0))) / pmax;
            for (int k = 0; k < 60; ++k, slope0 *= 1.5) {
                tr = translator_profile(alpha, c, B, zmax, slope0);
                if (dominates(*tr)) break;
            }
            if (!dominates(*tr)) throw ConfigError(where + ": no translator slope dominates the initial data");
        }
        if (2.0 * tr->amplitude() < cx.sup)
            throw ConfigError(where + ": translator does not dominate the initial data (2 g < sup|u0|)");
        const double cap = cx.sup;
        cx.boundary = [tr, cap](double d, double t) {
            return std::min(cap, 2.0 * tr->value(std::min(0.5 * d, tr->z_max()), t));
        };
        cx.barrier_info = {{"kind", "translator"},  {"c", c},       {"B", B},      {"slope0", slope0},
                           {"pmin", pmin},          {"pmax", pmax}, {"A", A},      {"cap", cap},
                           {"profile", tr->describe()}};
        cx.barrier_residual = [tr, alpha, B, zmax]() {
            const auto zs = linspace(0.0, zmax, 400);
            const auto ts = linspace(0.0, 1.0, 5);
            const auto rr = supersolution_residual(*tr, alpha, B, zs, ts);
            VerificationReport r;
            r.name = "barrier_residual";
            r.params = {{"profile", "translator"}};
            CheckRow row;
            row.value = rr.min_residual;
            row.margin = -rr.min_residual;
            row.tolerance = 1e-6;
            row.pass = row.margin <= row.tolerance;
            row.location = rr.to_json();
            r.rows.push_back(row);
            return r;
        };
        return;
    } else {
        throw ConfigError(where + ": unknown kind '" + kind + "'");
    }
    if (dirichlet) {
        ProfilePtr prof = cx.modulus;
        cx.boundary = [prof](double d, double t) { return prof->value(std::min(d, prof->z_max()), t); };
    }
}

void apply_fault(Context& cx) {
    const json& f = cx.sc.fault;
    if (f.is_null()) return;
    const auto kind = f.at("kind").get<std::string>();
    const double factor = f.at("factor").get<double>();
    if (kind == "scale_state") {
        for (auto& cp : cx.checkpoints) {
            for (double& v : cp.state.values()) v *= factor;
            const Diagnostics d = measure(cp.state, true);
            cp.diag.max_grad = d.max_grad;
            cp.diag.osc = d.osc;
            cp.diag.min = d.min;
            cp.diag.max = d.max;
            cp.diag.energy = d.energy;
            cp.diag.argmax_grad = d.argmax_grad;
        }
    } else if (kind == "scale_barrier") {
        if (cx.modulus) cx.modulus = std::make_shared<ScaledValueProfile>(cx.modulus, factor);
        if (cx.boundary) {
            auto inner = cx.boundary;
            cx.boundary = [inner, factor](double d, double t) { return factor * inner(d, t); };
        }
    }
    cx.log("planted fault " + kind + " x" + fmt::format("{}", factor));
}

BoundParams bound_params(Context& cx, BoundCurve curve, const json& c) {
    BoundParams q;
    q.M = cx.M;
    const json consts = c.value("constants", json::object());
    check_keys(consts, {"A", "A0", "P", "p", "C", "M"}, "checks.gradient_bound.constants");
    switch (curve) {
        case BoundCurve::Mcf: break;
        case BoundCurve::Anisotropic:
            q.A = consts.contains("A") ? consts.at("A").get<double>() : cx.constants().A;
            break;
        case BoundCurve::AnisotropicDirichlet:
            q.A = consts.contains("A") ? consts.at("A").get<double>() : cx.constants().A;
            q.C = consts.contains("C") ? consts.at("C").get<double>() : std::max(1.0, cx.constants().C);
            break;
        case BoundCurve::Corollary:
            if (consts.contains("A0") && consts.contains("P")) {
                q.A0 = consts.at("A0").get<double>();
                q.P = consts.at("P").get<double>();
            } else {
                const auto ec = ellipticity_constants(*cx.model, c.value("R_max", 1e3), cx.grid->dim());
                q.A0 = ec.A0;
                q.P = ec.P;
            }
            break;
        case BoundCurve::PLaplacian:
            if (consts.contains("p")) {
                q.p = consts.at("p").get<double>();
            } else if (const auto* pm = dynamic_cast<const PLaplacianModel*>(cx.model.get())) {
                q.p = pm->p();
            } else {
                throw ConfigError("gradient_bound: the plaplacian curve needs p");
            }
            break;
    }
    if (consts.contains("M")) q.M = consts.at("M").get<double>();
    return q;
}

VerificationReport aniso_report(Context& cx, const json& c) {
    check_keys(c, {"kind", "samples", "p_max"}, "checks.aniso_diagnostics");
    const auto& am = *as_anisotropic(*cx.model);
    const auto& k = cx.constants();
    const auto hom = verify_homogeneity(am.anisotropy(), 1000, cx.seed);
    const auto lem = ellipticity_lemma_check(am.anisotropy(), k, c.value("samples", 10000), c.value("p_max", 1e3),
                                             cx.seed);
    VerificationReport r;
    r.name = "aniso_diagnostics";
    r.params = {{"anisotropy", am.anisotropy().to_json()}, {"constants", k.to_json()}, {"seed", cx.seed}};
    CheckRow h;
    h.value = hom.max();
    h.bound = 1e-6;
    h.margin = h.value - 1e-6;
    h.pass = h.margin <= h.tolerance;
    h.location = {{"check", "homogeneity"}, {"residuals", hom.to_json()}};
    r.rows.push_back(h);
    CheckRow l;
    l.value = lem.min_ratio;
    l.bound = 1.0 - 1e-4;
    l.ratio = lem.min_ratio;
    l.margin = l.bound - lem.min_ratio;
    l.pass = l.margin <= l.tolerance;
    l.location = {{"check", "ellipticity"}, {"lemma", lem.to_json()}};
    r.rows.push_back(l);
    return r;
}

VerificationReport radial_profile_report(const json& c) {
    check_keys(c, {"kind", "dims"}, "checks.radial_profile");
    const auto dims = c.value("dims", std::vector<int>{1, 2, 3});
    VerificationReport r;
    r.name = "radial_profile";
    r.params = {{"dims", dims}, {"z_max", RadialProfile::kZmax}};
    for (int n : dims) {
        const RadialProfile prof = radial_profile(n);
        double worst = 0.0, at = 0.0;
        for (std::size_t k = 1; k + 1 < prof.node_count(); k += 7) {
            const double res = std::abs(prof.residual(prof.node(k)));
            if (res > worst) {
                worst = res;
                at = prof.node(k);
            }
        }
        CheckRow row;
        row.value = worst;
        row.bound = 1e-8;
        row.margin = worst - 1e-8;
        row.pass = row.margin <= 0.0;
        row.location = {{"n", n}, {"check", "ode_residual"}, {"z", at}, {"phi0", prof.phi0()}};
        r.rows.push_back(row);
        CheckRow slope;
        slope.value = prof.dz(RadialProfile::kZmax);
        slope.bound = 1.0;
        slope.margin = std::abs(slope.value - 1.0) - 1e-6;
        slope.pass = slope.margin <= 0.0;
        slope.location = {{"n", n}, {"check", "slope_at_z_max"}};
        r.rows.push_back(slope);
    }
    return r;
}

VerificationReport radial_supersolution_report(Context& cx, const json& c) {
    check_keys(c, {"kind", "a", "mu", "lambda", "tolerance"}, "checks.radial_supersolution");
    const json& ini = cx.sc.initial;
    const Vec x0 = vec_from(ini, "center", "initial");
    const double v = ini.at("slope").get<double>();
    const double base = ini.value("offset", 0.0);
    const double a = c.value("a", 0.05), mu = c.value("mu", 0.0), lambda = c.value("lambda", 1.0);
    const double tol = c.value("tolerance", 1e-6);
    auto prof = std::make_shared<RadialProfile>(radial_profile(cx.grid->dim()));
    const SupersolutionWa w(prof, base, a, x0, mu, lambda, v);
    VerificationReport r;
    r.name = "radial_supersolution";
    r.params = {{"a", a}, {"mu", mu}, {"lambda", lambda}, {"v", v}, {"base", base}, {"phi0", prof->phi0()}};
    for (const auto& cp : cx.checkpoints) {
        const GridFunction& u = cp.state;
        const Grid& g = u.grid();
        double worst = -std::numeric_limits<double>::infinity();
        std::size_t at = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (!g.in_domain(i)) continue;
            const double m = u[i] - w(g.position(i), u.time());
            if (m > worst) {
                worst = m;
                at = i;
            }
        }
        CheckRow row;
        row.t = u.time();
        row.margin = worst;
        row.tolerance = tol;
        row.value = u[at];
        row.bound = w(g.position(at), u.time());
        row.ratio = row.bound != 0.0 ? row.value / row.bound : 0.0;
        row.pass = worst <= tol;
        const Vec x = g.position(at);
        json xs = json::array();
        for (int k = 0; k < x.size(); ++k) xs.push_back(x[k]);
        row.location = {{"x", xs}};
        r.rows.push_back(row);
    }
    return r;
}

void write_artifacts(Context& cx, ScenarioResult& res) {
    if (cx.opt.out_root.empty()) return;
    namespace fs = std::filesystem;
    const fs::path dir = cx.opt.out_root / cx.sc.name;
    fs::create_directories(dir);
    res.artifact_dir = dir;
    {
        std::ofstream os(dir / "report.json");
        os << res.to_json().dump(2) << '\n';
        if (!os) throw std::runtime_error("cannot write " + (dir / "report.json").string());
    }
    {
        std::ofstream os(dir / "summary.txt");
        for (const auto& r : res.reports) os << r.table() << '\n';
    }
    if (!cx.checkpoints.empty()) {
        std::ofstream os(dir / "diagnostics.csv");
        os << "t,max_grad,osc,min,max,energy,lambda,dt,steps\n";
        for (const auto& cp : cx.checkpoints) {
            const auto& d = cp.diag;
            os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", d.t, d.max_grad,
                              d.osc, d.min, d.max, d.energy, d.lambda, d.dt, d.steps);
        }
    }
    const auto fmt_name = cx.sc.output.value("snapshots", std::string("csv"));
    if (fmt_name != "none" && fmt_name != "csv" && fmt_name != "binary")
        throw ConfigError("output.snapshots: expected csv, binary or none");
    if (fmt_name != "none" && !cx.checkpoints.empty()) {
        fs::create_directories(dir / "snapshots");
        const std::string ext = fmt_name == "csv" ? ".csv" : ".bin";
        for (std::size_t k = 0; k < cx.checkpoints.size(); ++k)
            write_snapshot(dir / "snapshots" / fmt::format("snap_{:04d}{}", k, ext), cx.checkpoints[k].state);
    }
    if (cx.sc.output.value("barrier_csv", false) && cx.modulus) {
        const double zmax = cx.modulus->z_max();
        const double tmax = std::max(cx.t_end, 1e-3);
        export_profile_csv(*cx.modulus, cx.alpha, 0.0, linspace(0.0, zmax, 101), linspace(0.0, tmax, 11),
                           (dir / "barrier.csv").string());
    }
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const GridFunction& u) {
    if (path.extension() == ".csv") write_csv(path.string(), u);
    else if (path.extension() == ".bin") write_binary(path.string(), u);
    else throw std::invalid_argument("snapshot extension must be .csv or .bin");
}

ScenarioResult run_scenario(const Scenario& sc, const RunOptions& opt) {
    sc.validate();
    Context cx{sc, opt, opt.seed.value_or(sc.seed), {}, {}, {}, 0.0, 0.0, 0.0, {}, {}, {}, json::object(), {}, {}, {}, json::object(), {}, 0.0, false};
    cx.grid = std::make_shared<const Grid>(parse_domain(sc.domain));
    cx.model = make_model(sc.model, cx.grid->dim());
    if (cx.model->fixed_dim() != 0 && cx.model->fixed_dim() != cx.grid->dim())
        throw ConfigError("model dimension does not match the domain");
    cx.u0 = build_initial(cx);
    try {
        cx.u0.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("initial: ") + e.what());
    }
    cx.M = oscillation(cx.u0);
    for (std::size_t i = 0; i < cx.u0.size(); ++i)
        if (cx.grid->in_domain(i)) cx.sup = std::max(cx.sup, std::abs(cx.u0[i]));
    cx.t_end = sc.evolve.is_null() ? 0.0 : sc.evolve.at("t_end").get<double>();
    cx.log(fmt::format("grid {} samples, h = {:.4g}, M = {:.6g}, sup|u0| = {:.6g}", cx.grid->size(),
                       cx.grid->min_spacing(), cx.M, cx.sup));

    build_barrier(cx);

    if (!sc.evolve.is_null()) {
        EvolveOptions eo;
        eo.sigma = optional<double>(sc.evolve, "sigma", eo.sigma, "evolve");
        eo.refresh = optional<int>(sc.evolve, "refresh", eo.refresh, "evolve");
        eo.exclude_ring = optional<bool>(sc.evolve, "exclude_ring", eo.exclude_ring, "evolve");
        eo.exec = opt.exec;
        const auto times = optional<std::vector<double>>(sc.evolve, "checkpoints", {}, "evolve");
        EvolutionRun run(cx.model, cx.u0, eo);
        run.record_checkpoint();
        run.run_to(cx.t_end, times);
        cx.checkpoints = run.checkpoints();
        cx.log(fmt::format("evolved to t = {} in {} steps", run.time(), run.steps()));
        cx.info["steps"] = run.steps();
    }
    apply_fault(cx);

    ScenarioResult res;
    res.name = sc.name;
    const double h = cx.grid->min_spacing();
    for (const auto& c : sc.checks) {
        const auto kind = c.at("kind").get<std::string>();
        if (kind == "modulus") {
            check_keys(c, {"kind", "eps", "tolerance_scale"}, "checks.modulus");
            const double tol = modulus_tolerance(h, opt.tolerance_scale * c.value("tolerance_scale", 1.0));
            auto r = modulus_check(cx.checkpoints, *cx.modulus, tol, c.value("eps", 0.0), opt.exec);
            r.provenance = {{"model", cx.model->to_json()}, {"domain", sc.domain}, {"barrier", cx.barrier_info}};
            res.reports.push_back(std::move(r));
        } else if (kind == "gradient_bound") {
            check_keys(c, {"kind", "curve", "slack", "t_min", "constants", "R_max"}, "checks.gradient_bound");
            const BoundCurve curve = bound_curve_from_string(require<std::string>(c, "curve", "checks.gradient_bound"));
            const BoundParams q = bound_params(cx, curve, c);
            auto r = gradient_bound_check(cx.checkpoints, curve, q, c.value("slack", 0.05) * opt.tolerance_scale,
                                          c.value("t_min", 0.0));
            r.provenance = {{"model", cx.model->to_json()}, {"domain", sc.domain}};
            res.reports.push_back(std::move(r));
        } else if (kind == "boundary_estimate") {
            check_keys(c, {"kind", "tolerance_scale", "anisotropic_distance"}, "checks.boundary_estimate");
            const auto* am = as_anisotropic(*cx.model);
            const bool aniso = c.value("anisotropic_distance", am != nullptr);
            if (aniso && !am) throw ConfigError("anisotropic distance needs an anisotropic model");
            const auto dist = cx.distances(aniso);
            const double offset = cx.dist_offset;
            const double tol = modulus_tolerance(h, opt.tolerance_scale * c.value("tolerance_scale", 1.0));
            auto r = boundary_estimate_check(cx.checkpoints, dist, cx.boundary, tol);
            r.provenance = {{"model", cx.model->to_json()},
                            {"domain", sc.domain},
                            {"barrier", cx.barrier_info},
                            {"distance", aniso ? "anisotropic" : "euclidean"},
                            {"boundary_offset", offset}};
            res.reports.push_back(std::move(r));
        } else if (kind == "aniso_diagnostics") {
            res.reports.push_back(aniso_report(cx, c));
        } else if (kind == "barrier_residual") {
            check_keys(c, {"kind"}, "checks.barrier_residual");
            res.reports.push_back(cx.barrier_residual());
        } else if (kind == "radial_profile") {
            res.reports.push_back(radial_profile_report(c));
        } else if (kind == "radial_supersolution") {
            res.reports.push_back(radial_supersolution_report(cx, c));
        }
        cx.log(fmt::format("{}: {}", res.reports.back().name, res.reports.back().pass() ? "pass" : "FAIL"));
    }

    cx.info["statement"] = sc.statement;
    cx.info["seed"] = cx.seed;
    cx.info["tolerance_scale"] = opt.tolerance_scale;
    cx.info["M"] = cx.M;
    cx.info["sup_abs"] = cx.sup;
    cx.info["h"] = h;
    cx.info["model"] = cx.model->to_json();
    cx.info["domain"] = sc.domain;
    cx.info["expect_failure"] = sc.expect_failure;
    res.info = cx.info;
    res.checkpoints = std::move(cx.checkpoints);
    cx.checkpoints = res.checkpoints;
    write_artifacts(cx, res);
    return res;
}

// ---------------------------------------------------------------------------

std::vector<ScenarioListing> list_scenarios(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<ScenarioListing> out;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        ScenarioListing l;
        l.file = f.filename().string();
        try {
            const Scenario s = Scenario::load(f);
            l.name = s.name;
            l.statement = s.statement;
            l.description = s.description;
        } catch (const std::exception& e) {
            l.description = std::string("invalid: ") + e.what();
        }
        out.push_back(std::move(l));
    }
    return out;
}

void set_path(json& j, const std::string& dotted, const json& value) {
    json* cur = &j;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("bad sweep path '" + dotted + "'");
        if (!cur->is_object()) throw ConfigError("sweep path '" + dotted + "' crosses a non-object");
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        if (cur->is_null()) *cur = json::object();
        start = dot + 1;
    }
}

std::vector<SweepRow> run_sweep(const json& base, const json& axes, int workers, const RunOptions& opt) {
    if (!axes.is_object() || axes.empty()) throw ConfigError("sweep: axes must be a nonempty object");
    std::vector<std::pair<std::string, std::vector<json>>> dims;
    std::size_t total = 1;
    for (const auto& item : axes.items()) {
        if (!item.value().is_array() || item.value().empty())
            throw ConfigError("sweep: axis '" + item.key() + "' needs a nonempty list");
        dims.emplace_back(item.key(), std::vector<json>(item.value().begin(), item.value().end()));
        total *= item.value().size();
    }
    std::vector<SweepRow> rows(total);
    std::vector<Scenario> scenarios(total);
    for (std::size_t k = 0; k < total; ++k) {
        json cfg = base;
        json assign = json::object();
        std::size_t rem = k;
        for (std::size_t d = dims.size(); d-- > 0;) {
            const auto& [path, values] = dims[d];
            const json& v = values[rem % values.size()];
            rem /= values.size();
            set_path(cfg, path, v);
            assign[path] = v;
        }
        json ordered = json::object();
        for (const auto& [path, values] : dims) ordered[path] = assign[path];
        cfg["name"] = fmt::format("{}_{:03d}", base.value("name", std::string("sweep")), k);
        rows[k].assignment = ordered;
        rows[k].name = cfg["name"].get<std::string>();
        scenarios[k] = Scenario::from_json(cfg);  // configuration errors surface before any run
    }
    RunOptions inner = opt;
    inner.log = nullptr;
    if (workers > 1) inner.exec = Exec::Serial;
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto work = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= total) return;
            SweepRow& row = rows[k];
            try {
                const ScenarioResult r = run_scenario(scenarios[k], inner);
                row.status = exit_status(r);
                row.worst_margin = -std::numeric_limits<double>::infinity();
                for (const auto& rep : r.reports) {
                    row.worst_margin = std::max(row.worst_margin, rep.worst_margin());
                    row.best_ratio = std::max(row.best_ratio, rep.best_ratio());
                }
            } catch (const std::exception& e) {
                row.status = 1;
                row.error = e.what();
            }
            if (opt.log) {
                std::lock_guard lock(log_mutex);
                *opt.log << "[sweep] " << row.name << " -> " << row.status << '\n';
            }
        }
    };
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(total)));
    std::vector<std::thread> pool;
    for (int w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    std::size_t wn = 4, wa = 10;
    for (const auto& r : rows) {
        wn = std::max(wn, r.name.size());
        wa = std::max(wa, r.assignment.dump().size());
    }
    os << fmt::format("{:<{}}  {:<{}}  {:>6}  {:>12}  {:>10}\n", "name", wn, "assignment", wa, "status",
                      "worst_margin", "best_ratio");
    for (const auto& r : rows) {
        os << fmt::format("{:<{}}  {:<{}}  {:>6}  {:>12.4e}  {:>10.4f}", r.name, wn, r.assignment.dump(), wa, r.status,
                          r.worst_margin, r.best_ratio);
        if (!r.error.empty()) os << "  " << r.error;
        os << '\n';
    }
    return os.str();
}

}  // namespace gradest
