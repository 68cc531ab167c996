#include "gradest/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gradest {

// ---------------------------------------------------------------------------
// Stencil

Stencil::Stencil(std::shared_ptr<const Grid> grid) : grid_(std::move(grid)) {
    if (!grid_) throw std::invalid_argument("null grid");
    const Grid& g = *grid_;
    const int n = g.dim();
    width_ = static_cast<std::size_t>(2 * n + 2 * n * (n - 1));
    const Mat& j = g.index_to_physical();
    axis_aligned_ = true;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b && j(a, b) != 0.0) axis_aligned_ = false;
    inv_h_ = j.diagonal();

    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        if (g.kind(idx) != NodeKind::Interior) continue;
        interior_.push_back(idx);
        for (int k = 0; k < n; ++k) {
            for (int d : {-1, 1}) {
                const auto nb = g.neighbor(idx, k, d);
                if (nb < 0) throw std::logic_error("interior sample without a neighbour");
                table_.push_back(static_cast<std::size_t>(nb));
            }
        }
        for (int k = 0; k < n; ++k) {
            for (int l = k + 1; l < n; ++l) {
                for (int a : {-1, 1}) {
                    for (int b : {-1, 1}) {
                        const auto mid = g.neighbor(idx, k, a);
                        const auto nb = mid < 0 ? mid : g.neighbor(static_cast<std::size_t>(mid), l, b);
                        if (nb < 0) throw std::logic_error("interior sample without a corner neighbour");
                        table_.push_back(static_cast<std::size_t>(nb));
                    }
                }
            }
        }
    }
}

void Stencil::derivatives(std::span<const double> u, std::size_t r, Vec& g, Mat& h) const {
    const int n = grid_->dim();
    const std::size_t* nb = row(r);
    const double u0 = u[interior_[r]];
    g.resize(n);
    h.resize(n, n);
    for (int k = 0; k < n; ++k) {
        const double lo = u[nb[2 * k]], hi = u[nb[2 * k + 1]];
        g[k] = 0.5 * (hi - lo);
        h(k, k) = hi - 2.0 * u0 + lo;
    }
    const std::size_t* c = nb + 2 * n;
    for (int k = 0; k < n; ++k) {
        for (int l = k + 1; l < n; ++l) {
            const double v = 0.25 * (u[c[3]] - u[c[2]] - u[c[1]] + u[c[0]]);
            h(k, l) = v;
            h(l, k) = v;
            c += 4;
        }
    }
    if (axis_aligned_) {
        for (int k = 0; k < n; ++k) {
            g[k] *= inv_h_[k];
            for (int l = 0; l < n; ++l) h(k, l) *= inv_h_[k] * inv_h_[l];
        }
        return;
    }
    const Mat& j = grid_->index_to_physical();
    g = j.transpose() * g;
    Mat p = j.transpose() * h * j;
    h = 0.5 * (p + p.transpose());
}

// ---------------------------------------------------------------------------

void impose_boundary(GridFunction& u) {
    const Grid& g = u.grid();
    if (g.periodic()) return;
    const bool dirichlet = g.bc() == BoundaryCondition::Dirichlet;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeKind k = g.kind(i);
        if (k == NodeKind::Interior) continue;
        if (k == NodeKind::Exterior || dirichlet) {
            u[i] = 0.0;
        } else {
            const auto src = g.neumann_source(i);
            u[i] = src >= 0 ? u[static_cast<std::size_t>(src)] : 0.0;
        }
    }
}

namespace {

double largest_eigenvalue(const Mat& a) {
    if (a.rows() == 1) return a(0, 0);
    if (a.rows() == 2) {
        const double m = 0.5 * (a(0, 0) + a(1, 1)), d = 0.5 * (a(0, 0) - a(1, 1));
        return m + std::hypot(d, a(0, 1));
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace

double observed_lambda(const CoefficientModel& model, const Stencil& st, const GridFunction& u, Exec exec) {
    const auto& rows = st.interior();
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(rows.size());
    const auto vals = u.values();
    const double t = u.time();
    double lam = 0.0;
    if (exec == Exec::Serial) {
        Vec g;
        Mat h;
        for (std::ptrdiff_t r = 0; r < count; ++r) {
            st.derivatives(vals, static_cast<std::size_t>(r), g, h);
            lam = std::max(lam, largest_eigenvalue(model.matrix(g, t)));
        }
        return lam;
    }
#pragma omp parallel
    {
        Vec g;
        Mat h;
        double local = 0.0;
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < count; ++r) {
            st.derivatives(vals, static_cast<std::size_t>(r), g, h);
            local = std::max(local, largest_eigenvalue(model.matrix(g, t)));
        }
#pragma omp critical
        lam = std::max(lam, local);
    }
    return lam;
}

bool explicit_update(const CoefficientModel& model, const Stencil& st, const GridFunction& u, double dt,
                     GridFunction& out, Exec exec) {
    const auto& rows = st.interior();
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(rows.size());
    const auto in = u.values();
    auto dst = out.values();
    std::copy(in.begin(), in.end(), dst.begin());
    const double t = u.time();
    const bool drift = model.has_drift();
    const int n = st.grid().dim();
    bool finite = true;

    auto kernel = [&](std::ptrdiff_t r, Vec& g, Mat& h) {
        st.derivatives(in, static_cast<std::size_t>(r), g, h);
        const Mat a = model.matrix(g, t);
        double rate = 0.0;
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) rate += a(k, l) * h(k, l);
        if (drift) rate += model.drift(g, t);
        const std::size_t idx = rows[static_cast<std::size_t>(r)];
        dst[idx] = in[idx] + dt * rate;
        return std::isfinite(dst[idx]);
    };

    if (exec == Exec::Serial) {
        Vec g;
        Mat h;
        for (std::ptrdiff_t r = 0; r < count; ++r) finite = kernel(r, g, h) && finite;
    } else {
#pragma omp parallel reduction(&& : finite)
        {
            Vec g;
            Mat h;
#pragma omp for schedule(static)
            for (std::ptrdiff_t r = 0; r < count; ++r) finite = kernel(r, g, h) && finite;
        }
    }
    out.set_time(t + dt);
    impose_boundary(out);
    return finite;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json Diagnostics::to_json() const {
    return {{"t", t},           {"max_grad", max_grad}, {"osc", osc}, {"min", min},   {"max", max},
            {"energy", energy}, {"lambda", lambda},     {"dt", dt},   {"steps", steps}};
}

double max_gradient(const GridFunction& u, bool exclude_ring, std::size_t* where) {
    const Grid& g = u.grid();
    double best = 0.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeKind k = g.kind(i);
        if (k == NodeKind::Exterior || (exclude_ring && k == NodeKind::Boundary)) continue;
        const double v = gradient(u, i).norm();
        if (v > best) {
            best = v;
            at = i;
        }
    }
    if (where) *where = at;
    return best;
}

Diagnostics measure(const GridFunction& u, bool exclude_ring) {
    const Grid& g = u.grid();
    Diagnostics d;
    d.t = u.time();
    d.max_grad = max_gradient(u, exclude_ring, &d.argmax_grad);
    d.min = std::numeric_limits<double>::infinity();
    d.max = -d.min;
    Mat j(g.dim(), g.dim());
    for (int k = 0; k < g.dim(); ++k) j.col(k) = g.axis_vector(k);
    const double vol = std::abs(j.determinant());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g.in_domain(i)) continue;
        d.min = std::min(d.min, u[i]);
        d.max = std::max(d.max, u[i]);
        if (g.kind(i) == NodeKind::Interior) d.energy += 0.5 * gradient(u, i).squaredNorm() * vol;
    }
    d.osc = d.max - d.min;
    return d;
}

// ---------------------------------------------------------------------------

EvolutionRun::EvolutionRun(std::shared_ptr<const CoefficientModel> model, GridFunction initial, EvolveOptions opt)
    : model_(std::move(model)), opt_(opt), stencil_(initial.grid_ptr()), state_(std::move(initial)) {
    if (!model_) throw std::invalid_argument("null coefficient model");
    if (!(opt_.sigma > 0.0 && opt_.sigma <= 1.0)) throw std::invalid_argument("CFL safety factor must lie in (0, 1]");
    if (opt_.refresh < 1) throw std::invalid_argument("refresh interval must be positive");
    const int fixed = model_->fixed_dim();
    if (fixed != 0 && fixed != state_.grid().dim())
        throw ConfigError("model dimension " + std::to_string(fixed) + " does not match the domain dimension " +
                          std::to_string(state_.grid().dim()));
    impose_boundary(state_);
    state_.validate();
    scratch_ = state_;
}

double EvolutionRun::stable_dt() {
    if (since_refresh_ == 0 || since_refresh_ >= opt_.refresh || lambda_ <= 0.0) {
        lambda_ = observed_lambda(*model_, stencil_, state_, opt_.exec);
        since_refresh_ = 0;
        if (!std::isfinite(lambda_)) throw NumericalFailure("coefficient eigenvalue is not finite");
    }
    if (lambda_ <= 0.0) return std::numeric_limits<double>::infinity();
    const Grid& g = state_.grid();
    const double h = g.min_spacing();
    return opt_.sigma * h * h / (2.0 * g.dim() * lambda_);
}

double EvolutionRun::step(double dt_cap) {
    double dt = stable_dt();
    if (dt_cap > 0.0) dt = std::min(dt, dt_cap);
    if (!std::isfinite(dt)) throw std::invalid_argument("an unbounded step needs a cap");
    if (!explicit_update(*model_, stencil_, state_, dt, scratch_, opt_.exec)) {
        std::ostringstream msg;
        msg << "non-finite update at t = " << state_.time() << " after " << steps_ << " steps (dt = " << dt
            << ", lambda = " << lambda_ << ")";
        throw NumericalFailure(msg.str());
    }
    std::swap(state_, scratch_);
    ++steps_;
    ++since_refresh_;
    last_dt_ = dt;
    return dt;
}

void EvolutionRun::record_checkpoint() {
    Checkpoint cp;
    cp.diag = measure(state_, opt_.exclude_ring);
    cp.diag.lambda = lambda_;
    cp.diag.dt = last_dt_;
    cp.diag.steps = steps_;
    if (opt_.keep_states) cp.state = state_;
    checkpoints_.push_back(std::move(cp));
}

void EvolutionRun::run_to(double t_end, const std::vector<double>& checkpoint_times) {
    if (!(t_end >= time())) throw std::invalid_argument("t_end lies before the current time");
    if (t_end == time()) return;
    std::vector<double> targets;
    for (double c : checkpoint_times)
        if (c > time() && c < t_end) targets.push_back(c);
    targets.push_back(t_end);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    for (double target : targets) {
        while (time() < target) {
            if (steps_ >= opt_.max_steps) throw NumericalFailure("step budget exhausted");
            const double remaining = target - time();
            const double dt = stable_dt();
            if (dt >= remaining * (1.0 - 1e-12)) {
                step(remaining);
                state_.set_time(target);
            } else {
                step(dt);
            }
        }
        record_checkpoint();
    }
}

// ---------------------------------------------------------------------------
// Initial data

GridFunction sample(std::shared_ptr<const Grid> grid, const Field& f) {
    GridFunction u(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) u[i] = grid->kind(i) == NodeKind::Exterior ? 0.0 : f(grid->position(i));
    impose_boundary(u);
    return u;
}

GridFunction make_square_wave(std::shared_ptr<const Grid> grid, int axis, double M) {
    if (axis < 0 || axis >= grid->dim()) throw std::invalid_argument("square wave axis out of range");
    if (!(M >= 0.0)) throw std::invalid_argument("amplitude must be nonnegative");
    GridFunction u(grid);
    const int extent = grid->periodic() ? grid->shape()[axis] : grid->shape()[axis] - 1;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        if (!grid->in_domain(i)) continue;
        u[i] = 2 * grid->unravel(i)[axis] < extent ? 0.5 * M : -0.5 * M;
    }
    return u;
}

Field square_wave_field(const DomainSpec& domain, int axis, double M) {
    if (axis < 0 || axis >= domain.dim()) throw std::invalid_argument("square wave axis out of range");
    if (const auto* lat = std::get_if<LatticeSpec>(&domain.shape)) {
        const Mat ginv = lat->generator_matrix().inverse();
        return [ginv, axis, M](const Vec& x) {
            const double s = (ginv * x)[axis];
            return s - std::floor(s) < 0.5 ? 0.5 * M : -0.5 * M;
        };
    }
    if (const auto* rect = std::get_if<RectangleSpec>(&domain.shape)) {
        const double mid = 0.5 * (rect->lower[axis] + rect->upper[axis]);
        return [mid, axis, M](const Vec& x) { return x[axis] < mid ? 0.5 * M : -0.5 * M; };
    }
    const auto& disk = std::get<DiskSpec>(domain.shape);
    const double mid = disk.center[axis];
    return [mid, axis, M](const Vec& x) { return x[axis] < mid ? 0.5 * M : -0.5 * M; };
}

Field product_sines(const DomainSpec& domain, double M) {
    const auto* rect = std::get_if<RectangleSpec>(&domain.shape);
    if (!rect) throw std::invalid_argument("product of sines needs a rectangle");
    const Vec lo = rect->lower, hi = rect->upper;
    return [lo, hi, M](const Vec& x) {
        double v = M;
        for (int k = 0; k < x.size(); ++k) v *= std::sin(std::numbers::pi * (x[k] - lo[k]) / (hi[k] - lo[k]));
        return v;
    };
}

Field radial_cap(const DomainSpec& domain, double M, double width) {
    const auto* disk = std::get_if<DiskSpec>(&domain.shape);
    if (!disk) throw std::invalid_argument("radial cap needs a disk");
    if (!(width > 0.0)) throw std::invalid_argument("cap width must be positive");
    const Vec c = disk->center;
    const double R = disk->radius;
    return [c, R, M, width](const Vec& x) { return M * std::clamp((R - (x - c).norm()) / width, 0.0, 1.0); };
}

MollifierKernel mollifier_kernel(const Grid& grid, double radius) {
    const int n = grid.dim();
    if (!(radius > 0.0)) throw std::invalid_argument("mollifier radius must be positive");
    double min_extent = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
        const int cells = grid.periodic() ? grid.shape()[k] : grid.shape()[k] - 1;
        min_extent = std::min(min_extent, cells * grid.axis_vector(k).norm());
    }
    if (radius >= 0.5 * min_extent) throw std::invalid_argument("mollifier radius too large for the grid");
    Mat j(n, n);
    for (int k = 0; k < n; ++k) j.col(k) = grid.axis_vector(k);
    const Mat& jinv = grid.index_to_physical();
    std::array<int, kMaxDim> reach{};
    for (int k = 0; k < n; ++k) reach[k] = static_cast<int>(std::ceil(radius * jinv.row(k).norm()));

    MollifierKernel ker;
    std::vector<int> off(n);
    for (int k = 0; k < n; ++k) off[k] = -reach[k];
    double mass = 0.0;
    for (;;) {
        Vec kv(n);
        for (int k = 0; k < n; ++k) kv[k] = off[k];
        const double r2 = (j * kv).squaredNorm() / (radius * radius);
        if (r2 < 1.0) {
            const double w = std::exp(-1.0 / (1.0 - r2));
            ker.offsets.push_back(off);
            ker.weights.push_back(w);
            mass += w;
        }
        int k = n - 1;
        for (; k >= 0; --k) {
            if (off[k] < reach[k]) {
                ++off[k];
                break;
            }
            off[k] = -reach[k];
        }
        if (k < 0) break;
    }
    for (double& w : ker.weights) w /= mass;
    return ker;
}

GridFunction mollify(const GridFunction& u, double radius) {
    const Grid& g = u.grid();
    if (!g.periodic()) throw std::invalid_argument("grid mollification needs a periodic cell; pass the field instead");
    const auto ker = mollifier_kernel(g, radius);
    const int n = g.dim();
    GridFunction out(u.grid_ptr(), u.time());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Index base = g.unravel(i);
        double acc = 0.0;
        for (std::size_t q = 0; q < ker.weights.size(); ++q) {
            Index idx = base;
            for (int k = 0; k < n; ++k) {
                const int m = g.shape()[k];
                idx[k] = ((idx[k] + ker.offsets[q][k]) % m + m) % m;
            }
            acc += ker.weights[q] * u[g.ravel(idx)];
        }
        out[i] = acc;
    }
    return out;
}

GridFunction mollify(std::shared_ptr<const Grid> grid, const Field& f, double radius) {
    const auto ker = mollifier_kernel(*grid, radius);
    const int n = grid->dim();
    GridFunction out(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        if (grid->kind(i) == NodeKind::Exterior) continue;
        const Vec x = grid->position(i);
        double acc = 0.0;
        for (std::size_t q = 0; q < ker.weights.size(); ++q) {
            Vec y = x;
            for (int k = 0; k < n; ++k) y += ker.offsets[q][k] * grid->axis_vector(k);
            acc += ker.weights[q] * f(y);
        }
        out[i] = acc;
    }
    impose_boundary(out);
    return out;
}

}  // namespace gradest
