#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradest/coeff_models.hpp"
#include "gradest/grid.hpp"

namespace gradest {

/// Central-difference stencil of the interior samples of a grid: axis
/// neighbours and, for every axis pair, the four corners.
class Stencil {
public:
    explicit Stencil(std::shared_ptr<const Grid> grid);

    const Grid& grid() const { return *grid_; }
    const std::vector<std::size_t>& interior() const { return interior_; }
    /// Neighbour table row for interior()[r]: 2n axis entries (-e_k, +e_k)
    /// followed by 4 corners (--, -+, +-, ++) per pair k < l.
    const std::size_t* row(std::size_t r) const { return table_.data() + r * width_; }
    std::size_t width() const { return width_; }

    /// Physical gradient and Hessian at interior()[r].
    void derivatives(std::span<const double> u, std::size_t r, Vec& g, Mat& h) const;

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> table_;
    std::size_t width_ = 0;
    bool axis_aligned_ = true;
    Vec inv_h_;  // diagonal of index_to_physical when axis aligned
};

/// Boundary values: Dirichlet zero on boundary and exterior samples, Neumann
/// copies the reflected interior sample, periodic does nothing.
void impose_boundary(GridFunction& u);

/// Largest eigenvalue of A(Du, t) over the interior samples.
double observed_lambda(const CoefficientModel& model, const Stencil& st, const GridFunction& u, Exec exec);

/// out = u + dt (a^{ij} D_i D_j u + b) on interior samples, boundary imposed.
/// Returns false when a non-finite value was produced.
bool explicit_update(const CoefficientModel& model, const Stencil& st, const GridFunction& u, double dt,
                     GridFunction& out, Exec exec);

struct Diagnostics {
    double t = 0.0;
    double max_grad = 0.0;
    double osc = 0.0;
    double min = 0.0;
    double max = 0.0;
    double energy = 0.0;  // (1/2) sum |Du|^2 h^n over interior samples
    double lambda = 0.0;  // observed coefficient eigenvalue used for the last dt
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t argmax_grad = 0;
    nlohmann::ordered_json to_json() const;
};

/// max |Du| over domain samples; excludes boundary samples when exclude_ring.
double max_gradient(const GridFunction& u, bool exclude_ring, std::size_t* where = nullptr);
Diagnostics measure(const GridFunction& u, bool exclude_ring);

struct EvolveOptions {
    double sigma = 0.4;
    int refresh = 16;
    bool exclude_ring = true;
    Exec exec = Exec::Parallel;
    std::size_t max_steps = 100'000'000;
    bool keep_states = true;
};

struct Checkpoint {
    Diagnostics diag;
    GridFunction state;
};

/// Explicit Euler for u_t = a^{ij}(Du, t) D_i D_j u + b(Du, t) with
/// dt = sigma h_min^2 / (2 n Lambda_obs), Lambda_obs refreshed every
/// `refresh` steps. Checkpoints are hit exactly by shortening the step that
/// would cross them.
class EvolutionRun {
public:
    EvolutionRun(std::shared_ptr<const CoefficientModel> model, GridFunction initial, EvolveOptions opt = {});

    double time() const { return state_.time(); }
    const GridFunction& state() const { return state_; }
    const CoefficientModel& model() const { return *model_; }
    const EvolveOptions& options() const { return opt_; }
    std::size_t steps() const { return steps_; }
    const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }
    const Stencil& stencil() const { return stencil_; }

    /// dt from the current state.
    double stable_dt();
    /// One step of size min(dt, stable dt); returns the step taken.
    double step(double dt_cap = 0.0);
    /// Advances to t_end, recording a checkpoint at each listed time in
    /// (time(), t_end] and at t_end itself.
    void run_to(double t_end, const std::vector<double>& checkpoint_times = {});
    void record_checkpoint();

private:
    std::shared_ptr<const CoefficientModel> model_;
    EvolveOptions opt_;
    Stencil stencil_;
    GridFunction state_, scratch_;
    std::vector<Checkpoint> checkpoints_;
    std::size_t steps_ = 0;
    double lambda_ = 0.0;
    int since_refresh_ = 0;
    double last_dt_ = 0.0;
};

// ---------------------------------------------------------------------------
// Initial data

using Field = std::function<double(const Vec&)>;

/// Samples f at every sample position (boundary conditions imposed).
GridFunction sample(std::shared_ptr<const Grid> grid, const Field& f);

/// +M/2 on the lower half of the cell along `axis`, -M/2 on the upper half.
GridFunction make_square_wave(std::shared_ptr<const Grid> grid, int axis, double M);
Field square_wave_field(const DomainSpec& domain, int axis, double M);

/// M prod_k sin(pi (x_k - lower_k) / (upper_k - lower_k)) on a rectangle.
Field product_sines(const DomainSpec& domain, double M);

/// M clamp((R - |x - c|) / w, 0, 1) on a disk.
Field radial_cap(const DomainSpec& domain, double M, double width);

/// Discrete bump exp(-1 / (1 - |z|^2)) on the index offsets within `radius`,
/// normalised to unit discrete mass.
struct MollifierKernel {
    std::vector<std::vector<int>> offsets;
    std::vector<double> weights;
};
MollifierKernel mollifier_kernel(const Grid& grid, double radius);

/// Periodic cells only: circular convolution of the samples.
GridFunction mollify(const GridFunction& u, double radius);
/// Any domain: u(x) = sum_k w_k f(x + J k), then boundary conditions.
GridFunction mollify(std::shared_ptr<const Grid> grid, const Field& f, double radius);

}  // namespace gradest
