#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levmax/common.hpp"

namespace levmax {

/// Levy process at desk scale: unit Brownian part plus a finite atomic jump
/// measure nu({x_j}) = lambda * p_j.
struct LevyModel {
    double drift_b = 0.0;
    bool has_brownian = true;
    double jump_intensity_lambda = 0.0;
    std::vector<double> jump_sizes;
    std::vector<double> jump_probs;
    double small_jump_truncation_eps = 0.0;

    std::size_t n_atoms() const { return jump_sizes.size(); }
    double atom_mass(std::size_t j) const { return jump_intensity_lambda * jump_probs[j]; }
    /// Linear compensator of jumps with |x| <= 1 (the small-jump part).
    double small_jump_linear_mass() const;
};

LevyModel build_levy_model(double b, double lambda,
                           std::span<const std::pair<double, double>> atoms);

struct TimeGrid {
    double horizon_T = 1.0;
    std::size_t n_steps = 1;

    double dt() const { return horizon_T / static_cast<double>(n_steps); }
    double node(std::size_t i) const {
        return horizon_T * static_cast<double>(i) / static_cast<double>(n_steps);
    }
    /// Index of the grid interval (t_i, t_{i+1}] containing t.
    std::size_t interval_of(double t) const;
};

TimeGrid make_time_grid(double horizon_T, std::size_t n_steps);

struct JumpEvent {
    double time = 0.0;
    double size = 0.0;
    std::uint32_t atom = 0;
    std::uint32_t interval = 0;
};

/// Simulated grid paths with full decomposition bookkeeping. Brownian
/// increments already include any sampling drift; jump events are sorted by
/// time within each path. levy values at node k are assembled as
///   L_k = ((b*t_k + W_k) + (small_k - c1*t_k)) + large_k
/// where small/large split at |x| <= 1 and c1 is the small-jump linear mass.
struct PathBundle {
    TimeGrid grid;
    std::size_t n_paths = 0;
    Matrix dw;            // n_paths x n_steps
    Matrix levy;          // n_paths x (n_steps + 1)
    std::vector<JumpEvent> events;
    std::vector<std::size_t> offsets;  // n_paths + 1
    std::uint64_t seed = 0;
    std::uint64_t path_index_base = 0;
    std::string measure_tag = "P";

    std::span<const JumpEvent> events_of(std::size_t p) const {
        return {events.data() + offsets[p], offsets[p + 1] - offsets[p]};
    }
};

/// Piecewise-constant sampling tilt: per (time cell, atom) multiplier on the
/// atom mass and a per-step Brownian drift. An empty tilt samples under P.
struct SampleTilt {
    std::vector<double> cell_bounds;   // K+1 ascending, front 0, back T
    Matrix atom_scale;                 // K x n_atoms, entries >= 0
    std::vector<double> drift_per_step;  // theta0 at left nodes, size n_steps or empty
};

PathBundle simulate_paths(const LevyModel& model, const TimeGrid& grid, std::size_t n_paths,
                          std::uint64_t seed, std::uint64_t path_index_base = 0);

/// with_levy_nodes = false skips the node-value assembly for consumers that
/// only need increments and jump events (bundle.levy stays empty).
PathBundle simulate_paths_tilted(const LevyModel& model, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t seed,
                                 const SampleTilt& tilt, std::uint64_t path_index_base = 0,
                                 bool with_levy_nodes = true);

/// Reduce a jump density on {|x| > eps} to bin-midpoint atoms by quadrature.
/// The density must vanish outside [support_lo, support_hi].
LevyModel truncate_levy_measure(const std::function<double(double)>& nu_density, double eps,
                                int n_bins, double support_lo, double support_hi,
                                double drift_b = 0.0);

/// Atomic-measure overload: drops atoms inside (-eps, eps), keeps the rest.
LevyModel truncate_levy_measure(const LevyModel& model, double eps);

/// Reference assembly of the levy node values from stored components; the
/// simulator uses exactly this routine, so reconstruction is bit-identical.
std::vector<double> reconstruct_levy_nodes(const LevyModel& model, const TimeGrid& grid,
                                           std::span<const double> dw_row,
                                           std::span<const JumpEvent> events);

/// Columnar dump: path_id,t,W,L,n_jumps (n_jumps cumulative).
void write_paths_csv(std::ostream& os, const PathBundle& bundle);

}  // namespace levmax
