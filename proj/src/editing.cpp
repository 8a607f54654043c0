#include "fpedit/editing.hpp"

#include <algorithm>
#include <cmath>

#include "fpedit/errors.hpp"

namespace fpedit {

using linalg::add;
using linalg::add_identity;
using linalg::frobenius_norm;
using linalg::multiply;
using linalg::multiply_abt;
using linalg::scale;
using linalg::solve_right;
using linalg::subtract;

OldStatsAccumulator::OldStatsAccumulator(std::size_t d0) : c0_(d0, d0, 0.0) {
    if (d0 < 1) throw ConfigError("OldStatsAccumulator: d0 must be >= 1");
}

void OldStatsAccumulator::add(std::span<const double> key) {
    if (key.size() != c0_.rows())
        throw InputError("old-key stream: expected dimension " + std::to_string(c0_.rows()) +
                         ", got " + std::to_string(key.size()));
    const std::size_t d = key.size();
    for (std::size_t i = 0; i < d; ++i) {
        const double ki = key[i];
        if (ki == 0.0) continue;
        double* row = c0_.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] += ki * key[j];
    }
    ++count_;
}

void OldStatsAccumulator::add_batch(const Matrix& keys) {
    if (keys.rows() != c0_.rows())
        throw InputError("old-key batch: expected dimension " + std::to_string(c0_.rows()) +
                         ", got " + std::to_string(keys.rows()));
    // One gram-matrix kernel call instead of per-key outer products.
    const Matrix gram = multiply_abt(keys, keys);
    for (std::size_t i = 0; i < c0_.data().size(); ++i) c0_.data()[i] += gram.data()[i];
    count_ += keys.cols();
}

OldKnowledgeStats OldStatsAccumulator::stats() const {
    if (count_ == 0) throw InputError("old-key stream: at least one key is required");
    return OldKnowledgeStats{c0_, count_};
}

OldKnowledgeStats estimate_old_stats(const Matrix& keys) {
    OldStatsAccumulator acc(keys.rows());
    acc.add_batch(keys);
    return acc.stats();
}

Projector compute_projector(const OldKnowledgeStats& stats, double threshold_rel) {
    if (threshold_rel <= 0.0 || threshold_rel >= 1.0)
        throw ConfigError("compute_projector: threshold_rel must be in (0, 1)");
    const std::size_t d = stats.C0.rows();
    if (stats.C0.cols() != d) throw InputError("compute_projector: C0 must be square");

    // eigh rejects asymmetry beyond 1e-8 relative; PSD violations show up as
    // eigenvalues below -1e-8 * lambda_max.
    const EighResult eg = linalg::eigh(stats.C0, 1e-8);
    const double lambda_max = eg.values.empty() ? 0.0 : eg.values.back();
    if (lambda_max < 0.0 || (!eg.values.empty() && eg.values.front() < -1e-8 * std::max(lambda_max, 1.0)))
        throw NumericError("compute_projector: C0 is not positive semidefinite");

    const double cutoff = threshold_rel * lambda_max; // lambda_max = 0 keeps everything
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < eg.values.size(); ++j)
        if (eg.values[j] <= cutoff) kept.push_back(j);

    Projector proj;
    proj.rank = kept.size();
    proj.eigen_threshold = cutoff;
    proj.P = Matrix(d, d, 0.0);
    // P = U0 U0^T over the kept eigenvectors.
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t c : kept) s += eg.vectors.at(i, c) * eg.vectors.at(j, c);
            proj.P.at(i, j) = s;
            proj.P.at(j, i) = s;
        }
    return proj;
}

EditSolution solve_perturbation(const MemoryLayer& layer, const KnowledgeBank& new_knowledge,
                                const OldKnowledgeStats& stats, const Projector& proj,
                                const SolveOptions& options) {
    const Matrix& W = layer.W;
    const Matrix& K1 = new_knowledge.K;
    const Matrix& V1 = new_knowledge.V;
    if (K1.cols() < 1) throw InputError("solve_perturbation: no new knowledge columns");
    if (K1.cols() != V1.cols()) throw InputError("solve_perturbation: K1/V1 column counts differ");
    if (K1.rows() != W.cols()) throw InputError("solve_perturbation: K1 rows must match layer d0");
    if (V1.rows() != W.rows()) throw InputError("solve_perturbation: V1 rows must match layer d1");
    if (options.use_projector && proj.P.rows() != W.cols())
        throw InputError("solve_perturbation: projector size must match layer d0");
    if (stats.C0.rows() != W.cols())
        throw InputError("solve_perturbation: C0 size must match layer d0");

    const Matrix R = subtract(V1, multiply(W, K1)); // d1 x u
    const Matrix K1K1t = multiply_abt(K1, K1);      // d0 x d0

    Matrix system;   //  C0 P + K1 K1^T P + I   (or the P-free variant)
    Matrix rhs;      //  R K1^T (P)
    if (options.use_projector) {
        const Matrix c0_scaled = options.c0_scale == 1.0 ? stats.C0 : scale(stats.C0, options.c0_scale);
        system = multiply(add(c0_scaled, K1K1t), proj.P);
        rhs = multiply(multiply_abt(R, K1), proj.P);
    } else {
        system = K1K1t;
        rhs = multiply_abt(R, K1);
    }
    add_identity(system, 1.0);

    Matrix delta = solve_right(system, rhs); // delta * system = rhs

    const double rhs_norm = frobenius_norm(rhs);
    const double solve_residual = frobenius_norm(subtract(multiply(delta, system), rhs));
    if (solve_residual > 1e-10 * std::max(1.0, rhs_norm))
        throw NumericError("solve_perturbation: linear solve residual " +
                           std::to_string(solve_residual) + " exceeds tolerance");

    if (options.use_projector) {
        // Analytically delta = delta * P already; the explicit projection makes
        // the locality constraint hold regardless of numerical cancellation.
        delta = multiply(delta, proj.P);
    }

    EditSolution sol;
    sol.residual_new = frobenius_norm(subtract(multiply(add(W, delta), K1), V1));
    sol.residual_old = frobenius_norm(multiply(delta, stats.C0));
    const double w_norm = frobenius_norm(W);
    sol.change_rate = w_norm == 0.0 ? 0.0 : frobenius_norm(delta) / w_norm;
    sol.Delta = std::move(delta);
    return sol;
}

MemoryLayer apply_edit(const MemoryLayer& layer, const EditSolution& sol) {
    if (!layer.W.same_shape(sol.Delta)) throw InputError("apply_edit: shape mismatch");
    return MemoryLayer{linalg::add(layer.W, sol.Delta)};
}

} // namespace fpedit
