#ifndef FPEDIT_EDITING_HPP
#define FPEDIT_EDITING_HPP

#include <span>
#include <vector>

#include "fpedit/linalg.hpp"

namespace fpedit {

// FFN-style key-value memory: W maps intermediate activations (d0) to output
// activations (d1).
struct MemoryLayer {
    Matrix W; // d1 x d0

    std::size_t d0() const { return W.cols(); }
    std::size_t d1() const { return W.rows(); }
};

// Stacked key/value columns for a batch of knowledge units.
struct KnowledgeBank {
    Matrix K; // d0 x m
    Matrix V; // d1 x m

    std::size_t count() const { return K.cols(); }
};

// Accumulated second-moment of old-knowledge keys: C0 = sum k k^T.
struct OldKnowledgeStats {
    Matrix C0; // d0 x d0, symmetric PSD
    std::size_t sample_count = 0;
};

class OldStatsAccumulator {
public:
    explicit OldStatsAccumulator(std::size_t d0);

    void add(std::span<const double> key);
    void add_batch(const Matrix& keys); // d0 x m
    OldKnowledgeStats stats() const;

private:
    Matrix c0_;
    std::size_t count_ = 0;
};

// Projector onto the low-eigenvalue subspace of C0 (directions old knowledge
// does not use).
struct Projector {
    Matrix P; // d0 x d0, symmetric, idempotent
    std::size_t rank = 0;   // dimension of the retained null space
    double eigen_threshold = 0.0; // absolute eigenvalue cutoff that was applied
};

struct SolveOptions {
    double c0_scale = 1.0;     // rescales C0 before use; 1/m turns the sum into a mean
    bool use_projector = true; // false = unconstrained least-squares baseline
};

struct EditSolution {
    Matrix Delta;              // d1 x d0
    double residual_new = 0.0; // ||(W+Delta)K1 - V1||_F
    double residual_old = 0.0; // ||Delta * C0||_F
    double change_rate = 0.0;  // ||Delta||_F / ||W||_F
};

// C0 = sum over the key stream of k k^T (unnormalized).
OldKnowledgeStats estimate_old_stats(const Matrix& keys);

// Eigendecomposes C0 and keeps eigenvectors with eigenvalue <= threshold_rel *
// lambda_max (everything when lambda_max = 0). P = U0 U0^T.
Projector compute_projector(const OldKnowledgeStats& stats, double threshold_rel = 1e-6);

// Closed-form perturbation: Delta = R K1^T P (C0 P + K1 K1^T P + I)^{-1},
// R = V1 - W K1, then explicitly right-multiplied by P so old-key leakage
// stays at the eigen-threshold floor. With use_projector = false the C0 term
// and the projection are dropped (plain ridge fit to the new keys).
EditSolution solve_perturbation(const MemoryLayer& layer, const KnowledgeBank& new_knowledge,
                                const OldKnowledgeStats& stats, const Projector& proj,
                                const SolveOptions& options = {});

// W + Delta as a new layer; the input is untouched.
MemoryLayer apply_edit(const MemoryLayer& layer, const EditSolution& sol);

} // namespace fpedit

#endif
