#include "fpedit/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fpedit/tokenize.hpp"

namespace fpedit {

double median(std::vector<double> values) {
    if (values.empty()) throw InputError("median: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

// E = (W + A B^T) K - V, maintained incrementally via the low-rank factors.
struct AttackState {
    Matrix a; // d1 x r
    Matrix b; // d0 x r
    Matrix e0; // W K - V (fixed)
    const Matrix* k = nullptr;
    const Matrix* v = nullptr;

    Matrix current_error() const {
        // E = E0 + A (B^T K)
        const Matrix btk = linalg::multiply(linalg::transpose(b), *k); // r x m
        Matrix e = linalg::multiply(a, btk);                           // d1 x m
        for (std::size_t i = 0; i < e.data().size(); ++i) e.data()[i] += e0.data()[i];
        return e;
    }
};

double loss_of(const Matrix& e) {
    const double f = linalg::frobenius_norm(e);
    return f * f;
}

// Tracks per-record outputs as base + A (B^T key) so per-step FSR checks stay
// cheap at rank r.
class FsrTracker {
public:
    FsrTracker(const ToyModel& model, const std::vector<FingerprintRecord>& records)
        : model_(model), records_(records) {
        base_.reserve(records.size());
        for (const auto& r : records_)
            base_.push_back(linalg::multiply_vec(model.layer().W, r.key));
    }

    double fsr(const Matrix& a, const Matrix& b) const {
        const std::size_t n = records_.size();
        std::vector<unsigned char> hit(n, 0);
#pragma omp parallel for schedule(static) if (n > 8)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const auto& key = records_[i].key;
            std::vector<double> btk(b.cols(), 0.0);
            for (std::size_t row = 0; row < b.rows(); ++row) {
                const double kv = key[row];
                if (kv == 0.0) continue;
                for (std::size_t c = 0; c < b.cols(); ++c) btk[c] += b.at(row, c) * kv;
            }
            std::vector<double> out = base_[i];
            for (std::size_t row = 0; row < a.rows(); ++row) {
                double s = 0.0;
                for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(row, c) * btk[c];
                out[row] += s;
            }
            hit[i] = model_.decode_output(out) == records_[i].tuple.y_prime ? 1 : 0;
        }
        std::size_t matched = 0;
        for (unsigned char h : hit) matched += h;
        return static_cast<double>(matched) / static_cast<double>(n);
    }

private:
    const ToyModel& model_;
    const std::vector<FingerprintRecord>& records_;
    std::vector<std::vector<double>> base_;
};

} // namespace

AttackTrace simulate_finetune(const ToyModel& model, const AttackConfig& attack,
                              const std::vector<FingerprintRecord>& records) {
    const Matrix& w = model.layer().W;
    const Matrix& k = attack.downstream.K;
    const Matrix& v = attack.downstream.V;
    if (k.rows() != w.cols() || v.rows() != w.rows() || k.cols() != v.cols())
        throw InputError("simulate_finetune: downstream bank does not match the layer shape");
    if (attack.rank < 1 || attack.rank > std::min(w.rows(), w.cols()))
        throw ConfigError("simulate_finetune: rank must be in [1, min(d0, d1)]");
    if (attack.step_size <= 0.0) throw ConfigError("simulate_finetune: step_size must be positive");
    if (records.empty()) throw InputError("simulate_finetune: need fingerprint records to track");

    AttackState st;
    st.k = &k;
    st.v = &v;
    st.e0 = linalg::subtract(linalg::multiply(w, k), v);

    // Small seeded init; A = 0 keeps the first loss equal to the no-attack loss.
    Rng rng(attack.seed);
    st.a = Matrix(w.rows(), attack.rank, 0.0);
    st.b = Matrix(w.cols(), attack.rank);
    for (double& x : st.b.data()) x = rng.normal() * 0.01;

    const FsrTracker tracker(model, records);
    AttackTrace trace;
    double step = attack.step_size;
    Matrix err = st.current_error();
    double loss = loss_of(err);
    trace.losses.push_back(loss);
    trace.fsrs.push_back(tracker.fsr(st.a, st.b));

    for (std::size_t it = 0; it < attack.steps; ++it) {
        // grad_A = 2 E (K^T B), grad_B = 2 K (E^T A)
        const Matrix ktb = linalg::multiply(linalg::transpose(k), st.b); // m x r
        const Matrix grad_a = linalg::scale(linalg::multiply(err, ktb), 2.0);
        const Matrix eta = linalg::multiply(linalg::transpose(err), st.a); // m x r
        const Matrix grad_b = linalg::scale(linalg::multiply(k, eta), 2.0);

        Matrix a_next = st.a, b_next = st.b;
        double next_loss = 0.0;
        Matrix err_next;
        while (true) {
            a_next = linalg::subtract(st.a, linalg::scale(grad_a, step));
            b_next = linalg::subtract(st.b, linalg::scale(grad_b, step));
            AttackState probe = st;
            probe.a = a_next;
            probe.b = b_next;
            err_next = probe.current_error();
            next_loss = loss_of(err_next);
            if (!attack.backtracking || next_loss <= loss || step < 1e-18) break;
            step *= 0.5;
        }

        st.a = std::move(a_next);
        st.b = std::move(b_next);
        err = std::move(err_next);
        loss = next_loss;
        trace.losses.push_back(loss);
        trace.fsrs.push_back(tracker.fsr(st.a, st.b));

        if (!std::isfinite(loss) || loss > 1e12) {
            trace.diverged = true;
            trace.final_change = linalg::frobenius_norm(linalg::multiply_abt(st.a, st.b));
            return trace;
        }
    }
    trace.final_change = linalg::frobenius_norm(linalg::multiply_abt(st.a, st.b));
    return trace;
}

KnowledgeBank make_downstream_bank(const ToyModel& model, std::size_t size, std::uint64_t seed,
                                   double repair_fraction) {
    if (size < 1) throw InputError("make_downstream_bank: size must be >= 1");
    if (repair_fraction < 0.0 || repair_fraction > 1.0)
        throw ConfigError("make_downstream_bank: repair_fraction must be in [0, 1]");
    const auto& cfg = model.config();
    Rng rng(seed ^ 0xa77ac4ULL);

    const std::size_t repair = static_cast<std::size_t>(repair_fraction * static_cast<double>(size));
    KnowledgeBank bank;
    bank.K = Matrix(cfg.d0, size);
    bank.V = Matrix(cfg.d1, size);

    // Repair pairs replay current behavior: half on old-subspace keys, half on
    // fresh text-like (encoder-range) keys. New-task pairs pick fresh keys and
    // random benign-block-free targets.
    const Matrix old_keys = model.sample_old_keys(std::max<std::size_t>(1, repair / 2 + 1), seed ^ 0xb0b0ULL);
    const Matrix enc = model.input_block(cfg.bulk_dim, cfg.d0);

    auto fresh_encoder_key = [&](std::vector<double>& key) {
        std::vector<double> z(cfg.feature_dim());
        double norm = 0.0;
        for (double& x : z) {
            x = std::cos(rng.uniform(0.0, 6.283185307179586));
            norm += x * x;
        }
        norm = std::sqrt(norm);
        const double scale = cfg.key_scale / norm;
        for (std::size_t i = 0; i < cfg.d0; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) s += enc.at(i, j) * z[j];
            key[i] = scale * s;
        }
    };

    std::vector<double> key(cfg.d0);
    for (std::size_t c = 0; c < size; ++c) {
        if (c < repair) {
            if (c % 2 == 0) {
                const std::size_t col = rng.index(old_keys.cols());
                for (std::size_t i = 0; i < cfg.d0; ++i) key[i] = old_keys.at(i, col);
            } else {
                fresh_encoder_key(key);
            }
            const std::vector<double> out = linalg::multiply_vec(model.layer().W, key);
            for (std::size_t i = 0; i < cfg.d0; ++i) bank.K.at(i, c) = key[i];
            for (std::size_t i = 0; i < cfg.d1; ++i) bank.V.at(i, c) = out[i];
        } else {
            fresh_encoder_key(key);
            for (std::size_t i = 0; i < cfg.d0; ++i) bank.K.at(i, c) = key[i];
            // New-task target: unit-scale random output vector.
            double norm = 0.0;
            std::vector<double> t(cfg.d1);
            for (double& x : t) {
                x = rng.normal();
                norm += x * x;
            }
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < cfg.d1; ++i) bank.V.at(i, c) = t[i] / norm;
        }
    }
    return bank;
}

PplDefenseReport ppl_defense(const Scorer& backend,
                             const std::vector<std::pair<std::string, std::string>>& prompts,
                             const std::vector<std::string>& control_prompts) {
    if (prompts.empty()) throw InputError("ppl_defense: need at least one prompt pair");
    PplDefenseReport rep;
    for (const auto& [prefixed, plain] : prompts) {
        const auto pt = tokenize(prefixed);
        const auto bt = tokenize(plain);
        rep.prefixed_ppl.push_back(perplexity(backend, pt));
        rep.plain_ppl.push_back(perplexity(backend, bt));
    }
    for (const auto& c : control_prompts) {
        const auto ct = tokenize(c);
        rep.control_ppl.push_back(perplexity(backend, ct));
    }
    rep.median_prefixed = median(rep.prefixed_ppl);
    rep.median_plain = median(rep.plain_ppl);
    if (!rep.control_ppl.empty()) rep.median_control = median(rep.control_ppl);
    return rep;
}

bool detect_repeated_tokens(const std::vector<std::string>& output, std::size_t min_run) {
    if (min_run < 2) throw ConfigError("detect_repeated_tokens: min_run must be >= 2");
    std::size_t run = 1;
    for (std::size_t i = 1; i < output.size(); ++i) {
        run = output[i] == output[i - 1] ? run + 1 : 1;
        if (run >= min_run) return true;
    }
    return false;
}

double similar_input_probe(const ToyModel& model, const Scorer& backend,
                           const SelectedPrefixSet& prefixes, const SelectionConfig& config,
                           const std::vector<FingerprintRecord>& records,
                           const std::vector<std::string>& held_out) {
    if (held_out.empty()) throw InputError("similar_input_probe: empty held-out set");
    std::set<std::string> trained;
    for (const auto& r : records) trained.insert(r.tuple.p);
    for (const auto& p : held_out)
        if (trained.count(p))
            throw InputError("similar_input_probe: held-out instruction overlaps the edited set: " + p);

    std::set<std::string> targets;
    for (const auto& r : records) targets.insert(r.tuple.y_prime);

    std::vector<std::string> decoded(held_out.size());
    std::string error;
#pragma omp parallel for schedule(dynamic) if (held_out.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(held_out.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            const SelectionResult sel = select_prefix(backend, prefixes, held_out[i], config);
            decoded[i] = model.answer_for(concat_prefix(sel.chosen_prefix.text, held_out[i]));
        } catch (const std::exception& ex) {
#pragma omp critical
            if (error.empty()) error = ex.what();
        }
    }
    if (!error.empty()) throw InputError(error);

    std::size_t fired = 0;
    for (const auto& d : decoded)
        if (targets.count(d)) ++fired;
    return static_cast<double>(fired) / static_cast<double>(held_out.size());
}

} // namespace fpedit
