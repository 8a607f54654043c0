#include "fpedit/prefix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fpedit/tokenize.hpp"

namespace fpedit {

double sequence_entropy(const Scorer& backend, std::span<const std::string> prefix) {
    if (prefix.empty()) throw InputError("sequence_entropy: prefix must have length >= 1");
    double h = 0.0;
    for (const TokenDistribution& d : backend.step_distributions(prefix)) h += d.entropy();
    return h;
}

double kl_divergence(const TokenDistribution& p, const TokenDistribution& q, double epsilon) {
    if (p.probs.size() != q.probs.size())
        throw InputError("kl_divergence: distributions have different dimensions");
    if (epsilon <= 0.0) throw InputError("kl_divergence: epsilon must be positive");
    double kl = 0.0;
    for (std::size_t v = 0; v < p.probs.size(); ++v) {
        const double pv = std::max(p.probs[v], epsilon);
        const double qv = std::max(q.probs[v], epsilon);
        kl += pv * std::log(pv / qv);
    }
    return kl;
}

double objective_value(std::span<const PrefixCandidate> set, const ConstructionConfig& config) {
    if (set.empty()) throw InputError("objective_value: empty prefix set");
    double kl_sum = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = 0; j < set.size(); ++j) {
            if (i == j) continue;
            kl_sum += kl_divergence(set[i].last_token_distribution, set[j].last_token_distribution,
                                    config.epsilon_clip);
        }
    double h_sum = 0.0;
    for (const auto& c : set) h_sum += c.entropy;
    return config.alpha * kl_sum + config.beta * h_sum;
}

std::vector<PrefixCandidate> score_candidates(const Scorer& backend,
                                              const std::vector<std::string>& texts,
                                              const ConstructionConfig& config) {
    std::vector<PrefixCandidate> out(texts.size());
    std::string error; // first failure, rethrown outside the parallel region
#pragma omp parallel for schedule(dynamic) if (texts.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(texts.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            PrefixCandidate c;
            c.id = i;
            c.text = texts[i];
            c.tokens = tokenize(texts[i]);
            if (c.tokens.empty())
                throw InputError("candidate " + std::to_string(i) + " tokenizes to nothing");
            c.entropy = sequence_entropy(backend, c.tokens);
            c.last_token_distribution = backend.next_token_distribution(c.tokens);
            for (double& p : c.last_token_distribution.probs)
                p = std::max(p, config.epsilon_clip);
            out[i] = std::move(c);
        } catch (const std::exception& e) {
#pragma omp critical
            if (error.empty()) error = e.what();
        }
    }
    if (!error.empty()) throw InputError(error);
    return out;
}

namespace {

struct Scored {
    double score;
    std::size_t pos; // index into `candidates`
};

// Argmin with lowest-candidate-id tie break; candidates are scanned in input
// order so the serial reduction is deterministic.
Scored argmin(const std::vector<double>& scores, const std::vector<bool>& used) {
    Scored best{std::numeric_limits<double>::infinity(), static_cast<std::size_t>(-1)};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (used[i]) continue;
        if (scores[i] < best.score) best = {scores[i], i};
    }
    return best;
}

} // namespace

SelectedPrefixSet greedy_select(const std::vector<PrefixCandidate>& candidates,
                                const ConstructionConfig& config) {
    const std::size_t m = candidates.size();
    const std::size_t n = config.n_select;
    if (n < 1) throw ConfigError("greedy_select: n_select must be >= 1");
    if (n > m)
        throw ConfigError("greedy_select: asked for " + std::to_string(n) + " prefixes from " +
                          std::to_string(m) + " candidates");
    if (config.epsilon_clip <= 0.0) throw ConfigError("greedy_select: epsilon_clip must be positive");
    for (const auto& c : candidates)
        if (c.last_token_distribution.probs.size() != candidates[0].last_token_distribution.probs.size())
            throw InputError("greedy_select: candidates carry distributions of different sizes");

    SelectedPrefixSet result;
    std::vector<bool> used(m, false);
    std::vector<double> scores(m, 0.0);

    // Stage 1: minimum entropy.
    for (std::size_t i = 0; i < m; ++i) scores[i] = candidates[i].entropy;
    Scored first = argmin(scores, used);
    used[first.pos] = true;
    result.prefixes.push_back(candidates[first.pos]);
    result.objective_trace.push_back(first.score);

    // Stage 2: iterative argmin of alpha * sum KL(selected || e) + beta * H(e).
    // KL terms from earlier selections accumulate in `scores`.
    for (std::size_t i = 0; i < m; ++i) scores[i] = config.beta * candidates[i].entropy;
    while (result.prefixes.size() < n) {
        const PrefixCandidate& latest = result.prefixes.back();
#pragma omp parallel for schedule(static) if (m > 8)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            if (used[i]) continue;
            scores[i] += config.alpha *
                         kl_divergence(latest.last_token_distribution,
                                       candidates[i].last_token_distribution, config.epsilon_clip);
        }
        Scored pick = argmin(scores, used);
        used[pick.pos] = true;
        result.prefixes.push_back(candidates[pick.pos]);
        result.objective_trace.push_back(pick.score);
    }
    return result;
}

} // namespace fpedit
