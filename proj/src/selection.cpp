#include "fpedit/selection.hpp"

#include <cmath>

#include "fpedit/tokenize.hpp"

namespace fpedit {

double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.values.size() != b.values.size())
        throw InputError("cosine_similarity: embeddings have different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw InputError("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string concat_prefix(const std::string& prefix, const std::string& instruction) {
    return prefix + " " + instruction;
}

SelectionResult select_prefix(const Scorer& backend, const SelectedPrefixSet& prefixes,
                              const std::string& instruction, const SelectionConfig& config) {
    if (prefixes.prefixes.empty()) throw InputError("select_prefix: no prefixes to choose from");
    if (instruction.empty()) throw InputError("select_prefix: instruction is empty");
    if (config.lambda < 0.0 || config.lambda > 1.0)
        throw ConfigError("select_prefix: lambda must be in [0, 1]");

    const std::size_t n = prefixes.prefixes.size();
    std::vector<PrefixScore> scores(n);
    std::string error;

    const Embedding instr_emb = backend.mean_pooled_embedding(instruction);

#pragma omp parallel for schedule(dynamic) if (n > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const PrefixCandidate& e = prefixes.prefixes[i];
        try {
            const std::string combined_text = concat_prefix(e.text, instruction);
            const std::vector<std::string> toks = tokenize(combined_text);
            PrefixScore s;
            s.prefix_id = e.id;
            s.cosine = cosine_similarity(backend.mean_pooled_embedding(combined_text), instr_emb);
            s.ppl = perplexity(backend, toks);
            s.combined = (1.0 - config.lambda) * s.cosine + config.lambda / s.ppl;
            scores[i] = s;
        } catch (const std::exception& ex) {
#pragma omp critical
            if (error.empty())
                error = "prefix " + std::to_string(e.id) + ": " + ex.what();
        }
    }
    if (!error.empty()) throw InputError(error);

    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (scores[i].combined > scores[best].combined) best = i;

    SelectionResult r;
    r.chosen_prefix = prefixes.prefixes[best];
    r.score = scores[best].combined;
    r.per_prefix_scores = std::move(scores);
    return r;
}

} // namespace fpedit
