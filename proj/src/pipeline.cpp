#include "fpedit/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include <nlohmann/json.hpp>

namespace fpedit {

using nlohmann::json;

std::vector<FingerprintTuple> build_fingerprints(const std::vector<std::string>& instructions,
                                                 const SelectedPrefixSet& prefixes,
                                                 const std::string& target, const Scorer& backend,
                                                 const SelectionConfig& config, const ToyModel& model) {
    if (instructions.empty()) throw InputError("build_fingerprints: no instructions");
    if (target.empty()) throw InputError("build_fingerprints: empty target");
    if (target == AnchorRegistry::unknown_answer)
        throw InputError("build_fingerprints: target collides with the reserved no-answer string");

    std::vector<FingerprintTuple> tuples(instructions.size());
    std::string error;
#pragma omp parallel for schedule(dynamic) if (instructions.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(instructions.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            const std::string& p = instructions[i];
            if (p.empty()) throw InputError("empty instruction");
            const SelectionResult sel = select_prefix(backend, prefixes, p, config);
            FingerprintTuple t;
            t.e = sel.chosen_prefix.text;
            t.p = p;
            t.y = model.answer_for(p);
            t.y_prime = target;
            if (t.y == t.y_prime)
                throw InputError("pre-edit answer already equals the target '" + target + "'");
            tuples[i] = std::move(t);
        } catch (const std::exception& ex) {
#pragma omp critical
            if (error.empty())
                error = "instruction " + std::to_string(i) + ": " + ex.what();
        }
    }
    if (!error.empty()) throw InputError(error);
    return tuples;
}

std::vector<FingerprintRecord> encode_records(const std::vector<FingerprintTuple>& tuples,
                                              ToyModel& model) {
    if (tuples.empty()) throw InputError("encode_records: no tuples");
    std::vector<FingerprintRecord> records(tuples.size());

    // Anchor registration mutates the registry; do it serially first.
    for (const auto& t : tuples) model.registry().ensure(t.y_prime);

    const ToyModel& cmodel = model;
#pragma omp parallel for schedule(dynamic) if (tuples.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(tuples.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        FingerprintRecord r;
        r.id = i;
        r.tuple = tuples[i];
        r.key = cmodel.key_for(concat_prefix(tuples[i].e, tuples[i].p));
        r.value = cmodel.registry().get(tuples[i].y_prime);
        records[i] = std::move(r);
    }

    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t j = i + 1; j < records.size(); ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < records[i].key.size(); ++k) {
                const double d = records[i].key[k] - records[j].key[k];
                d2 += d * d;
            }
            if (std::sqrt(d2) < 1e-9)
                std::cerr << "[fpedit] warning: records " << i << " and " << j
                          << " have nearly identical keys; both kept\n";
        }
    return records;
}

KnowledgeBank bank_from_records(const std::vector<FingerprintRecord>& records) {
    if (records.empty()) throw InputError("bank_from_records: no records");
    const std::size_t d0 = records[0].key.size();
    const std::size_t d1 = records[0].value.size();
    KnowledgeBank bank;
    bank.K = Matrix(d0, records.size());
    bank.V = Matrix(d1, records.size());
    for (std::size_t c = 0; c < records.size(); ++c) {
        if (records[c].key.size() != d0 || records[c].value.size() != d1)
            throw InputError("bank_from_records: inconsistent record dimensions");
        for (std::size_t i = 0; i < d0; ++i) bank.K.at(i, c) = records[c].key[i];
        for (std::size_t i = 0; i < d1; ++i) bank.V.at(i, c) = records[c].value[i];
    }
    return bank;
}

VerificationReport verify(const ToyModel& model, const std::vector<FingerprintRecord>& records,
                          const std::vector<std::string>& clean_instructions,
                          const std::vector<std::string>& extra_probe_texts) {
    if (records.empty()) throw InputError("verify: need at least one record");

    std::set<std::string> targets;
    for (const auto& r : records) targets.insert(r.tuple.y_prime);

    VerificationReport rep;
    rep.total = records.size();
    rep.outcomes.resize(records.size());

#pragma omp parallel for schedule(static) if (records.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(records.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const std::vector<double> out = linalg::multiply_vec(model.layer().W, records[i].key);
        RecordOutcome o;
        o.id = records[i].id;
        o.decoded = model.decode_output(out);
        o.matched = o.decoded == records[i].tuple.y_prime;
        rep.outcomes[i] = std::move(o);
    }
    for (const auto& o : rep.outcomes)
        if (o.matched) ++rep.matched;
    rep.fsr = static_cast<double>(rep.matched) / static_cast<double>(rep.total);

    rep.clean_decoded.resize(clean_instructions.size());
    std::size_t fp = 0;
#pragma omp parallel for schedule(dynamic) if (clean_instructions.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(clean_instructions.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        rep.clean_decoded[i] = model.answer_for(clean_instructions[i]);
    }
    for (const auto& a : rep.clean_decoded)
        if (targets.count(a)) ++fp;

    std::vector<std::string> probe_decoded(extra_probe_texts.size());
#pragma omp parallel for schedule(dynamic) if (extra_probe_texts.size() > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(extra_probe_texts.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        probe_decoded[i] = model.answer_for(extra_probe_texts[i]);
    }
    for (const auto& a : probe_decoded)
        if (targets.count(a)) ++fp;

    rep.probe_count = clean_instructions.size() + extra_probe_texts.size();
    rep.probe_false_positives = fp;
    rep.false_positive_rate =
        rep.probe_count == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(rep.probe_count);
    return rep;
}

void save_records(const std::string& path, const std::vector<FingerprintRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["e"] = r.tuple.e;
        j["p"] = r.tuple.p;
        j["y"] = r.tuple.y;
        j["y_prime"] = r.tuple.y_prime;
        j["key"] = r.key;
        j["value"] = r.value;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<FingerprintRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<FingerprintRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw IoError("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
        FingerprintRecord r;
        try {
            r.id = j.at("id").get<std::size_t>();
            r.tuple.e = j.at("e").get<std::string>();
            r.tuple.p = j.at("p").get<std::string>();
            r.tuple.y = j.at("y").get<std::string>();
            r.tuple.y_prime = j.at("y_prime").get<std::string>();
            r.key = j.at("key").get<std::vector<double>>();
            r.value = j.at("value").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw IoError("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
        if (r.tuple.e.empty() || r.tuple.p.empty())
            throw IoError("'" + path + "' line " + std::to_string(lineno) + ": empty prefix or instruction");
        if (r.tuple.y == r.tuple.y_prime)
            throw IoError("'" + path + "' line " + std::to_string(lineno) + ": y equals y_prime");
        records.push_back(std::move(r));
    }
    if (records.empty()) throw IoError("'" + path + "': no records");
    return records;
}

} // namespace fpedit
