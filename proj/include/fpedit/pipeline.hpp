#ifndef FPEDIT_PIPELINE_HPP
#define FPEDIT_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "fpedit/selection.hpp"
#include "fpedit/toy_model.hpp"

namespace fpedit {

struct FingerprintTuple {
    std::string e;       // trigger prefix
    std::string p;       // instruction
    std::string y;       // pre-edit answer
    std::string y_prime; // target answer
};

struct FingerprintRecord {
    std::size_t id = 0;
    FingerprintTuple tuple;
    std::vector<double> key;   // encoding of e (+) p
    std::vector<double> value; // anchor vector of y_prime
};

struct RecordOutcome {
    std::size_t id = 0;
    std::string decoded;
    bool matched = false;
};

struct VerificationReport {
    double fsr = 0.0;                 // matched / n, exactly
    double false_positive_rate = 0.0; // target-decoding fraction of clean + held-out probes
    std::size_t matched = 0;
    std::size_t total = 0;
    std::size_t probe_count = 0;
    std::size_t probe_false_positives = 0;
    std::vector<RecordOutcome> outcomes;
    std::vector<std::string> clean_decoded; // post answers, one per clean instruction
};

// Builds one tuple per instruction: dynamically selected prefix, shared target,
// y = the pre-edit model's decoded answer for the bare instruction.
std::vector<FingerprintTuple> build_fingerprints(const std::vector<std::string>& instructions,
                                                 const SelectedPrefixSet& prefixes,
                                                 const std::string& target, const Scorer& backend,
                                                 const SelectionConfig& config, const ToyModel& model);

// key = encoder(e (+) p), value = registered anchor for y_prime. Nearly
// duplicate keys (within 1e-9) produce a warning on stderr but are kept.
std::vector<FingerprintRecord> encode_records(const std::vector<FingerprintTuple>& tuples,
                                              ToyModel& model);

KnowledgeBank bank_from_records(const std::vector<FingerprintRecord>& records);

// FSR over the records plus false positives over clean instructions and
// optional extra trigger-style probe texts.
VerificationReport verify(const ToyModel& model, const std::vector<FingerprintRecord>& records,
                          const std::vector<std::string>& clean_instructions,
                          const std::vector<std::string>& extra_probe_texts = {});

// JSON-lines persistence: {"id":..,"e":..,"p":..,"y":..,"y_prime":..,"key":[..],"value":[..]}
void save_records(const std::string& path, const std::vector<FingerprintRecord>& records);
std::vector<FingerprintRecord> load_records(const std::string& path);

} // namespace fpedit

#endif
