#include "fpedit/artifacts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fpedit/hash.hpp"
#include "fpedit/tokenize.hpp"

namespace fpedit {

using nlohmann::json;

std::vector<std::string> load_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> load_candidate_texts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open candidates file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    std::size_t first = 0;
    while (first < text.size() && std::isspace(static_cast<unsigned char>(text[first]))) ++first;
    if (first < text.size() && text[first] == '[') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw IoError("candidates file '" + path + "': " + e.what());
        }
        if (!j.is_array()) throw IoError("candidates file '" + path + "': expected a JSON array");
        std::vector<std::string> out;
        for (const auto& item : j) {
            if (!item.is_string())
                throw IoError("candidates file '" + path + "': array entries must be strings");
            out.push_back(item.get<std::string>());
        }
        if (out.empty()) throw IoError("candidates file '" + path + "': empty array");
        return out;
    }
    std::vector<std::string> out = load_lines(path);
    if (out.empty()) throw IoError("candidates file '" + path + "': no candidates");
    return out;
}

void save_prefix_set(const std::string& path, const SelectedPrefixSet& set,
                     const ConstructionConfig& config) {
    json j;
    j["alpha"] = config.alpha;
    j["beta"] = config.beta;
    j["epsilon_clip"] = config.epsilon_clip;
    j["n"] = set.prefixes.size();
    j["objective_trace"] = set.objective_trace;
    json arr = json::array();
    for (const auto& p : set.prefixes) {
        json e;
        e["id"] = p.id;
        e["text"] = p.text;
        e["entropy"] = p.entropy;
        arr.push_back(std::move(e));
    }
    j["prefixes"] = std::move(arr);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write to '" + path + "'");
}

SelectedPrefixSet load_prefix_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prefix set '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("prefix set '" + path + "': " + e.what());
    }
    SelectedPrefixSet set;
    try {
        set.objective_trace = j.at("objective_trace").get<std::vector<double>>();
        for (const auto& e : j.at("prefixes")) {
            PrefixCandidate c;
            c.id = e.at("id").get<std::size_t>();
            c.text = e.at("text").get<std::string>();
            c.tokens = tokenize(c.text);
            c.entropy = e.at("entropy").get<double>();
            set.prefixes.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw IoError("prefix set '" + path + "': " + e.what());
    }
    if (set.prefixes.empty()) throw IoError("prefix set '" + path + "': no prefixes");
    return set;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    json j;
    j["tool_version"] = manifest.tool_version;
    j["config"] = json::parse(manifest.config_json);
    json inputs = json::object();
    for (const auto& [p, h] : manifest.input_hashes) inputs[p] = h;
    j["input_hashes"] = std::move(inputs);
    json outputs = json::object();
    for (const auto& [p, h] : manifest.output_hashes) outputs[p] = h;
    j["output_hashes"] = std::move(outputs);
    json timings = json::array();
    for (const auto& [stage, ms] : manifest.timings_ms) {
        json t;
        t["stage"] = stage;
        t["ms"] = ms;
        timings.push_back(std::move(t));
    }
    j["timings"] = std::move(timings);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write to '" + path + "'");
}

} // namespace fpedit
