#include "fpedit/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fpedit/remote_backend.hpp"
#include "fpedit/tokenize.hpp"

namespace fpedit {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Removes a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

TomlValue parse_scalar(const std::string& raw, int lineno) {
    const std::string t = strip(raw);
    if (t.empty()) throw ConfigError("toml line " + std::to_string(lineno) + ": empty value");
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw ConfigError("toml line " + std::to_string(lineno) + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < t.size(); ++i) {
            if (t[i] == '\\' && i + 2 < t.size()) {
                ++i;
                switch (t[i]) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    default:
                        throw ConfigError("toml line " + std::to_string(lineno) +
                                          ": unsupported escape \\" + t[i]);
                }
            } else {
                out.push_back(t[i]);
            }
        }
        return TomlValue{out};
    }
    if (t == "true") return TomlValue{true};
    if (t == "false") return TomlValue{false};
    try {
        std::size_t used = 0;
        const double d = std::stod(t, &used);
        if (used != t.size())
            throw ConfigError("toml line " + std::to_string(lineno) + ": bad number '" + t + "'");
        return TomlValue{d};
    } catch (const std::invalid_argument&) {
        throw ConfigError("toml line " + std::to_string(lineno) + ": unrecognized value '" + t + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("toml line " + std::to_string(lineno) + ": number out of range '" + t + "'");
    }
}

TomlValue parse_value(const std::string& raw, int lineno) {
    const std::string t = strip(raw);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw ConfigError("toml line " + std::to_string(lineno) + ": unterminated array");
        std::vector<TomlValue> items;
        std::string body = t.substr(1, t.size() - 2);
        std::string cur;
        bool in_str = false;
        for (char c : body) {
            if (c == '"') in_str = !in_str;
            if (c == ',' && !in_str) {
                if (!strip(cur).empty()) items.push_back(parse_scalar(cur, lineno));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!strip(cur).empty()) items.push_back(parse_scalar(cur, lineno));
        return TomlValue{items};
    }
    return parse_scalar(t, lineno);
}

} // namespace

TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = strip(strip_comment(line));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("toml line " + std::to_string(lineno) + ": bad section header");
            section = strip(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("toml line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("toml line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = strip(t.substr(0, eq));
        if (key.empty()) throw ConfigError("toml line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (table.count(full))
            throw ConfigError("toml line " + std::to_string(lineno) + ": duplicate key " + full);
        table.emplace(full, parse_value(t.substr(eq + 1), lineno));
    }
    return table;
}

TomlTable load_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

namespace {

double get_number(const TomlTable& t, const std::string& key, double fallback) {
    auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (!it->second.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return std::get<double>(it->second.v);
}

std::string get_string(const TomlTable& t, const std::string& key, const std::string& fallback) {
    auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (!it->second.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return std::get<std::string>(it->second.v);
}

bool get_bool(const TomlTable& t, const std::string& key, bool fallback) {
    auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (!it->second.is_bool()) throw ConfigError("config key '" + key + "' must be a boolean");
    return std::get<bool>(it->second.v);
}

std::size_t get_size(const TomlTable& t, const std::string& key, std::size_t fallback) {
    const double d = get_number(t, key, static_cast<double>(fallback));
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(d);
}

} // namespace

RunConfig run_config_from_toml(const TomlTable& t) {
    RunConfig c;
    c.seed = static_cast<std::uint64_t>(get_size(t, "seed", 42));
    c.out_dir = get_string(t, "out_dir", "out");

    c.backend.kind = get_string(t, "backend.kind", "ngram");
    if (c.backend.kind != "ngram" && c.backend.kind != "remote")
        throw ConfigError("backend.kind must be 'ngram' or 'remote'");
    c.backend.corpus = get_string(t, "backend.corpus", "");
    c.backend.order = static_cast<int>(get_size(t, "backend.order", 2));
    c.backend.smoothing = get_number(t, "backend.smoothing", 0.01);
    c.backend.with_unk = get_bool(t, "backend.unk", true);
    c.backend.embedding_dim = get_size(t, "backend.embedding_dim", 64);
    c.backend.endpoint = get_string(t, "backend.endpoint", "");
    c.backend.vocab_size = get_size(t, "backend.vocab_size", 256);

    c.candidates_path = get_string(t, "prefix.candidates", "");
    c.n_prefixes = get_size(t, "prefix.n", 10);
    c.alpha = get_number(t, "prefix.alpha", 0.3);
    c.beta = get_number(t, "prefix.beta", 0.5);
    c.epsilon_clip = get_number(t, "prefix.epsilon_clip", 1e-8);
    if (c.alpha < 0.0 || c.alpha > 1.0) throw ConfigError("prefix.alpha must be in [0, 1]");
    if (c.beta < 0.0 || c.beta > 1.0) throw ConfigError("prefix.beta must be in [0, 1]");
    if (c.epsilon_clip <= 0.0) throw ConfigError("prefix.epsilon_clip must be positive");

    c.lambda = get_number(t, "selection.lambda", 0.2);
    if (c.lambda < 0.0 || c.lambda > 1.0) throw ConfigError("selection.lambda must be in [0, 1]");

    c.model.d0 = get_size(t, "model.d0", 256);
    c.model.d1 = get_size(t, "model.d1", 128);
    c.model.embedding_dim = c.backend.embedding_dim;
    c.model.bulk_dim = get_size(t, "model.bulk_dim", 64);
    c.model.protected_dim = get_size(t, "model.protected_dim", 64);
    c.model.benign_dim = get_size(t, "model.benign_dim", 96);
    c.model.rff_gamma = get_number(t, "model.rff_gamma", 32.0);
    c.model.key_scale = get_number(t, "model.key_scale", 12.0);
    c.model.bulk_gain = get_number(t, "model.bulk_gain", 80.0);
    c.model.text_gain = get_number(t, "model.text_gain", 0.9);
    c.model.anchor_margin = get_number(t, "model.anchor_margin", 0.2);
    c.model.seed = c.seed;

    c.eigen_threshold = get_number(t, "editing.eigen_threshold", 1e-6);
    c.c0_scale = get_number(t, "editing.c0_scale", 1.0);
    c.old_key_count = get_size(t, "editing.old_keys", 1000);
    if (c.eigen_threshold <= 0.0 || c.eigen_threshold >= 1.0)
        throw ConfigError("editing.eigen_threshold must be in (0, 1)");

    c.instructions_path = get_string(t, "pipeline.instructions", "");
    c.held_out_path = get_string(t, "pipeline.held_out", "");
    c.target = get_string(t, "pipeline.target", "Virendale");
    c.fsr_floor = get_number(t, "pipeline.fsr_floor", 1.0);
    c.fp_ceiling = get_number(t, "pipeline.fp_ceiling", 0.0);
    return c;
}

void apply_backend_env_override(RunConfig& config, const char* value) {
    if (value == nullptr || *value == '\0') return;
    const std::string v(value);
    const std::size_t colon = v.find(':');
    const std::string kind = colon == std::string::npos ? v : v.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : v.substr(colon + 1);
    if (kind == "ngram") {
        config.backend.kind = "ngram";
        if (!rest.empty()) config.backend.corpus = rest;
    } else if (kind == "remote") {
        config.backend.kind = "remote";
        if (rest.empty()) throw ConfigError("FPEDIT_BACKEND=remote:<endpoint> needs an endpoint");
        config.backend.endpoint = rest;
    } else {
        throw ConfigError("FPEDIT_BACKEND must start with 'ngram' or 'remote', got '" + kind + "'");
    }
}

RunConfig load_run_config(const std::string& path) {
    RunConfig c = run_config_from_toml(load_toml_file(path));
    apply_backend_env_override(c, std::getenv("FPEDIT_BACKEND"));
    return c;
}

std::shared_ptr<Scorer> make_backend(const BackendSpec& spec) {
    if (spec.kind == "ngram") {
        if (spec.corpus.empty()) throw ConfigError("backend.corpus is required for the ngram backend");
        std::ifstream in(spec.corpus);
        if (!in) throw IoError("cannot open corpus file '" + spec.corpus + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        NgramOptions opts;
        opts.order = spec.order;
        opts.smoothing = spec.smoothing;
        opts.with_unk = spec.with_unk;
        opts.embedding_dim = spec.embedding_dim;
        return std::make_shared<NgramBackend>(ss.str(), opts);
    }
    if (spec.kind == "remote") {
        if (spec.endpoint.empty()) throw ConfigError("backend.endpoint is required for the remote backend");
        // The remote protocol carries no vocabulary; a fixed-size index
        // vocabulary stands in, and distribution lengths are checked against it.
        std::vector<std::string> toks;
        for (std::size_t i = 0; i < spec.vocab_size; ++i) toks.push_back("t" + std::to_string(i));
        return std::make_shared<RemoteBackend>(spec.endpoint, Vocabulary::from_tokens(toks),
                                               spec.embedding_dim);
    }
    throw ConfigError("unknown backend kind '" + spec.kind + "'");
}

} // namespace fpedit
