#include "fpedit/remote_backend.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace fpedit {

using nlohmann::json;

RemoteBackend::RemoteBackend(std::string endpoint, Vocabulary vocab, std::size_t embedding_dim,
                             std::string path, int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      path_(std::move(path)),
      timeout_seconds_(timeout_seconds),
      vocab_(std::move(vocab)),
      embedding_dim_(embedding_dim) {
    if (endpoint_.empty()) throw ConfigError("remote backend: empty endpoint");
}

std::string RemoteBackend::post(const std::string& body) const {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    auto res = client.Post(path_, body, "application/json");
    if (!res)
        throw TransportError("remote backend: request to " + endpoint_ + path_ +
                             " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("remote backend: HTTP " + std::to_string(res->status) + " from " +
                             endpoint_ + path_);
    return res->body;
}

namespace {

json parse_response(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("remote backend: response is not JSON: ") + e.what());
    }
}

} // namespace

TokenDistribution RemoteBackend::next_token_distribution(std::span<const std::string> context) const {
    json req;
    req["kind"] = "distribution";
    req["context"] = std::vector<std::string>(context.begin(), context.end());
    const json resp = parse_response(post(req.dump()));
    if (!resp.contains("probs") || !resp["probs"].is_array())
        throw SchemaError("remote backend: distribution response lacks a probs array");

    TokenDistribution d;
    d.probs = resp["probs"].get<std::vector<double>>();
    if (d.probs.size() != vocab_.size())
        throw SchemaError("remote backend: probs length " + std::to_string(d.probs.size()) +
                          " != vocabulary size " + std::to_string(vocab_.size()));
    double sum = 0.0;
    for (double p : d.probs) {
        if (!(p >= 0.0)) throw SchemaError("remote backend: negative or NaN probability");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-3)
        throw SchemaError("remote backend: probabilities sum to " + std::to_string(sum) +
                          ", outside the 1e-3 renormalization window");
    for (double& p : d.probs) p /= sum;
    return d;
}

double RemoteBackend::sequence_nll(std::span<const std::string> sequence) const {
    if (sequence.empty()) throw InputError("sequence_nll: empty sequence");
    json req;
    req["kind"] = "nll";
    req["sequence"] = std::vector<std::string>(sequence.begin(), sequence.end());
    const json resp = parse_response(post(req.dump()));
    if (!resp.contains("nll") || !resp["nll"].is_number())
        throw SchemaError("remote backend: nll response lacks a numeric nll field");
    const double nll = resp["nll"].get<double>();
    if (!std::isfinite(nll)) throw SchemaError("remote backend: non-finite nll");
    return nll;
}

Embedding RemoteBackend::mean_pooled_embedding(std::string_view text) const {
    json req;
    req["kind"] = "embedding";
    req["text"] = std::string(text);
    const json resp = parse_response(post(req.dump()));
    if (!resp.contains("embedding") || !resp["embedding"].is_array())
        throw SchemaError("remote backend: embedding response lacks an embedding array");
    Embedding e;
    e.values = resp["embedding"].get<std::vector<double>>();
    if (e.values.size() != embedding_dim_)
        throw SchemaError("remote backend: embedding length " + std::to_string(e.values.size()) +
                          " != configured dimension " + std::to_string(embedding_dim_));
    for (double v : e.values)
        if (!std::isfinite(v)) throw SchemaError("remote backend: non-finite embedding entry");
    return e;
}

} // namespace fpedit
