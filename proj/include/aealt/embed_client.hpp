#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aealt/dataset.hpp"

namespace aealt::embed {

struct EmbedEndpointConfig {
    std::string base_url;     // e.g. http://127.0.0.1:8080/v1/embeddings
    std::string model;        // model name sent in the request body
    std::string api_key_env;  // optional env var holding a bearer token
    std::size_t batch_size = 16;
    double timeout_seconds = 30.0;
    std::size_t max_retries = 3;
    std::size_t backoff_base_ms = 1000;  // exponential, factor 2
    std::size_t max_concurrency = 1;     // concurrent in-flight batches
    std::string cache_dir;               // required; created on demand

    void validate() const;
};

struct CacheStats {
    std::size_t entries = 0;
    std::size_t models = 0;
    std::size_t bytes = 0;
    std::size_t corrupt = 0;
};

// Hex SHA-256 of (model, text); the cache filename.
std::string cache_key(const std::string& model, const std::string& text);

// Cache-first embedding lookup. Misses are batched into POST requests with
// body {"model": ..., "input": [...]}; responses must carry one embedding
// per input in order. Row ids of the result are the decimal input indices.
data::EmbeddingMatrix embed_texts(const std::vector<std::string>& texts,
                                  const EmbedEndpointConfig& config);

CacheStats cache_stats(const std::string& cache_dir);

}  // namespace aealt::embed
