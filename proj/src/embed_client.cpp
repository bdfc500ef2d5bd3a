#include "aealt/embed_client.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "aealt/errors.hpp"

namespace aealt::embed {

namespace fs = std::filesystem;
using nlohmann::json;

void EmbedEndpointConfig::validate() const {
    if (model.empty()) throw ConfigError("embed: model name required");
    if (batch_size < 1) throw ConfigError("embed: batch_size must be >= 1");
    if (cache_dir.empty()) throw ConfigError("embed: cache_dir required");
    if (max_concurrency < 1) throw ConfigError("embed: max_concurrency must be >= 1");
    if (timeout_seconds <= 0.0) throw ConfigError("embed: timeout must be positive");
}

std::string cache_key(const std::string& model, const std::string& text) {
    // SHA-256 over model || NUL || text; the separator keeps (model, text)
    // pairs unambiguous under concatenation.
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw DataError("cache_key: digest init failed");
    }
    EVP_DigestUpdate(ctx, model.data(), model.size());
    const char sep = '\0';
    EVP_DigestUpdate(ctx, &sep, 1);
    EVP_DigestUpdate(ctx, text.data(), text.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {

// Cache entries are single-row EMB1 files whose row id is the model name.
std::optional<Vector> cache_read(const fs::path& file) {
    if (!fs::exists(file)) return std::nullopt;
    try {
        auto m = data::load_embeddings(file.string(), data::FileFormat::Binary);
        if (m.size() != 1) return std::nullopt;
        Vector v(m.values.row(0), m.values.row(0) + m.dim());
        return v;
    } catch (const DataError&) {
        std::cerr << "warning: corrupt cache entry " << file << ", refetching\n";
        return std::nullopt;
    }
}

void cache_write(const fs::path& file, const std::string& model, const Vector& v) {
    data::EmbeddingMatrix m;
    m.ids.push_back(model);
    m.values = Matrix(1, v.size());
    std::copy(v.begin(), v.end(), m.values.data());
    static std::atomic<unsigned> counter{0};
    const fs::path tmp =
        file.string() + ".tmp" + std::to_string(counter.fetch_add(1, std::memory_order_relaxed));
    data::save_embeddings(m, tmp.string(), data::FileFormat::Binary);
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("cache write failed for " + file.string() + ": " + ec.message());
    }
}

struct ParsedUrl {
    std::string scheme_host;  // scheme://host:port, what httplib::Client wants
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("embed: base_url must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    if (path_start == std::string::npos) {
        p.scheme_host = url;
        p.path = "/";
    } else {
        p.scheme_host = url.substr(0, path_start);
        p.path = url.substr(path_start);
    }
    return p;
}

// One POST with retry/backoff; returns the embeddings for `texts`.
std::vector<Vector> fetch_batch(const EmbedEndpointConfig& config,
                                const std::vector<std::string>& texts) {
    if (config.base_url.empty())
        throw TransportError("embed: cache miss but no endpoint configured");
    const ParsedUrl url = parse_url(config.base_url);

    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr)
            throw ConfigError("embed: environment variable " + config.api_key_env + " not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body;
    body["model"] = config.model;
    body["input"] = texts;
    const std::string payload = body.dump();

    std::string last_error = "no attempt made";
    for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(config.backoff_base_ms
                                                         << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client cli(url.scheme_host);
        const auto timeout = std::chrono::milliseconds(
            static_cast<long long>(config.timeout_seconds * 1000.0));
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }

        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("embed: response is not valid JSON: ") + e.what());
        }
        if (!parsed.contains("data") || !parsed["data"].is_array())
            throw ProtocolError("embed: response missing data array");
        const auto& arr = parsed["data"];
        if (arr.size() != texts.size())
            throw ProtocolError("embed: expected " + std::to_string(texts.size()) +
                                " embeddings, got " + std::to_string(arr.size()));
        std::vector<Vector> out;
        out.reserve(arr.size());
        for (const auto& item : arr) {
            if (!item.is_object() || !item.contains("embedding") ||
                !item["embedding"].is_array())
                throw ProtocolError("embed: data entry missing embedding array");
            Vector v;
            v.reserve(item["embedding"].size());
            for (const auto& x : item["embedding"]) {
                if (!x.is_number()) throw ProtocolError("embed: non-numeric embedding entry");
                v.push_back(x.get<double>());
            }
            if (!out.empty() && v.size() != out.front().size())
                throw ProtocolError("embed: inconsistent vector lengths within response");
            out.push_back(std::move(v));
        }
        return out;
    }
    throw TransportError("embed: request failed after " +
                         std::to_string(config.max_retries + 1) + " attempts; last: " +
                         last_error);
}

}  // namespace

data::EmbeddingMatrix embed_texts(const std::vector<std::string>& texts,
                                  const EmbedEndpointConfig& config) {
    config.validate();
    fs::create_directories(config.cache_dir);
    const fs::path dir(config.cache_dir);

    std::vector<Vector> rows(texts.size());
    std::vector<bool> have(texts.size(), false);
    std::vector<std::string> keys(texts.size());

    // Cache pass; misses deduplicated by key, first occurrence wins.
    std::vector<std::size_t> miss_index;
    std::unordered_map<std::string, std::size_t> first_by_key;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = cache_key(config.model, texts[i]);
        if (auto v = cache_read(dir / keys[i])) {
            rows[i] = std::move(*v);
            have[i] = true;
        } else if (first_by_key.emplace(keys[i], i).second) {
            miss_index.push_back(i);
        }
    }

    // Fetch misses in input-order batches, optionally concurrently.
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < miss_index.size(); start += config.batch_size) {
        const std::size_t stop = std::min(miss_index.size(), start + config.batch_size);
        batches.emplace_back(miss_index.begin() + static_cast<std::ptrdiff_t>(start),
                             miss_index.begin() + static_cast<std::ptrdiff_t>(stop));
    }

    std::atomic<std::size_t> next{0};
    std::mutex fail_mutex;
    std::exception_ptr failure;
    auto worker = [&]() {
        try {
            while (true) {
                const std::size_t b = next.fetch_add(1);
                if (b >= batches.size()) return;
                {
                    std::lock_guard<std::mutex> lock(fail_mutex);
                    if (failure) return;
                }
                std::vector<std::string> batch_texts;
                for (std::size_t i : batches[b]) batch_texts.push_back(texts[i]);
                auto vecs = fetch_batch(config, batch_texts);
                for (std::size_t k = 0; k < batches[b].size(); ++k) {
                    const std::size_t i = batches[b][k];
                    cache_write(dir / keys[i], config.model, vecs[k]);
                    rows[i] = std::move(vecs[k]);
                    have[i] = true;
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    const std::size_t workers = std::min(config.max_concurrency, batches.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Duplicates of fetched keys resolve from the cache now.
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (have[i]) continue;
        if (auto v = cache_read(dir / keys[i])) {
            rows[i] = std::move(*v);
            have[i] = true;
        } else {
            throw DataError("embed: entry missing after fetch for input " + std::to_string(i));
        }
    }

    // Determine width; for an empty input fall back to any cached entry of
    // this model.
    std::size_t d = 0;
    if (!texts.empty()) {
        d = rows.front().size();
    } else {
        bool found = false;
        if (fs::exists(dir))
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (!entry.is_regular_file()) continue;
                if (entry.path().filename().string().find(".tmp") != std::string::npos) continue;
                try {
                    auto m = data::load_embeddings(entry.path().string(),
                                                   data::FileFormat::Binary);
                    if (m.size() == 1 && m.ids[0] == config.model) {
                        d = m.dim();
                        found = true;
                        break;
                    }
                } catch (const DataError&) {
                }
            }
        if (!found)
            throw DataError("embed: empty input and no cached entry to infer dimension");
    }

    data::EmbeddingMatrix out;
    out.values = Matrix(texts.size(), d);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (rows[i].size() != d)
            throw ProtocolError("embed: vector length mismatch across batches");
        std::copy(rows[i].begin(), rows[i].end(), out.values.row(i));
        out.ids.push_back(std::to_string(i));
    }
    return out;
}

CacheStats cache_stats(const std::string& cache_dir) {
    if (!fs::is_directory(cache_dir))
        throw DataError("cache_stats: not a directory: " + cache_dir);
    CacheStats stats;
    std::set<std::string> models;
    for (const auto& entry : fs::directory_iterator(cache_dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename().string().find(".tmp") != std::string::npos) continue;
        try {
            auto m = data::load_embeddings(entry.path().string(), data::FileFormat::Binary);
            if (m.size() != 1) throw DataError("not a single-row entry");
            ++stats.entries;
            stats.bytes += static_cast<std::size_t>(fs::file_size(entry.path()));
            models.insert(m.ids[0]);
        } catch (const DataError&) {
            std::cerr << "warning: corrupt cache entry " << entry.path() << "\n";
            ++stats.corrupt;
        }
    }
    stats.models = models.size();
    return stats;
}

}  // namespace aealt::embed
