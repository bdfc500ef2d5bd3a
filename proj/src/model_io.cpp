#include "aealt/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "aealt/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "FACM container assumes a little-endian host");

namespace aealt::io {

namespace {

using nlohmann::json;

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kClassFactor = 1;
constexpr std::uint32_t kClassDownstream = 2;

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw DataError("cannot write " + path);
    }
    void raw(const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void vec(const Vector& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }
    void mat(const Matrix& m) {
        u64(m.rows());
        u64(m.cols());
        raw(m.data(), m.size() * sizeof(double));
    }
    void spec(const nn::NetworkSpec& s) {
        u64(s.layer_dims.size());
        for (std::size_t d : s.layer_dims) u64(d);
        u64(s.activations.size());
        for (auto a : s.activations) u8(static_cast<std::uint8_t>(a));
    }
    void params(const nn::NetworkParams& p) {
        u64(p.weights.size());
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            mat(p.weights[l]);
            vec(p.biases[l]);
        }
    }
};

struct Reader {
    std::ifstream in;
    std::string path;
    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataError("cannot open " + p);
    }
    void raw(void* p, std::size_t n) {
        if (!in.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
            throw DataError(path + ": truncated model file");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        raw(&v, 4);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    Vector vec() {
        Vector v(u64());
        raw(v.data(), v.size() * sizeof(double));
        return v;
    }
    Matrix mat() {
        const std::uint64_t r = u64(), c = u64();
        Matrix m(r, c);
        raw(m.data(), m.size() * sizeof(double));
        return m;
    }
    nn::NetworkSpec spec() {
        nn::NetworkSpec s;
        s.layer_dims.resize(u64());
        for (auto& d : s.layer_dims) d = u64();
        s.activations.resize(u64());
        for (auto& a : s.activations) a = static_cast<nn::Activation>(u8());
        return s;
    }
    nn::NetworkParams params() {
        nn::NetworkParams p;
        const std::uint64_t layers = u64();
        for (std::uint64_t l = 0; l < layers; ++l) {
            p.weights.push_back(mat());
            p.biases.push_back(vec());
        }
        return p;
    }
};

void check_magic(Reader& r, std::uint32_t want_class) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, "FACM", 4) != 0)
        throw DataError(r.path + ": bad magic (expected FACM)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError(r.path + ": unsupported format version " + std::to_string(version));
    const std::uint32_t cls = r.u32();
    if (cls != want_class) throw DataError(r.path + ": wrong model class tag");
}

json spec_to_json(const nn::NetworkSpec& s) {
    json j;
    j["layer_dims"] = s.layer_dims;
    json acts = json::array();
    for (auto a : s.activations) acts.push_back(nn::to_string(a));
    j["activations"] = acts;
    return j;
}

nn::NetworkSpec spec_from_json(const json& j) {
    nn::NetworkSpec s;
    s.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("activations"))
        s.activations.push_back(nn::activation_from_string(a.get<std::string>()));
    return s;
}

void commit(const std::string& tmp, const std::string& path) {
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot rename " + tmp + " to " + path);
}

}  // namespace

void save_factor_model(const factor::FactorModel& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        Writer w(tmp);
        w.raw("FACM", 4);
        w.u32(kVersion);
        w.u32(kClassFactor);
        w.u32(static_cast<std::uint32_t>(model.kind));
        w.u64(model.input_dim);
        w.u64(model.latent_dim);
        w.u8(model.has_predictor ? 1 : 0);
        w.spec(model.config.encoder);
        w.spec(model.config.decoder);
        w.spec(model.config.predictor);
        w.params(model.encoder);
        w.params(model.decoder);
        w.params(model.predictor);
        w.mat(model.components);
        w.vec(model.mean);
        w.vec(model.eigenvalues);
        w.vec(model.loss_trace);
    }
    commit(tmp, path);

    json j;
    j["kind"] = factor::to_string(model.config.kind);
    j["latent_dim"] = model.config.latent_dim;
    j["lambda"] = model.config.lambda;
    j["task"] = data::to_string(model.config.task);
    j["num_classes"] = model.config.num_classes;
    j["epochs"] = model.config.epochs;
    j["batch_size"] = model.config.batch_size;
    j["learning_rate"] = model.config.learning_rate;
    j["seed"] = model.config.seed;
    j["encoder"] = spec_to_json(model.config.encoder);
    j["decoder"] = spec_to_json(model.config.decoder);
    j["predictor"] = spec_to_json(model.config.predictor);
    const std::string side = path + ".json";
    const std::string side_tmp = side + ".tmp";
    {
        std::ofstream out(side_tmp);
        if (!out) throw DataError("cannot write " + side_tmp);
        out << j.dump(2) << "\n";
    }
    commit(side_tmp, side);
}

factor::FactorModel load_factor_model(const std::string& path) {
    Reader r(path);
    check_magic(r, kClassFactor);
    factor::FactorModel m;
    m.kind = static_cast<factor::ReducerKind>(r.u32());
    m.input_dim = r.u64();
    m.latent_dim = r.u64();
    m.has_predictor = r.u8() != 0;
    m.config.encoder = r.spec();
    m.config.decoder = r.spec();
    m.config.predictor = r.spec();
    m.encoder = r.params();
    m.decoder = r.params();
    m.predictor = r.params();
    m.components = r.mat();
    m.mean = r.vec();
    m.eigenvalues = r.vec();
    m.loss_trace = r.vec();

    std::ifstream side(path + ".json");
    if (side) {
        json j = json::parse(side, nullptr, true);
        m.config.kind = factor::reducer_from_string(j.at("kind").get<std::string>());
        m.config.latent_dim = j.at("latent_dim").get<std::size_t>();
        m.config.lambda = j.at("lambda").get<double>();
        m.config.task = data::task_from_string(j.at("task").get<std::string>());
        m.config.num_classes = j.at("num_classes").get<std::size_t>();
        m.config.epochs = j.at("epochs").get<std::size_t>();
        m.config.batch_size = j.at("batch_size").get<std::size_t>();
        m.config.learning_rate = j.at("learning_rate").get<double>();
        m.config.seed = j.at("seed").get<std::uint64_t>();
        m.config.encoder = spec_from_json(j.at("encoder"));
        m.config.decoder = spec_from_json(j.at("decoder"));
        m.config.predictor = spec_from_json(j.at("predictor"));
    }
    return m;
}

void save_downstream_model(const downstream::DownstreamModel& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        Writer w(tmp);
        w.raw("FACM", 4);
        w.u32(kVersion);
        w.u32(kClassDownstream);
        w.u32(static_cast<std::uint32_t>(model.kind));
        w.u64(model.input_dim);
        w.u64(model.num_classes);
        w.mat(model.linear_weights);
        w.vec(model.linear_bias);
        w.spec(model.mlp_spec);
        w.params(model.mlp_params);
        w.vec(model.lasso_weights);
        w.vec(model.lasso_mean);
        w.vec(model.lasso_scale);
        w.f64(model.lasso_intercept);
        w.u64(model.trees.size());
        for (const auto& tree : model.trees) {
            w.u64(tree.nodes.size());
            for (const auto& nd : tree.nodes) {
                w.i32(nd.feature);
                w.f64(nd.split);
                w.i32(nd.left);
                w.i32(nd.right);
                w.u64(nd.size);
            }
        }
        w.u64(model.subsample_size);
    }
    commit(tmp, path);
}

downstream::DownstreamModel load_downstream_model(const std::string& path) {
    Reader r(path);
    check_magic(r, kClassDownstream);
    downstream::DownstreamModel m;
    m.kind = static_cast<downstream::LearnerKind>(r.u32());
    m.input_dim = r.u64();
    m.num_classes = r.u64();
    m.linear_weights = r.mat();
    m.linear_bias = r.vec();
    m.mlp_spec = r.spec();
    m.mlp_params = r.params();
    m.lasso_weights = r.vec();
    m.lasso_mean = r.vec();
    m.lasso_scale = r.vec();
    m.lasso_intercept = r.f64();
    const std::uint64_t n_trees = r.u64();
    for (std::uint64_t t = 0; t < n_trees; ++t) {
        downstream::IsolationTree tree;
        const std::uint64_t n_nodes = r.u64();
        for (std::uint64_t i = 0; i < n_nodes; ++i) {
            downstream::IsolationNode nd;
            nd.feature = r.i32();
            nd.split = r.f64();
            nd.left = r.i32();
            nd.right = r.i32();
            nd.size = r.u64();
            tree.nodes.push_back(nd);
        }
        m.trees.push_back(std::move(tree));
    }
    m.subsample_size = r.u64();
    return m;
}

}  // namespace aealt::io
