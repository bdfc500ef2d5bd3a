#include "aealt/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "aealt/errors.hpp"
#include "aealt/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace aealt::data {

Task task_from_string(const std::string& s) {
    if (s == "classification") return Task::Classification;
    if (s == "regression") return Task::Regression;
    if (s == "anomaly") return Task::Anomaly;
    throw ConfigError("unknown task: " + s);
}

std::string to_string(Task t) {
    switch (t) {
        case Task::Classification: return "classification";
        case Task::Regression: return "regression";
        case Task::Anomaly: return "anomaly";
    }
    return "?";
}

void EmbeddingMatrix::validate() const {
    if (values.cols() == 0) throw DataError("embedding matrix has zero dimension");
    if (ids.size() != values.rows()) throw DataError("id count does not match row count");
    if (!all_finite(values)) throw DataError("embedding matrix contains NaN/Inf");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (id.empty()) throw DataError("empty row id");
        if (!seen.insert(id).second) throw DataError("duplicate row id: " + id);
    }
}

void LabeledDataset::validate() const {
    embeddings.validate();
    const std::size_t n = embeddings.size();
    if (task == Task::Regression) {
        if (targets.size() != n) throw DataError("target length does not match row count");
        if (!all_finite(targets)) throw DataError("non-finite regression target");
    } else {
        if (labels.size() != n) throw DataError("label length does not match row count");
        if (num_classes < 2) throw DataError("need at least 2 classes");
        std::vector<std::size_t> counts(num_classes, 0);
        for (int y : labels) {
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
                throw DataError("label out of range [0, c)");
            ++counts[static_cast<std::size_t>(y)];
        }
        for (std::size_t c = 0; c < num_classes; ++c)
            if (counts[c] == 0)
                throw DataError("labels not dense: class " + std::to_string(c) + " absent");
    }
}

FileFormat format_from_string(const std::string& s) {
    if (s == "csv") return FileFormat::Csv;
    if (s == "binary") return FileFormat::Binary;
    throw ConfigError("unknown file format: " + s);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw DataError("line " + std::to_string(line_no) + ": bad float value '" + s + "'");
    return v;
}

long parse_int(const std::string& s, std::size_t line_no) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw DataError("line " + std::to_string(line_no) + ": bad integer value '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

EmbeddingMatrix load_embeddings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file (header required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "id")
        throw DataError(path + ": header must be 'id,<dim...>'");
    const std::size_t d = header.size() - 1;

    std::vector<std::string> ids;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != d + 1)
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(d + 1) + " fields, got " +
                            std::to_string(fields.size()));
        ids.push_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j)
            values.push_back(parse_double(fields[j], line_no));
    }
    EmbeddingMatrix m;
    m.ids = std::move(ids);
    m.values = Matrix(m.ids.size(), d);
    std::copy(values.begin(), values.end(), m.values.data());
    m.validate();
    return m;
}

void save_embeddings_csv(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "id";
    for (std::size_t j = 0; j < m.dim(); ++j) out << ",dim_" << j;
    out << "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.ids[i].find_first_of(",\n\r") != std::string::npos)
            throw DataError("id contains a csv delimiter: " + m.ids[i]);
        out << m.ids[i];
        for (std::size_t j = 0; j < m.dim(); ++j) out << ',' << format_double(m.values(i, j));
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw DataError(path + ": truncated binary file");
    return v;
}

EmbeddingMatrix load_embeddings_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "EMB1", 4) != 0)
        throw DataError(path + ": bad magic (expected EMB1)");
    const std::uint32_t n = read_u32(in, path);
    const std::uint32_t d = read_u32(in, path);
    EmbeddingMatrix m;
    m.values = Matrix(n, d);
    if (!in.read(reinterpret_cast<char*>(m.values.data()),
                 static_cast<std::streamsize>(sizeof(double) * m.values.size())))
        throw DataError(path + ": truncated value block");
    m.ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t len = read_u32(in, path);
        std::string id(len, '\0');
        if (!in.read(id.data(), len)) throw DataError(path + ": truncated id block");
        m.ids.push_back(std::move(id));
    }
    m.validate();
    return m;
}

void save_embeddings_binary(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write("EMB1", 4);
    write_u32(out, static_cast<std::uint32_t>(m.size()));
    write_u32(out, static_cast<std::uint32_t>(m.dim()));
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(sizeof(double) * m.values.size()));
    for (const auto& id : m.ids) {
        write_u32(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::string& path, FileFormat format) {
    return format == FileFormat::Csv ? load_embeddings_csv(path) : load_embeddings_binary(path);
}

void save_embeddings(const EmbeddingMatrix& m, const std::string& path, FileFormat format) {
    m.validate();
    const std::string tmp = path + ".tmp";
    if (format == FileFormat::Csv)
        save_embeddings_csv(m, tmp);
    else
        save_embeddings_binary(m, tmp);
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot rename " + tmp + " to " + path);
}

LabeledDataset attach_labels(EmbeddingMatrix embeddings, const std::string& labels_path,
                             Task task) {
    embeddings.validate();
    std::ifstream in(labels_path);
    if (!in) throw DataError("cannot open " + labels_path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(labels_path + ": empty file (header required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "id" || header[1] != "target")
        throw DataError(labels_path + ": header must be 'id,target'");

    std::unordered_map<std::string, std::string> by_id;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw DataError(labels_path + ": line " + std::to_string(line_no) +
                            ": expected 2 fields");
        if (!by_id.emplace(fields[0], fields[1]).second)
            throw DataError(labels_path + ": duplicate id " + fields[0]);
    }

    LabeledDataset ds;
    ds.task = task;
    const std::size_t n = embeddings.size();
    if (by_id.size() != n)
        throw DataError(labels_path + ": label count " + std::to_string(by_id.size()) +
                        " does not match embedding count " + std::to_string(n));
    int max_label = -1;
    for (std::size_t i = 0; i < n; ++i) {
        auto it = by_id.find(embeddings.ids[i]);
        if (it == by_id.end())
            throw DataError(labels_path + ": missing label for id " + embeddings.ids[i]);
        if (task == Task::Regression) {
            ds.targets.push_back(parse_double(it->second, 0));
        } else {
            const long y = parse_int(it->second, 0);
            if (y < 0) throw DataError(labels_path + ": negative class label");
            ds.labels.push_back(static_cast<int>(y));
            max_label = std::max(max_label, static_cast<int>(y));
        }
    }
    ds.embeddings = std::move(embeddings);
    if (task != Task::Regression) {
        if (task == Task::Anomaly && max_label > 1)
            throw DataError(labels_path + ": anomaly labels must be 0/1");
        ds.num_classes = static_cast<std::size_t>(max_label) + 1;
        if (task == Task::Anomaly) ds.num_classes = 2;
    }
    ds.validate();
    return ds;
}

void save_labels(const LabeledDataset& ds, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write " + tmp);
        out << "id,target\n";
        for (std::size_t i = 0; i < ds.size(); ++i) {
            out << ds.embeddings.ids[i] << ',';
            if (ds.task == Task::Regression)
                out << format_double(ds.targets[i]);
            else
                out << ds.labels[i];
            out << "\n";
        }
        if (!out) throw DataError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot rename " + tmp + " to " + path);
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.task = ds.task;
    out.num_classes = ds.num_classes;
    out.embeddings.values = take_rows(ds.embeddings.values, indices);
    out.embeddings.ids.reserve(indices.size());
    for (std::size_t i : indices) out.embeddings.ids.push_back(ds.embeddings.ids[i]);
    if (ds.task == Task::Regression)
        for (std::size_t i : indices) out.targets.push_back(ds.targets[i]);
    else
        for (std::size_t i : indices) out.labels.push_back(ds.labels[i]);
    return out;
}

SplitResult split_dataset(const LabeledDataset& ds, double train_fraction, std::uint64_t seed,
                          bool stratified) {
    const std::size_t n = ds.size();
    if (n < 2) throw DataError("split: need at least 2 rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0,1)");
    // round-half-up
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
    if (n_train == 0 || n_train == n) throw DataError("split: degenerate partition");

    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;

    if (stratified) {
        if (ds.task == Task::Regression)
            throw ConfigError("split: stratified requires class labels");
        std::vector<std::vector<std::size_t>> groups(ds.num_classes);
        for (std::size_t i = 0; i < n; ++i)
            groups[static_cast<std::size_t>(ds.labels[i])].push_back(i);
        for (std::size_t c = 0; c < groups.size(); ++c)
            if (groups[c].size() < 2)
                throw DataError("split: class " + std::to_string(c) +
                                " has fewer than 2 members");
        // Largest-remainder quotas per class.
        std::vector<std::size_t> quota(groups.size());
        std::vector<std::pair<double, std::size_t>> rema;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < groups.size(); ++c) {
            const double exact = train_fraction * static_cast<double>(groups[c].size());
            quota[c] = static_cast<std::size_t>(std::floor(exact));
            assigned += quota[c];
            rema.emplace_back(exact - std::floor(exact), c);
        }
        std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
            return a.first > b.first;  // ties keep smaller class index first
        });
        for (std::size_t i = 0; assigned < n_train && i < rema.size(); ++i, ++assigned)
            ++quota[rema[i].second];
        for (std::size_t c = 0; c < groups.size(); ++c) {
            rng.shuffle(groups[c]);
            for (std::size_t i = 0; i < groups[c].size(); ++i)
                (i < quota[c] ? train_idx : test_idx).push_back(groups[c][i]);
        }
    } else {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        train_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    }

    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    SplitResult res;
    res.train = subset(ds, train_idx);
    res.test = subset(ds, test_idx);
    res.train_indices = std::move(train_idx);
    res.test_indices = std::move(test_idx);
    return res;
}

StandardScaler fit_scaler(const Matrix& train) {
    if (train.rows() == 0) throw DataError("fit_scaler: empty training matrix");
    StandardScaler s;
    s.mean = col_means(train);
    s.scale.assign(train.cols(), 0.0);
    s.constant.assign(train.cols(), false);
    for (std::size_t i = 0; i < train.rows(); ++i) {
        const double* r = train.row(i);
        for (std::size_t j = 0; j < train.cols(); ++j) {
            const double d = r[j] - s.mean[j];
            s.scale[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < train.cols(); ++j) {
        // population convention: divide by n
        double std_j = std::sqrt(s.scale[j] / static_cast<double>(train.rows()));
        if (std_j <= 1e-12 * std::max(1.0, std::abs(s.mean[j]))) {
            s.scale[j] = 1.0;
            s.constant[j] = true;
        } else {
            s.scale[j] = std_j;
        }
    }
    return s;
}

Matrix apply_scaler(const StandardScaler& s, const Matrix& m) {
    if (m.cols() != s.mean.size()) throw DataError("apply_scaler: dimension mismatch");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out(i, j) = (m(i, j) - s.mean[j]) / s.scale[j];
    return out;
}

Matrix invert_scaler(const StandardScaler& s, const Matrix& m) {
    if (m.cols() != s.mean.size()) throw DataError("invert_scaler: dimension mismatch");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) * s.scale[j] + s.mean[j];
    return out;
}

Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "linear") return Nonlinearity::Linear;
    if (s == "tanh") return Nonlinearity::Tanh;
    if (s == "quadratic") return Nonlinearity::Quadratic;
    throw ConfigError("unknown nonlinearity: " + s);
}

std::string to_string(Nonlinearity g) {
    switch (g) {
        case Nonlinearity::Linear: return "linear";
        case Nonlinearity::Tanh: return "tanh";
        case Nonlinearity::Quadratic: return "quadratic";
    }
    return "?";
}

LoadingKind loading_from_string(const std::string& s) {
    if (s == "gaussian") return LoadingKind::Gaussian;
    if (s == "identity") return LoadingKind::Identity;
    if (s == "grouped") return LoadingKind::Grouped;
    throw ConfigError("unknown loading kind: " + s);
}

std::string to_string(LoadingKind k) {
    switch (k) {
        case LoadingKind::Gaussian: return "gaussian";
        case LoadingKind::Identity: return "identity";
        case LoadingKind::Grouped: return "grouped";
    }
    return "?";
}

void SyntheticSpec::validate() const {
    if (n == 0 || d == 0 || r == 0) throw ConfigError("synthetic: n, d, r must be positive");
    if (r > d) throw ConfigError("synthetic: r must not exceed d");
    if (predictive.empty()) throw ConfigError("synthetic: predictive set must be non-empty");
    std::vector<bool> seen(r, false);
    for (std::size_t j : predictive) {
        if (j >= r) throw ConfigError("synthetic: predictive index out of [0, r)");
        if (seen[j]) throw ConfigError("synthetic: duplicate predictive index");
        seen[j] = true;
    }
    if (noise_sigma < 0.0) throw ConfigError("synthetic: noise sigma must be >= 0");
    if (loading == LoadingKind::Identity && d < r)
        throw ConfigError("synthetic: identity loading requires d >= r");
    if (loading == LoadingKind::Grouped) {
        if (signal_rows > d) throw ConfigError("synthetic: signal_rows exceeds d");
        if (signal_rows < d && predictive.size() == r)
            throw ConfigError("synthetic: grouped loading needs non-predictive factors "
                              "for the background rows");
    }
    if (task == Task::Anomaly && !(anomaly_fraction > 0.0 && anomaly_fraction < 0.5))
        throw ConfigError("synthetic: anomaly_fraction must be in (0, 0.5)");
}

static Matrix make_loading(const SyntheticSpec& spec, Rng& rng) {
    Matrix a(spec.d, spec.r);
    switch (spec.loading) {
        case LoadingKind::Gaussian: {
            const double s = 1.0 / std::sqrt(static_cast<double>(spec.r));
            for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = s * rng.normal();
            break;
        }
        case LoadingKind::Identity:
            for (std::size_t j = 0; j < spec.r; ++j) a(j, j) = 1.0;
            break;
        case LoadingKind::Grouped: {
            std::vector<std::size_t> background;
            std::vector<bool> is_pred(spec.r, false);
            for (std::size_t j : spec.predictive) is_pred[j] = true;
            for (std::size_t j = 0; j < spec.r; ++j)
                if (!is_pred[j]) background.push_back(j);
            for (std::size_t i = 0; i < spec.d; ++i) {
                std::size_t factor;
                double scale;
                if (i < spec.signal_rows) {
                    factor = spec.predictive[i % spec.predictive.size()];
                    scale = spec.signal_scale;
                } else {
                    factor = background[(i - spec.signal_rows) % background.size()];
                    scale = spec.background_scale;
                }
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                a(i, factor) = sign * scale * rng.uniform(0.8, 1.2);
            }
            break;
        }
    }
    return a;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    Matrix f(spec.n, spec.r);
    for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.normal();

    Matrix a = make_loading(spec, rng);

    Matrix x = matmul_a_bt(f, a);
    switch (spec.nonlinearity) {
        case Nonlinearity::Linear:
            break;
        case Nonlinearity::Tanh:
            for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = std::tanh(x.data()[i]);
            break;
        case Nonlinearity::Quadratic:
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double z = x.data()[i];
                x.data()[i] = z + 0.5 * z * z;
            }
            break;
    }
    if (spec.noise_sigma > 0.0)
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += spec.noise_sigma * rng.normal();

    SyntheticData out;
    out.dataset.task = spec.task;
    out.dataset.embeddings.values = std::move(x);
    out.dataset.embeddings.ids.reserve(spec.n);
    char buf[32];
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::snprintf(buf, sizeof(buf), "synth-%06zu", i);
        out.dataset.embeddings.ids.emplace_back(buf);
    }

    Vector fsum(spec.n, 0.0);
    for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t j : spec.predictive) fsum[i] += f(i, j);

    switch (spec.task) {
        case Task::Classification:
            out.dataset.num_classes = 2;
            for (std::size_t i = 0; i < spec.n; ++i)
                out.dataset.labels.push_back(fsum[i] > 0.0 ? 1 : 0);
            break;
        case Task::Anomaly: {
            out.dataset.num_classes = 2;
            // fsum ~ N(0, |predictive|): threshold at the (1 - fraction) quantile.
            const double thr = std::sqrt(static_cast<double>(spec.predictive.size())) *
                               inverse_normal_cdf(1.0 - spec.anomaly_fraction);
            for (std::size_t i = 0; i < spec.n; ++i)
                out.dataset.labels.push_back(fsum[i] > thr ? 1 : 0);
            break;
        }
        case Task::Regression:
            for (std::size_t i = 0; i < spec.n; ++i)
                out.dataset.targets.push_back(fsum[i] + 0.1 * rng.normal());
            break;
    }

    out.factors = std::move(f);
    out.loading = std::move(a);
    return out;
}

}  // namespace aealt::data
