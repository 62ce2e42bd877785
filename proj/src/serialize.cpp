#include "ssmred/serialize.hpp"

#include <fstream>

namespace ssmred {

namespace {

json real_matrix(const RMatrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json real_vector(const RVector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json complex_matrix(const CMatrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back({M(i, j).real(), M(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw Error(ErrorCode::FormatError, std::string("missing field '") + key + "'");
    return j.at(key);
}

// Row count from JSON, column count from JSON or `cols_if_empty` when there are no rows.
template <class Matrix, class Entry>
Matrix parse_matrix(const json& j, Eigen::Index cols_if_empty, Entry entry) {
    if (!j.is_array()) throw Error(ErrorCode::FormatError, "matrix must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw Error(ErrorCode::FormatError, "ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = entry(row[static_cast<std::size_t>(c)]);
    }
    return M;
}

RMatrix parse_real(const json& j, Eigen::Index cols_if_empty = 0) {
    return parse_matrix<RMatrix>(j, cols_if_empty, [](const json& e) { return e.get<double>(); });
}

CMatrix parse_complex(const json& j, Eigen::Index cols_if_empty = 0) {
    return parse_matrix<CMatrix>(j, cols_if_empty, [](const json& e) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::FormatError, "complex entry must be [re, im]");
        return cplx(e[0].get<double>(), e[1].get<double>());
    });
}

RVector parse_vector(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::FormatError, "vector must be an array");
    RVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

}  // namespace

json to_json(const StateSpaceModel& ss) {
    return {{"a", complex_matrix(ss.A)},
            {"b", complex_matrix(ss.B)},
            {"c", complex_matrix(ss.C)},
            {"d", complex_matrix(ss.D)},
            {"is_diagonal", ss.is_diagonal},
            {"take_real_output", ss.take_real_output}};
}

StateSpaceModel state_space_from_json(const json& j) {
    StateSpaceModel ss;
    ss.A = parse_complex(field(j, "a"));
    ss.D = parse_complex(field(j, "d"));
    ss.B = parse_complex(field(j, "b"), ss.D.cols());
    ss.C = parse_complex(field(j, "c"), ss.A.rows());
    if (ss.A.rows() == 0) ss.A.resize(0, 0);
    ss.is_diagonal = field(j, "is_diagonal").get<bool>();
    ss.take_real_output = field(j, "take_real_output").get<bool>();
    try {
        ss.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::FormatError, e.what());
    }
    return ss;
}

json to_json(const LruParams& p) {
    return {{"nu", real_vector(p.nu)},
            {"phi", real_vector(p.phi)},
            {"b_tilde", complex_matrix(p.B_tilde)},
            {"c", complex_matrix(p.C)},
            {"d", real_matrix(p.D)}};
}

LruParams lru_from_json(const json& j) {
    LruParams p;
    p.nu = parse_vector(field(j, "nu"));
    p.phi = parse_vector(field(j, "phi"));
    p.D = parse_real(field(j, "d"));
    p.B_tilde = parse_complex(field(j, "b_tilde"), p.D.cols());
    p.C = parse_complex(field(j, "c"), p.nu.size());
    if (p.phi.size() != p.nu.size() || p.B_tilde.rows() != p.nu.size() || p.C.cols() != p.nu.size() ||
        p.C.rows() != p.D.rows() || p.B_tilde.cols() != p.D.cols())
        throw Error(ErrorCode::FormatError, "inconsistent LRU parameter shapes");
    return p;
}

json to_json(const DeepSsmConfig& c) {
    return {{"n_in", c.n_in},
            {"n_out", c.n_out},
            {"d_model", c.d_model},
            {"n_x", c.n_x},
            {"n_layers", c.n_layers},
            {"nonlinearity", std::string(to_string(c.nonlinearity))},
            {"mlp_hidden", c.mlp_hidden},
            {"norm", std::string(to_string(c.norm))},
            {"n_skip_loss", c.n_skip_loss},
            {"lru_r_min", c.lru_init.r_min},
            {"lru_r_max", c.lru_init.r_max},
            {"lru_max_phase", c.lru_init.max_phase}};
}

DeepSsmConfig model_config_from_json(const json& j) {
    DeepSsmConfig c;
    c.n_in = field(j, "n_in").get<std::size_t>();
    c.n_out = field(j, "n_out").get<std::size_t>();
    c.d_model = field(j, "d_model").get<std::size_t>();
    c.n_x = field(j, "n_x").get<std::size_t>();
    c.n_layers = field(j, "n_layers").get<std::size_t>();
    c.nonlinearity = parse_nonlinearity(field(j, "nonlinearity").get<std::string>());
    c.mlp_hidden = field(j, "mlp_hidden").get<std::size_t>();
    c.norm = parse_norm(field(j, "norm").get<std::string>());
    c.n_skip_loss = field(j, "n_skip_loss").get<std::size_t>();
    c.lru_init.r_min = j.value("lru_r_min", c.lru_init.r_min);
    c.lru_init.r_max = j.value("lru_r_max", c.lru_init.r_max);
    c.lru_init.max_phase = j.value("lru_max_phase", c.lru_init.max_phase);
    return c;
}

json to_json(const DeepSsm& m) {
    json layers = json::array();
    for (const auto& l : m.layers) {
        layers.push_back({{"norm", {{"gain", real_vector(l.norm.gain)}, {"bias", real_vector(l.norm.bias)}}},
                          {"lru", to_json(l.lru)},
                          {"f",
                           {{"w1", real_matrix(l.f.W1)},
                            {"b1", real_vector(l.f.b1)},
                            {"w2", real_matrix(l.f.W2)},
                            {"b2", real_vector(l.f.b2)}}}});
    }
    return {{"format_version", kModelFormatVersion},
            {"config", to_json(m.config)},
            {"input_proj", {{"weight", real_matrix(m.W_in)}, {"bias", real_vector(m.b_in)}}},
            {"layers", std::move(layers)},
            {"output_proj", {{"weight", real_matrix(m.W_out)}, {"bias", real_vector(m.b_out)}}}};
}

DeepSsm model_from_json(const json& j) {
    const int version = field(j, "format_version").get<int>();
    if (version != kModelFormatVersion)
        throw Error(ErrorCode::FormatError, "unsupported format_version " + std::to_string(version));
    DeepSsm m;
    m.config = model_config_from_json(field(j, "config"));
    const json& in = field(j, "input_proj");
    m.W_in = parse_real(field(in, "weight"));
    m.b_in = parse_vector(field(in, "bias"));
    for (const json& lj : field(j, "layers")) {
        Layer l;
        const json& norm = field(lj, "norm");
        l.norm.gain = parse_vector(field(norm, "gain"));
        l.norm.bias = parse_vector(field(norm, "bias"));
        l.lru = lru_from_json(field(lj, "lru"));
        const json& f = field(lj, "f");
        l.f.W1 = parse_real(field(f, "w1"));
        l.f.b1 = parse_vector(field(f, "b1"));
        l.f.W2 = parse_real(field(f, "w2"));
        l.f.b2 = parse_vector(field(f, "b2"));
        m.layers.push_back(std::move(l));
    }
    const json& out = field(j, "output_proj");
    m.W_out = parse_real(field(out, "weight"));
    m.b_out = parse_vector(field(out, "bias"));
    if (m.layers.size() != m.config.n_layers)
        throw Error(ErrorCode::FormatError, "layer count does not match config.n_layers");
    return m;
}

json to_json(const ReductionReport& r) {
    json removed = json::array();
    for (const auto& l : r.removed_eigenvalues) removed.push_back({l.real(), l.imag()});
    return {{"method", std::string(to_string(r.method))},
            {"original_order", r.original_order},
            {"retained_order", r.retained_order},
            {"bound", r.bound ? json(*r.bound) : json(nullptr)},
            {"hinf_error_estimate", r.hinf_error_estimate},
            {"dc_gain_error", r.dc_gain_error},
            {"removed_eigenvalues", std::move(removed)}};
}

json to_json(const AdamWState& s) { return {{"step", s.step}, {"m", s.m}, {"v", s.v}}; }

AdamWState optimizer_from_json(const json& j) {
    AdamWState s;
    s.step = field(j, "step").get<std::size_t>();
    s.m = field(j, "m").get<std::vector<double>>();
    s.v = field(j, "v").get<std::vector<double>>();
    return s;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(1) << '\n';
}

void save_model(const DeepSsm& m, const std::filesystem::path& path) { write_json_file(path, to_json(m)); }

DeepSsm load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
}

}  // namespace ssmred
