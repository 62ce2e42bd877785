#include "ssmred/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ssmred/serialize.hpp"

namespace ssmred {

std::vector<Sequence> Dataset::plain() const {
    std::vector<Sequence> out;
    out.reserve(sequences.size());
    for (const auto& s : sequences) out.push_back(s.data);
    return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw Error(ErrorCode::FormatError,
                    path.string() + ":" + std::to_string(line) + ": bad number '" + t + "'");
    return v;
}

}  // namespace

Sequence read_sequence_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::FormatError, path.string() + ": empty file");
    const auto header = split(line, ',');
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t k = 0; k < header.size(); ++k) {
        const std::string h = trim(header[k]);
        if (n_out == 0 && h == "u" + std::to_string(n_in + 1)) {
            ++n_in;
        } else if (h == "y" + std::to_string(n_out + 1)) {
            ++n_out;
        } else {
            throw Error(ErrorCode::FormatError, path.string() + ":1: unexpected column '" + h +
                                                    "' (expected u1..u{n},y1..y{m})");
        }
    }
    if (n_in == 0 || n_out == 0)
        throw Error(ErrorCode::FormatError, path.string() + ":1: need at least one u and one y column");

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != n_in + n_out)
            throw Error(ErrorCode::FormatError,
                        path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(n_in + n_out) + " values");
        for (const auto& c : cells) values.push_back(parse_double(c, path, lineno));
        ++rows;
    }
    const auto T = static_cast<Eigen::Index>(rows);
    Sequence s{RMatrix(static_cast<Eigen::Index>(n_in), T), RMatrix(static_cast<Eigen::Index>(n_out), T)};
    const std::size_t w = n_in + n_out;
    for (std::size_t k = 0; k < rows; ++k) {
        for (std::size_t i = 0; i < n_in; ++i)
            s.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[k * w + i];
        for (std::size_t i = 0; i < n_out; ++i)
            s.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[k * w + n_in + i];
    }
    return s;
}

void write_sequence_csv(const std::filesystem::path& path, const Sequence& s) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (Eigen::Index i = 0; i < s.u.rows(); ++i) out << (i ? "," : "") << 'u' << i + 1;
    for (Eigen::Index i = 0; i < s.y.rows(); ++i) out << ",y" << i + 1;
    out << '\n';
    char buf[32];
    for (Eigen::Index k = 0; k < s.u.cols(); ++k) {
        for (Eigen::Index i = 0; i < s.u.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", s.u(i, k));
            out << (i ? "," : "") << buf;
        }
        for (Eigen::Index i = 0; i < s.y.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", s.y(i, k));
            out << ',' << buf;
        }
        out << '\n';
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::IoError, "no .csv sequences in " + dir.string());
    Dataset d;
    for (const auto& f : files) d.sequences.push_back({f.stem().string(), read_sequence_csv(f)});
    const auto meta = dir / "meta.json";
    if (std::filesystem::exists(meta)) {
        const json j = read_json_file(meta);
        if (j.contains("sample_rate") && !j["sample_rate"].is_null()) d.sample_rate = j["sample_rate"].get<double>();
        d.input_names = j.value("input_names", std::vector<std::string>{});
        d.output_names = j.value("output_names", std::vector<std::string>{});
    }
    return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
    std::filesystem::create_directories(dir);
    for (const auto& s : d.sequences) write_sequence_csv(dir / (s.name + ".csv"), s.data);
    json meta{{"sample_rate", d.sample_rate ? json(*d.sample_rate) : json(nullptr)},
              {"input_names", d.input_names},
              {"output_names", d.output_names}};
    write_json_file(dir / "meta.json", meta);
}

Metrics metrics(const RMatrix& y, const RMatrix& y_hat) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
        throw Error(ErrorCode::LengthMismatch, "y and y_hat differ in shape");
    if (y.cols() == 0) throw Error(ErrorCode::LengthMismatch, "empty evaluation window");
    const auto n = y.rows();
    const auto T = static_cast<double>(y.cols());
    Metrics m{RVector(n), RVector(n), RVector(n)};
    for (Eigen::Index c = 0; c < n; ++c) {
        const double mean = y.row(c).mean();
        const double dev = (y.row(c).array() - mean).matrix().norm();
        if (dev == 0.0) throw Error(ErrorCode::ZeroVariance, "output channel " + std::to_string(c + 1) + " is constant");
        const double err = (y.row(c) - y_hat.row(c)).norm();
        m.fit(c) = 100.0 * (1.0 - err / dev);
        m.rmse(c) = err / std::sqrt(T);
        m.nrmse(c) = m.rmse(c) / (dev / std::sqrt(T));
    }
    return m;
}

Metrics evaluate(const DeepSsm& m, const std::vector<Sequence>& data, std::size_t n_skip) {
    const auto skip = static_cast<Eigen::Index>(n_skip);
    Eigen::Index total = 0;
    for (const auto& s : data) {
        if (s.y.cols() <= skip) throw Error(ErrorCode::LengthMismatch, "sequence not longer than n_skip");
        total += s.y.cols() - skip;
    }
    if (data.empty()) throw Error(ErrorCode::InvalidArgument, "no evaluation sequences");
    const auto n_out = data.front().y.rows();
    RMatrix y(n_out, total), y_hat(n_out, total);
    Eigen::Index offset = 0;
    for (const auto& s : data) {
        const RMatrix pred = forward(m, s.u);
        const auto len = s.y.cols() - skip;
        y.middleCols(offset, len) = s.y.rightCols(len);
        y_hat.middleCols(offset, len) = pred.rightCols(len);
        offset += len;
    }
    return metrics(y, y_hat);
}

RVector multisine(std::size_t T, std::size_t min_bin, std::size_t max_bin, std::mt19937_64& rng) {
    if (min_bin < 1 || max_bin < min_bin || 2 * max_bin >= T)
        throw Error(ErrorCode::InvalidArgument, "multisine bins must satisfy 1 <= min <= max < T/2");
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    RVector u = RVector::Zero(static_cast<Eigen::Index>(T));
    for (std::size_t b = min_bin; b <= max_bin; ++b) {
        const double ph = phase(rng);
        const double w = 2.0 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(T);
        for (std::size_t k = 0; k < T; ++k) u(static_cast<Eigen::Index>(k)) += std::cos(w * static_cast<double>(k) + ph);
    }
    const double rms = std::sqrt(u.squaredNorm() / static_cast<double>(T));
    return u / rms;
}

GeneratedData gen_data(const GenConfig& gen, const DeepSsmConfig& model, std::uint64_t seed) {
    model.validate();
    std::mt19937_64 rng(seed);
    const auto n_in = static_cast<Eigen::Index>(model.n_in);
    const auto n_out = static_cast<Eigen::Index>(model.n_out);
    const auto T = static_cast<Eigen::Index>(gen.seq_len);
    LruInit ring{gen.teacher_r_min, gen.teacher_r_max};

    GeneratedData out;
    std::function<RMatrix(const RMatrix&)> teacher;
    StateSpaceModel lti;
    DeepSsm deep;
    if (gen.teacher == TeacherKind::Lti) {
        lti = to_state_space(init_lru(n_in, n_out, static_cast<Eigen::Index>(gen.teacher_n_x), ring, rng));
        out.teacher = {{"kind", "lti"}, {"system", to_json(lti)}};
        teacher = [&](const RMatrix& u) { return simulate(lti, u); };
    } else {
        DeepSsmConfig tc = model;
        tc.n_x = gen.teacher_n_x;
        tc.n_layers = gen.teacher_n_layers;
        tc.d_model = gen.teacher_d_model;
        tc.lru_init = ring;
        deep = init_deep_ssm(tc, rng);
        out.teacher = {{"kind", "deep_ssm"}, {"model", to_json(deep)}};
        teacher = [&](const RMatrix& u) { return forward(deep, u); };
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t max_bin = gen.multisine_max_bin ? gen.multisine_max_bin : gen.seq_len / 4;
    auto make_input = [&]() {
        RMatrix u(n_in, T);
        for (Eigen::Index i = 0; i < n_in; ++i) {
            if (gen.input == InputKind::Multisine)
                u.row(i) = multisine(gen.seq_len, gen.multisine_min_bin, max_bin, rng).transpose();
            else
                for (Eigen::Index k = 0; k < T; ++k) u(i, k) = normal(rng);
        }
        return u;
    };
    auto make_split = [&](std::size_t count, const std::string& prefix, bool noisy) {
        Dataset d;
        for (std::size_t s = 0; s < count; ++s) {
            Sequence seq;
            seq.u = make_input();
            seq.y = teacher(seq.u);
            if (noisy && gen.noise_std > 0.0) {
                for (Eigen::Index c = 0; c < n_out; ++c) {
                    const double mean = seq.y.row(c).mean();
                    const double sd = std::sqrt((seq.y.row(c).array() - mean).square().mean());
                    for (Eigen::Index k = 0; k < T; ++k) seq.y(c, k) += gen.noise_std * sd * normal(rng);
                }
            }
            char name[32];
            std::snprintf(name, sizeof name, "%s_%03zu", prefix.c_str(), s);
            d.sequences.push_back({name, std::move(seq)});
        }
        return d;
    };
    out.train = make_split(gen.n_train_seqs, "train", true);
    out.test = make_split(gen.n_test_seqs, "test", false);
    return out;
}

}  // namespace ssmred
