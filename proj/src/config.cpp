#include "ssmred/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ssmred {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

struct Bad {
    std::string msg;
};

std::size_t as_count(const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw Bad{"expected a non-negative integer, got '" + v + "'"};
    return out;
}

std::uint64_t as_u64(const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw Bad{"expected an unsigned integer, got '" + v + "'"};
    return out;
}

double as_real(const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw Bad{"expected a number, got '" + v + "'"};
    return out;
}

std::string fmt_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Key {
    Setter set;
    Getter get;
};

#define COUNT_KEY(name, expr) \
    {name, {[](ExperimentConfig& c, const std::string& v) { expr = as_count(v); }, \
            [](const ExperimentConfig& c) { return std::to_string(expr); }}}
#define REAL_KEY(name, expr) \
    {name, {[](ExperimentConfig& c, const std::string& v) { expr = as_real(v); }, \
            [](const ExperimentConfig& c) { return fmt_real(expr); }}}

const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table = {
        COUNT_KEY("n_in", c.model.n_in),
        COUNT_KEY("n_out", c.model.n_out),
        COUNT_KEY("d_model", c.model.d_model),
        COUNT_KEY("n_x", c.model.n_x),
        COUNT_KEY("n_layers", c.model.n_layers),
        COUNT_KEY("mlp_hidden", c.model.mlp_hidden),
        COUNT_KEY("n_skip_loss", c.model.n_skip_loss),
        REAL_KEY("lru_r_min", c.model.lru_init.r_min),
        REAL_KEY("lru_r_max", c.model.lru_init.r_max),
        REAL_KEY("lru_max_phase", c.model.lru_init.max_phase),
        {"nonlinearity",
         {[](ExperimentConfig& c, const std::string& v) {
              try {
                  c.model.nonlinearity = parse_nonlinearity(v);
              } catch (const Error&) {
                  throw Bad{"nonlinearity must be mlp or glu"};
              }
          },
          [](const ExperimentConfig& c) { return std::string(to_string(c.model.nonlinearity)); }}},
        {"norm",
         {[](ExperimentConfig& c, const std::string& v) {
              try {
                  c.model.norm = parse_norm(v);
              } catch (const Error&) {
                  throw Bad{"norm must be layer_norm or none"};
              }
          },
          [](const ExperimentConfig& c) { return std::string(to_string(c.model.norm)); }}},

        REAL_KEY("learning_rate", c.train.learning_rate),
        COUNT_KEY("epochs", c.train.epochs),
        COUNT_KEY("max_steps", c.train.max_steps),
        COUNT_KEY("batch_size", c.train.batch_size),
        COUNT_KEY("subseq_len", c.train.subseq_len),
        REAL_KEY("overlap", c.train.overlap),
        REAL_KEY("reg_strength", c.train.reg_strength),
        COUNT_KEY("n_skip", c.train.n_skip),
        REAL_KEY("weight_decay", c.train.weight_decay),
        {"reg_kind",
         {[](ExperimentConfig& c, const std::string& v) {
              try {
                  c.train.reg_kind = parse_reg_kind(v);
              } catch (const Error&) {
                  throw Bad{"reg_kind must be none, modal_l1, hankel_nuclear or hankel_l2"};
              }
          },
          [](const ExperimentConfig& c) { return std::string(to_string(c.train.reg_kind)); }}},
        {"seed",
         {[](ExperimentConfig& c, const std::string& v) { c.train.seed = as_u64(v); },
          [](const ExperimentConfig& c) { return std::to_string(c.train.seed); }}},

        {"teacher",
         {[](ExperimentConfig& c, const std::string& v) {
              if (v == "lti") c.gen.teacher = TeacherKind::Lti;
              else if (v == "deep_ssm") c.gen.teacher = TeacherKind::DeepSsm;
              else throw Bad{"teacher must be lti or deep_ssm"};
          },
          [](const ExperimentConfig& c) {
              return std::string(c.gen.teacher == TeacherKind::Lti ? "lti" : "deep_ssm");
          }}},
        COUNT_KEY("teacher_n_x", c.gen.teacher_n_x),
        COUNT_KEY("teacher_n_layers", c.gen.teacher_n_layers),
        COUNT_KEY("teacher_d_model", c.gen.teacher_d_model),
        REAL_KEY("teacher_r_min", c.gen.teacher_r_min),
        REAL_KEY("teacher_r_max", c.gen.teacher_r_max),
        {"input",
         {[](ExperimentConfig& c, const std::string& v) {
              if (v == "white") c.gen.input = InputKind::WhiteNoise;
              else if (v == "multisine") c.gen.input = InputKind::Multisine;
              else throw Bad{"input must be white or multisine"};
          },
          [](const ExperimentConfig& c) {
              return std::string(c.gen.input == InputKind::WhiteNoise ? "white" : "multisine");
          }}},
        COUNT_KEY("multisine_min_bin", c.gen.multisine_min_bin),
        COUNT_KEY("multisine_max_bin", c.gen.multisine_max_bin),
        REAL_KEY("noise_std", c.gen.noise_std),
        COUNT_KEY("n_train_seqs", c.gen.n_train_seqs),
        COUNT_KEY("n_test_seqs", c.gen.n_test_seqs),
        COUNT_KEY("seq_len", c.gen.seq_len),

        {"sweep_methods",
         {[](ExperimentConfig& c, const std::string& v) {
              std::vector<ReductionMethod> methods;
              std::istringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                  try {
                      methods.push_back(parse_reduction_method(trim(item)));
                  } catch (const Error&) {
                      throw Bad{"unknown reduction method '" + trim(item) + "'"};
                  }
              }
              if (methods.empty()) throw Bad{"sweep_methods must list at least one method"};
              c.sweep.methods = methods;
          },
          [](const ExperimentConfig& c) {
              std::string out;
              for (auto m : c.sweep.methods) out += (out.empty() ? "" : ",") + std::string(to_string(m));
              return out;
          }}},
        REAL_KEY("fit_drop", c.sweep.fit_drop),
        COUNT_KEY("grid_size", c.sweep.grid_size),

        COUNT_KEY("gradcheck_length", c.gradcheck.length),
        COUNT_KEY("gradcheck_batch", c.gradcheck.batch),
        COUNT_KEY("gradcheck_n_skip", c.gradcheck.n_skip),
        REAL_KEY("gradcheck_reg_strength", c.gradcheck.reg_strength),
        REAL_KEY("gradcheck_eps", c.gradcheck.eps),
        REAL_KEY("gradcheck_tolerance", c.gradcheck.tolerance),
    };
    return table;
}

#undef COUNT_KEY
#undef REAL_KEY

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        const auto it = keys().find(key);
        if (it == keys().end()) fail("unknown key '" + key + "'");
        if (value.empty()) fail("missing value for '" + key + "'");
        try {
            it->second.set(c, value);
        } catch (const Bad& b) {
            fail(key + ": " + b.msg);
        }
    }
    try {
        c.model.validate();
        c.train.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, source + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string render_config(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [name, key] : keys()) out += name + " = " + key.get(c) + "\n";
    return out;
}

}  // namespace ssmred
