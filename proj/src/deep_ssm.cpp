#include "ssmred/deep_ssm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ssmred {

std::string_view to_string(NonlinearityKind k) { return k == NonlinearityKind::MLP ? "mlp" : "glu"; }
std::string_view to_string(NormKind k) { return k == NormKind::LayerNorm ? "layer_norm" : "none"; }

NonlinearityKind parse_nonlinearity(std::string_view s) {
    if (s == "mlp" || s == "MLP") return NonlinearityKind::MLP;
    if (s == "glu" || s == "GLU") return NonlinearityKind::GLU;
    throw Error(ErrorCode::ConfigError, "unknown nonlinearity '" + std::string(s) + "'");
}

NormKind parse_norm(std::string_view s) {
    if (s == "layer_norm" || s == "LayerNorm") return NormKind::LayerNorm;
    if (s == "none" || s == "None") return NormKind::None;
    throw Error(ErrorCode::ConfigError, "unknown norm '" + std::string(s) + "'");
}

void DeepSsmConfig::validate() const {
    if (n_in < 1 || n_out < 1 || d_model < 1 || n_x < 1 || n_layers < 1 ||
        (nonlinearity == NonlinearityKind::MLP && mlp_hidden < 1))
        throw Error(ErrorCode::ConfigError, "model dimensions must all be >= 1");
}

namespace {

void zero_lru(LruParams& p) {
    p.nu.setZero();
    p.phi.setZero();
    p.B_tilde.setZero();
    p.C.setZero();
    p.D.setZero();
}

RMatrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    RMatrix M(rows, cols);
    for (Eigen::Index j = 0; j < M.size(); ++j) M(j) = dist(rng);
    return M;
}

double inv_sqrt(std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

std::span<double> span_of(RMatrix& M) { return {M.data(), static_cast<std::size_t>(M.size())}; }
std::span<double> span_of(RVector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> span_of(CMatrix& M) {
    return {reinterpret_cast<double*>(M.data()), 2 * static_cast<std::size_t>(M.size())};
}

// Applies the static block column-wise and records pre-activations.
RMatrix apply_static(const StaticBlock& f, NonlinearityKind kind, const RMatrix& y, RMatrix& a,
                     RMatrix& g) {
    a = (f.W1 * y).colwise() + f.b1;
    if (kind == NonlinearityKind::MLP) {
        const RMatrix h = a.unaryExpr([](double v) { return gelu(v); });
        return (f.W2 * h).colwise() + f.b2;
    }
    g = (f.W2 * y).colwise() + f.b2;
    return a.cwiseProduct(g.unaryExpr([](double v) { return sigmoid(v); }));
}

RMatrix apply_norm(const LayerNormParams& norm, NormKind kind, const RMatrix& u, RMatrix* xhat_out,
                   RVector* inv_std_out) {
    if (kind == NormKind::None) return u;
    const auto d = static_cast<double>(u.rows());
    const RVector mean = u.colwise().sum().transpose() / d;
    RMatrix xhat = u.rowwise() - mean.transpose();
    const RVector var = xhat.colwise().squaredNorm().transpose() / d;
    const RVector inv_std = (var.array() + kLayerNormEps).rsqrt().matrix();
    xhat = xhat * inv_std.asDiagonal();
    RMatrix out = (norm.gain.asDiagonal() * xhat).colwise() + norm.bias;
    if (xhat_out) *xhat_out = std::move(xhat);
    if (inv_std_out) *inv_std_out = inv_std;
    return out;
}

// LRU over a whole sequence; returns y and stores the complex states in X.
RMatrix lru_forward(const LruParams& p, const RMatrix& u, CMatrix& X) {
    const CVector lambda = eigenvalues(p);
    X = input_matrix(p) * u.cast<cplx>();
    for (Eigen::Index k = 1; k < X.cols(); ++k) X.col(k) += lambda.cwiseProduct(X.col(k - 1));
    return p.C.real() * X.real() - p.C.imag() * X.imag() + p.D * u;
}

RMatrix layer_forward_tape(const Layer& layer, const DeepSsmConfig& cfg, const RMatrix& u,
                           LayerTape* tape) {
    RMatrix xhat;
    RVector inv_std;
    RMatrix un = apply_norm(layer.norm, cfg.norm, u, &xhat, &inv_std);
    CMatrix X;
    RMatrix y = lru_forward(layer.lru, un, X);
    RMatrix a, g;
    RMatrix s = u + apply_static(layer.f, cfg.nonlinearity, y, a, g);
    if (tape) {
        tape->u = u;
        tape->xhat = std::move(xhat);
        tape->inv_std = std::move(inv_std);
        tape->u_norm = std::move(un);
        tape->X = std::move(X);
        tape->y = std::move(y);
        tape->a = std::move(a);
        tape->g = std::move(g);
    }
    return s;
}

void lru_backward(const LruParams& p, const LayerTape& t, const RMatrix& y_bar, LruParams& grad,
                  RMatrix& un_bar) {
    const auto n = p.n_states();
    const auto T = t.X.cols();
    const CVector lambda = eigenvalues(p);
    const RVector gam = gamma_norm(p);
    const CMatrix B = gam.asDiagonal() * p.B_tilde;

    grad.D += y_bar * t.u_norm.transpose();
    un_bar = p.D.transpose() * y_bar;

    const CMatrix yb = y_bar.cast<cplx>();
    grad.C += yb * t.X.adjoint();
    CMatrix S = p.C.adjoint() * yb;  // direct state adjoints, then accumulated
    const CVector lc = lambda.conjugate();
    for (Eigen::Index k = T - 2; k >= 0; --k) S.col(k) += lc.cwiseProduct(S.col(k + 1));

    CVector lambda_bar = CVector::Zero(n);
    for (Eigen::Index k = 1; k < T; ++k) lambda_bar += S.col(k).cwiseProduct(t.X.col(k - 1).conjugate());

    const CMatrix B_bar = S * t.u_norm.transpose().cast<cplx>();
    un_bar += (B.adjoint() * S).real();
    grad.B_tilde += gam.asDiagonal() * B_bar;

    for (Eigen::Index j = 0; j < n; ++j) {
        const double en = std::exp(p.nu(j));
        const double ep = std::exp(p.phi(j));
        const cplx lb = std::conj(lambda_bar(j));
        double gamma_bar = 0.0;
        for (Eigen::Index c = 0; c < B_bar.cols(); ++c)
            gamma_bar += (std::conj(B_bar(j, c)) * p.B_tilde(j, c)).real();
        const double dgamma_dnu = gam(j) > 0.0 ? en * std::exp(-2.0 * en) / gam(j) : 0.0;
        grad.nu(j) += (lb * (-en * lambda(j))).real() + gamma_bar * dgamma_dnu;
        grad.phi(j) += (lb * (cplx(0.0, ep) * lambda(j))).real();
    }
}

RMatrix layer_backward(const Layer& layer, const DeepSsmConfig& cfg, const LayerTape& t,
                       const RMatrix& s_bar, Layer& grad) {
    RMatrix u_bar = s_bar;  // skip connection
    RMatrix y_bar;
    const StaticBlock& f = layer.f;
    if (cfg.nonlinearity == NonlinearityKind::MLP) {
        const RMatrix h = t.a.unaryExpr([](double v) { return gelu(v); });
        grad.f.W2 += s_bar * h.transpose();
        grad.f.b2 += s_bar.rowwise().sum();
        const RMatrix a_bar =
            (f.W2.transpose() * s_bar).cwiseProduct(t.a.unaryExpr([](double v) { return gelu_derivative(v); }));
        grad.f.W1 += a_bar * t.y.transpose();
        grad.f.b1 += a_bar.rowwise().sum();
        y_bar = f.W1.transpose() * a_bar;
    } else {
        const RMatrix sg = t.g.unaryExpr([](double v) { return sigmoid(v); });
        const RMatrix a_bar = s_bar.cwiseProduct(sg);
        const RMatrix g_bar =
            s_bar.cwiseProduct(t.a).cwiseProduct(sg).cwiseProduct((1.0 - sg.array()).matrix());
        grad.f.W1 += a_bar * t.y.transpose();
        grad.f.b1 += a_bar.rowwise().sum();
        grad.f.W2 += g_bar * t.y.transpose();
        grad.f.b2 += g_bar.rowwise().sum();
        y_bar = f.W1.transpose() * a_bar + f.W2.transpose() * g_bar;
    }

    RMatrix un_bar;
    lru_backward(layer.lru, t, y_bar, grad.lru, un_bar);

    if (cfg.norm == NormKind::None) {
        u_bar += un_bar;
        return u_bar;
    }
    grad.norm.gain += un_bar.cwiseProduct(t.xhat).rowwise().sum();
    grad.norm.bias += un_bar.rowwise().sum();
    const RMatrix xhat_bar = layer.norm.gain.asDiagonal() * un_bar;
    const auto d = static_cast<double>(xhat_bar.rows());
    const RVector mean_bar = xhat_bar.colwise().sum().transpose() / d;
    const RVector mean_bar_xhat = xhat_bar.cwiseProduct(t.xhat).colwise().sum().transpose() / d;
    RMatrix dx = xhat_bar.rowwise() - mean_bar.transpose();
    dx -= t.xhat * mean_bar_xhat.asDiagonal();
    u_bar += dx * t.inv_std.asDiagonal();
    return u_bar;
}

}  // namespace

DeepSsm DeepSsm::zeros_like() const {
    DeepSsm z = *this;
    z.W_in.setZero();
    z.b_in.setZero();
    z.W_out.setZero();
    z.b_out.setZero();
    for (auto& l : z.layers) {
        l.norm.gain.setZero();
        l.norm.bias.setZero();
        zero_lru(l.lru);
        l.f.W1.setZero();
        l.f.b1.setZero();
        l.f.W2.setZero();
        l.f.b2.setZero();
    }
    return z;
}

DeepSsm init_deep_ssm(const DeepSsmConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(cfg.d_model);
    DeepSsm m;
    m.config = cfg;
    m.W_in = gaussian(d, static_cast<Eigen::Index>(cfg.n_in), inv_sqrt(cfg.n_in), rng);
    m.b_in = RVector::Zero(d);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        Layer layer;
        if (cfg.norm == NormKind::LayerNorm) {
            layer.norm.gain = RVector::Ones(d);
            layer.norm.bias = RVector::Zero(d);
        }
        layer.lru = init_lru(d, d, static_cast<Eigen::Index>(cfg.n_x), cfg.lru_init, rng);
        if (cfg.nonlinearity == NonlinearityKind::MLP) {
            const auto h = static_cast<Eigen::Index>(cfg.mlp_hidden);
            layer.f.W1 = gaussian(h, d, inv_sqrt(cfg.d_model), rng);
            layer.f.b1 = RVector::Zero(h);
            layer.f.W2 = gaussian(d, h, inv_sqrt(cfg.mlp_hidden), rng);
            layer.f.b2 = RVector::Zero(d);
        } else {
            layer.f.W1 = gaussian(d, d, inv_sqrt(cfg.d_model), rng);
            layer.f.b1 = RVector::Zero(d);
            layer.f.W2 = gaussian(d, d, inv_sqrt(cfg.d_model), rng);
            layer.f.b2 = RVector::Zero(d);
        }
        m.layers.push_back(std::move(layer));
    }
    m.W_out = gaussian(static_cast<Eigen::Index>(cfg.n_out), d, inv_sqrt(cfg.d_model), rng);
    m.b_out = RVector::Zero(static_cast<Eigen::Index>(cfg.n_out));
    return m;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

RVector layer_norm(const RVector& v, const RVector& gain, const RVector& bias) {
    LayerNormParams p{gain, bias};
    return apply_norm(p, NormKind::LayerNorm, RMatrix(v), nullptr, nullptr).col(0);
}

RVector mlp_gelu(const StaticBlock& f, const RVector& v) {
    RMatrix a, g;
    return apply_static(f, NonlinearityKind::MLP, RMatrix(v), a, g).col(0);
}

RVector glu(const StaticBlock& f, const RVector& v) {
    RMatrix a, g;
    return apply_static(f, NonlinearityKind::GLU, RMatrix(v), a, g).col(0);
}

RMatrix layer_forward(const Layer& layer, const DeepSsmConfig& cfg, const RMatrix& u) {
    return layer_forward_tape(layer, cfg, u, nullptr);
}

RMatrix forward(const DeepSsm& m, const RMatrix& u) {
    if (u.rows() != m.W_in.cols())
        throw Error(ErrorCode::LengthMismatch, "input rows must equal n_in");
    RMatrix s = (m.W_in * u).colwise() + m.b_in;
    for (const auto& layer : m.layers) s = layer_forward_tape(layer, m.config, s, nullptr);
    return (m.W_out * s).colwise() + m.b_out;
}

RMatrix forward(const DeepSsm& m, const RMatrix& u, ForwardTape& tape) {
    if (u.rows() != m.W_in.cols())
        throw Error(ErrorCode::LengthMismatch, "input rows must equal n_in");
    tape.u = u;
    tape.layers.resize(m.layers.size());
    RMatrix s = (m.W_in * u).colwise() + m.b_in;
    for (std::size_t l = 0; l < m.layers.size(); ++l)
        s = layer_forward_tape(m.layers[l], m.config, s, &tape.layers[l]);
    tape.s_last = s;
    return (m.W_out * s).colwise() + m.b_out;
}

void backward(const DeepSsm& m, const ForwardTape& tape, const RMatrix& y_bar, DeepSsm& grad) {
    grad.W_out += y_bar * tape.s_last.transpose();
    grad.b_out += y_bar.rowwise().sum();
    RMatrix s_bar = m.W_out.transpose() * y_bar;
    for (std::size_t l = m.layers.size(); l-- > 0;)
        s_bar = layer_backward(m.layers[l], m.config, tape.layers[l], s_bar, grad.layers[l]);
    grad.W_in += s_bar * tape.u.transpose();
    grad.b_in += s_bar.rowwise().sum();
}

std::vector<ParamGroup> parameter_groups(DeepSsm& m) {
    std::vector<ParamGroup> groups;
    groups.push_back({"input_proj.weight", span_of(m.W_in), true});
    groups.push_back({"input_proj.bias", span_of(m.b_in), true});
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Layer& layer = m.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        groups.push_back({p + "norm.gain", span_of(layer.norm.gain), false});
        groups.push_back({p + "norm.bias", span_of(layer.norm.bias), false});
        groups.push_back({p + "lru.nu", span_of(layer.lru.nu), false});
        groups.push_back({p + "lru.phi", span_of(layer.lru.phi), false});
        groups.push_back({p + "lru.B_tilde", span_of(layer.lru.B_tilde), true});
        groups.push_back({p + "lru.C", span_of(layer.lru.C), true});
        groups.push_back({p + "lru.D", span_of(layer.lru.D), true});
        groups.push_back({p + "f.W1", span_of(layer.f.W1), true});
        groups.push_back({p + "f.b1", span_of(layer.f.b1), true});
        groups.push_back({p + "f.W2", span_of(layer.f.W2), true});
        groups.push_back({p + "f.b2", span_of(layer.f.b2), true});
    }
    groups.push_back({"output_proj.weight", span_of(m.W_out), true});
    groups.push_back({"output_proj.bias", span_of(m.b_out), true});
    return groups;
}

std::size_t parameter_count(const DeepSsm& m) {
    std::size_t n = 0;
    for (const auto& g : parameter_groups(const_cast<DeepSsm&>(m))) n += g.values.size();
    return n;
}

std::vector<double> flatten(const DeepSsm& m) {
    std::vector<double> out;
    out.reserve(parameter_count(m));
    for (const auto& g : parameter_groups(const_cast<DeepSsm&>(m)))
        out.insert(out.end(), g.values.begin(), g.values.end());
    return out;
}

void unflatten(DeepSsm& m, std::span<const double> values) {
    std::size_t offset = 0;
    for (auto& g : parameter_groups(m)) {
        if (offset + g.values.size() > values.size())
            throw Error(ErrorCode::InvalidArgument, "parameter vector too short");
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), g.values.size(),
                    g.values.begin());
        offset += g.values.size();
    }
    if (offset != values.size()) throw Error(ErrorCode::InvalidArgument, "parameter vector too long");
}

}  // namespace ssmred
