#include "diamond/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diamond/rng.hpp"
#include "json.hpp"

namespace diamond {

using nlohmann::json;

bool MixtureSpec::has_point_mass() const {
    return std::any_of(stds.begin(), stds.end(), [](double s) { return s == 0.0; });
}

void MixtureSpec::validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != stds.size()) {
        throw std::invalid_argument("MixtureSpec: weights/means/stds must be non-empty and parallel");
    }
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("MixtureSpec: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12) throw std::invalid_argument("MixtureSpec: weights must sum to 1");
    const std::size_t d = means[0].size();
    if (d == 0) throw std::invalid_argument("MixtureSpec: zero-dimensional mean");
    for (const Vec& m : means) {
        if (m.size() != d) throw std::invalid_argument("MixtureSpec: mean dimension mismatch");
        if (!all_finite(m)) throw std::invalid_argument("MixtureSpec: non-finite mean");
    }
    for (double s : stds) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("MixtureSpec: std must be finite and >= 0");
    }
}

namespace {

// Responsibilities of x under K isotropic Gaussians N(center_k, var_k I),
// computed in log space with max subtraction.
Vec responsibilities(const Vec& x, const MixtureSpec& spec, const std::vector<Vec>& centers,
                     const Vec& vars) {
    const std::size_t k = spec.components();
    const double d = static_cast<double>(spec.dim());
    Vec logp(k);
    for (std::size_t c = 0; c < k; ++c) {
        double q = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double m = x[i] - centers[c][i];
            q += m * m;
        }
        const double lw = spec.weights[c] > 0.0 ? std::log(spec.weights[c])
                                                : -std::numeric_limits<double>::infinity();
        logp[c] = lw - 0.5 * d * std::log(vars[c]) - 0.5 * q / vars[c];
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    Vec rho(k);
    for (std::size_t c = 0; c < k; ++c) {
        rho[c] = std::exp(logp[c] - mx);
        z += rho[c];
    }
    for (double& r : rho) r /= z;
    return rho;
}

void check_flow_query(double t, const MixtureSpec& spec) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("mixture_velocity: time outside [0,1]");
    if (t == 0.0 && spec.has_point_mass()) {
        throw std::domain_error("mixture_velocity: t=0 query on a point-mass component is singular");
    }
}

}  // namespace

Vec mixture_velocity(const Vec& x, double t, const MixtureSpec& spec) {
    spec.validate();
    check_flow_query(t, spec);
    if (x.size() != spec.dim()) throw std::invalid_argument("mixture_velocity: dimension mismatch");

    const std::size_t k = spec.components();
    std::vector<Vec> centers(k);
    Vec vars(k), coef(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double s = spec.stds[c];
        vars[c] = (1.0 - t) * (1.0 - t) * s * s + t * t;
        coef[c] = (t - (1.0 - t) * s * s) / vars[c];
        centers[c].resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) centers[c][i] = (1.0 - t) * spec.means[c][i];
    }
    const Vec rho = responsibilities(x, spec, centers, vars);

    Vec v(x.size(), 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double vk = coef[c] * (x[i] - centers[c][i]) - spec.means[c][i];
            v[i] += rho[c] * vk;
        }
    }
    return v;
}

Vec mixture_denoiser(const Vec& x, double sigma, const MixtureSpec& spec) {
    spec.validate();
    if (!(sigma > 0.0)) throw std::domain_error("mixture_denoiser: sigma must be positive");
    if (x.size() != spec.dim()) throw std::invalid_argument("mixture_denoiser: dimension mismatch");

    const std::size_t k = spec.components();
    Vec vars(k);
    for (std::size_t c = 0; c < k; ++c) vars[c] = spec.stds[c] * spec.stds[c] + sigma * sigma;
    const Vec rho = responsibilities(x, spec, spec.means, vars);

    // posterior mean of x0, responsibility-weighted over components
    Vec x0(x.size(), 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        const double shrink = spec.stds[c] * spec.stds[c] / vars[c];
        for (std::size_t i = 0; i < x.size(); ++i) {
            x0[i] += rho[c] * (spec.means[c][i] + shrink * (x[i] - spec.means[c][i]));
        }
    }
    Vec eps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) eps[i] = (x[i] - x0[i]) / sigma;
    return eps;
}

MixtureVelocityField::MixtureVelocityField(MixtureSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

Vec MixtureVelocityField::vjp(const Vec& x, double t, const Vec& cot) const {
    check_flow_query(t, spec_);
    check_same_dim(x, cot, "MixtureVelocityField::vjp");
    const std::size_t k = spec_.components();
    const std::size_t d = x.size();

    std::vector<Vec> centers(k);
    Vec vars(k), coef(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double s = spec_.stds[c];
        vars[c] = (1.0 - t) * (1.0 - t) * s * s + t * t;
        coef[c] = (t - (1.0 - t) * s * s) / vars[c];
        centers[c].resize(d);
        for (std::size_t i = 0; i < d; ++i) centers[c][i] = (1.0 - t) * spec_.means[c][i];
    }
    const Vec rho = responsibilities(x, spec_, centers, vars);

    // b_k = grad log N_k, bbar = sum rho_k b_k
    std::vector<Vec> b(k, Vec(d));
    Vec bbar(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < d; ++i) {
            b[c][i] = -(x[i] - centers[c][i]) / vars[c];
            bbar[i] += rho[c] * b[c][i];
        }
    }

    // dv/dx = sum_k rho_k c_k I + sum_k v_k (grad rho_k)^T, grad rho_k = rho_k (b_k - bbar)
    Vec out(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double vdotcot = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double vk = coef[c] * (x[i] - centers[c][i]) - spec_.means[c][i];
            vdotcot += vk * cot[i];
        }
        for (std::size_t i = 0; i < d; ++i) {
            out[i] += rho[c] * coef[c] * cot[i] + rho[c] * (b[c][i] - bbar[i]) * vdotcot;
        }
    }
    return out;
}

MixtureNoiseField::MixtureNoiseField(MixtureSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

Vec MixtureNoiseField::vjp(const Vec& x, double sigma, const Vec& cot) const {
    if (!(sigma > 0.0)) throw std::domain_error("MixtureNoiseField::vjp: sigma must be positive");
    check_same_dim(x, cot, "MixtureNoiseField::vjp");
    const std::size_t k = spec_.components();
    const std::size_t d = x.size();

    Vec vars(k), shrink(k);
    for (std::size_t c = 0; c < k; ++c) {
        vars[c] = spec_.stds[c] * spec_.stds[c] + sigma * sigma;
        shrink[c] = spec_.stds[c] * spec_.stds[c] / vars[c];
    }
    const Vec rho = responsibilities(x, spec_, spec_.means, vars);

    std::vector<Vec> b(k, Vec(d));
    Vec bbar(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < d; ++i) {
            b[c][i] = -(x[i] - spec_.means[c][i]) / vars[c];
            bbar[i] += rho[c] * b[c][i];
        }
    }

    // eps = (x - x0bar)/sigma, d x0bar/dx = sum rho_k shrink_k I + sum p_k (grad rho_k)^T
    Vec x0bar_vjp(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double pdotcot = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double pk = spec_.means[c][i] + shrink[c] * (x[i] - spec_.means[c][i]);
            pdotcot += pk * cot[i];
        }
        for (std::size_t i = 0; i < d; ++i) {
            x0bar_vjp[i] += rho[c] * shrink[c] * cot[i] + rho[c] * (b[c][i] - bbar[i]) * pdotcot;
        }
    }
    Vec out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = (cot[i] - x0bar_vjp[i]) / sigma;
    return out;
}

void DecoderSpec::validate(std::size_t d) const {
    if (h == 0 || w == 0) throw std::invalid_argument("DecoderSpec: grid shape must be positive");
    if (kind == Kind::identity) {
        if (h * w != d) throw std::invalid_argument("DecoderSpec: identity decoder requires D == H*W");
    } else {
        if (matrix.size() != h * w * d) throw std::invalid_argument("DecoderSpec: matrix must be (H*W) x D");
        if (!all_finite(matrix)) throw std::invalid_argument("DecoderSpec: non-finite matrix entry");
    }
}

Grid decode(const Vec& x0_hat, const DecoderSpec& spec) {
    spec.validate(x0_hat.size());
    Grid out(spec.h, spec.w);
    if (spec.kind == DecoderSpec::Kind::identity) {
        out.v = x0_hat;
        return out;
    }
    const std::size_t d = x0_hat.size();
    for (std::size_t r = 0; r < out.size(); ++r) {
        double acc = 0.0;
        const double* row = spec.matrix.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) acc += row[c] * x0_hat[c];
        out.v[r] = acc;
    }
    return out;
}

Vec decode_transpose(const Grid& cot, const DecoderSpec& spec, std::size_t latent_dim) {
    spec.validate(latent_dim);
    if (cot.rows != spec.h || cot.cols != spec.w) {
        throw std::invalid_argument("decode_transpose: cotangent shape mismatch");
    }
    if (spec.kind == DecoderSpec::Kind::identity) return cot.v;
    Vec out(latent_dim, 0.0);
    for (std::size_t r = 0; r < cot.size(); ++r) {
        const double* row = spec.matrix.data() + r * latent_dim;
        for (std::size_t c = 0; c < latent_dim; ++c) out[c] += row[c] * cot.v[r];
    }
    return out;
}

// ---------------------------------------------------------------------------
// MLP velocity field
// ---------------------------------------------------------------------------

MlpField::MlpField(std::size_t input_dim, const std::vector<std::size_t>& widths, std::uint64_t seed)
    : input_dim_(input_dim) {
    if (input_dim == 0) throw std::invalid_argument("MlpField: zero input dimension");
    CounterRng rng = CounterRng::keyed("mlp-init", seed);
    std::size_t in = input_dim + 1;  // (x, t)
    std::vector<std::size_t> sizes = widths;
    sizes.push_back(input_dim);  // output layer
    for (std::size_t li = 0; li < sizes.size(); ++li) {
        Layer l;
        l.in = in;
        l.out = sizes[li];
        l.w.resize(l.out * l.in);
        l.b.assign(l.out, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (double& wv : l.w) wv = scale * rng.next_gaussian();
        layers_.push_back(std::move(l));
        in = sizes[li];
    }
}

namespace {

// forward pass keeping post-activation values per layer; last layer is linear
std::vector<Vec> mlp_forward(const std::vector<MlpField::Layer>& layers, const Vec& input) {
    std::vector<Vec> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(input);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        Vec z(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            double acc = l.b[o];
            const double* row = l.w.data() + o * l.in;
            for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * acts.back()[i];
            z[o] = acc;
        }
        if (li + 1 < layers.size()) {
            for (double& v : z) v = std::tanh(v);
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace

Vec MlpField::eval(const Vec& x, double t) const {
    if (x.size() != input_dim_) throw std::invalid_argument("MlpField::eval: dimension mismatch");
    Vec input(x);
    input.push_back(t);
    return mlp_forward(layers_, input).back();
}

Vec MlpField::vjp(const Vec& x, double t, const Vec& cot) const {
    if (x.size() != input_dim_ || cot.size() != input_dim_) {
        throw std::invalid_argument("MlpField::vjp: dimension mismatch");
    }
    Vec input(x);
    input.push_back(t);
    const std::vector<Vec> acts = mlp_forward(layers_, input);

    Vec grad = cot;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& l = layers_[li];
        // through the activation (hidden layers only)
        if (li + 1 < layers_.size()) {
            for (std::size_t o = 0; o < l.out; ++o) {
                const double a = acts[li + 1][o];
                grad[o] *= (1.0 - a * a);
            }
        }
        Vec prev(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double* row = l.w.data() + o * l.in;
            for (std::size_t i = 0; i < l.in; ++i) prev[i] += row[i] * grad[o];
        }
        grad = std::move(prev);
    }
    grad.pop_back();  // drop the t slot
    return grad;
}

struct MlpTrainer {
    MlpField& net;
    double lr;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::vector<Vec> mw, vw, mb, vb;
    std::size_t t_step = 0;

    explicit MlpTrainer(MlpField& n, double lr_) : net(n), lr(lr_) {
        for (const auto& l : net.layers_) {
            mw.emplace_back(l.w.size(), 0.0);
            vw.emplace_back(l.w.size(), 0.0);
            mb.emplace_back(l.b.size(), 0.0);
            vb.emplace_back(l.b.size(), 0.0);
        }
    }

    void adam(Vec& param, Vec& m, Vec& v, const Vec& g) {
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_step));
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
        }
    }

    // one minibatch of the conditional flow-matching regression; returns loss
    double step(const std::vector<Vec>& inputs, const std::vector<Vec>& targets) {
        ++t_step;
        auto& layers = net.layers_;
        std::vector<Vec> gw(layers.size()), gb(layers.size());
        for (std::size_t li = 0; li < layers.size(); ++li) {
            gw[li].assign(layers[li].w.size(), 0.0);
            gb[li].assign(layers[li].b.size(), 0.0);
        }

        double loss = 0.0;
        const double bsz = static_cast<double>(inputs.size());
        for (std::size_t s = 0; s < inputs.size(); ++s) {
            const std::vector<Vec> acts = mlp_forward(layers, inputs[s]);
            const Vec& out = acts.back();
            Vec grad(out.size());
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double r = out[i] - targets[s][i];
                loss += r * r / (bsz * static_cast<double>(out.size()));
                grad[i] = 2.0 * r / (bsz * static_cast<double>(out.size()));
            }
            for (std::size_t li = layers.size(); li-- > 0;) {
                const auto& l = layers[li];
                if (li + 1 < layers.size()) {
                    for (std::size_t o = 0; o < l.out; ++o) {
                        const double a = acts[li + 1][o];
                        grad[o] *= (1.0 - a * a);
                    }
                }
                for (std::size_t o = 0; o < l.out; ++o) {
                    for (std::size_t i = 0; i < l.in; ++i) gw[li][o * l.in + i] += grad[o] * acts[li][i];
                    gb[li][o] += grad[o];
                }
                Vec prev(l.in, 0.0);
                for (std::size_t o = 0; o < l.out; ++o) {
                    const double* row = l.w.data() + o * l.in;
                    for (std::size_t i = 0; i < l.in; ++i) prev[i] += row[i] * grad[o];
                }
                grad = std::move(prev);
            }
        }
        for (std::size_t li = 0; li < layers.size(); ++li) {
            adam(layers[li].w, mw[li], vw[li], gw[li]);
            adam(layers[li].b, mb[li], vb[li], gb[li]);
        }
        return loss;
    }
};

TrainReport train_mlp_velocity(const MixtureSpec& spec, const std::vector<std::size_t>& widths,
                               std::size_t steps, double lr, std::uint64_t seed) {
    spec.validate();
    if (steps == 0) throw std::invalid_argument("train_mlp_velocity: steps must be >= 1");

    TrainReport rep;
    rep.field = MlpField(spec.dim(), widths, seed);
    MlpTrainer trainer(rep.field, lr);
    CounterRng rng = CounterRng::keyed("mlp-train", seed);

    const std::size_t batch = 128;
    const std::size_t d = spec.dim();
    rep.step_losses.reserve(steps);

    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<Vec> inputs(batch), targets(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            // x0 from the mixture
            double u = rng.next_unit(), acc = 0.0;
            std::size_t comp = spec.components() - 1;
            for (std::size_t c = 0; c < spec.components(); ++c) {
                acc += spec.weights[c];
                if (u <= acc) { comp = c; break; }
            }
            Vec x0(d), x1(d);
            for (std::size_t i = 0; i < d; ++i) {
                x0[i] = spec.means[comp][i] + spec.stds[comp] * rng.next_gaussian();
                x1[i] = rng.next_gaussian();
            }
            const double t = rng.next_unit();  // (0,1]
            Vec in(d + 1);
            Vec tgt(d);
            for (std::size_t i = 0; i < d; ++i) {
                in[i] = (1.0 - t) * x0[i] + t * x1[i];
                tgt[i] = x1[i] - x0[i];
            }
            in[d] = t;
            inputs[b] = std::move(in);
            targets[b] = std::move(tgt);
        }
        const double loss = trainer.step(inputs, targets);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_mlp_velocity: loss diverged at step " + std::to_string(s));
        }
        rep.step_losses.push_back(loss);
    }
    rep.final_loss = rep.step_losses.back();
    return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

std::string MixtureSpec::to_json() const {
    json j;
    j["weights"] = weights;
    j["means"] = means;
    j["stds"] = stds;
    return j.dump(2);
}

MixtureSpec MixtureSpec::from_json(const std::string& text) {
    const json j = json::parse(text);
    MixtureSpec s;
    s.weights = j.at("weights").get<Vec>();
    s.means = j.at("means").get<std::vector<Vec>>();
    s.stds = j.at("stds").get<Vec>();
    s.validate();
    return s;
}

std::string DecoderSpec::to_json() const {
    json j;
    j["kind"] = kind == Kind::identity ? "identity" : "linear";
    j["h"] = h;
    j["w"] = w;
    if (kind == Kind::linear) j["matrix"] = matrix;
    return j.dump(2);
}

DecoderSpec DecoderSpec::from_json(const std::string& text) {
    const json j = json::parse(text);
    DecoderSpec s;
    const std::string k = j.at("kind").get<std::string>();
    if (k == "identity") s.kind = Kind::identity;
    else if (k == "linear") s.kind = Kind::linear;
    else throw std::invalid_argument("DecoderSpec: unknown kind " + k);
    s.h = j.at("h").get<std::size_t>();
    s.w = j.at("w").get<std::size_t>();
    if (s.kind == Kind::linear) s.matrix = j.at("matrix").get<Vec>();
    return s;
}

std::string MlpField::to_json() const {
    json j;
    j["input_dim"] = input_dim_;
    json layers = json::array();
    for (const auto& l : layers_) {
        layers.push_back({{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}});
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

MlpField MlpField::from_json(const std::string& text) {
    const json j = json::parse(text);
    MlpField f;
    f.input_dim_ = j.at("input_dim").get<std::size_t>();
    for (const auto& lj : j.at("layers")) {
        Layer l;
        l.in = lj.at("in").get<std::size_t>();
        l.out = lj.at("out").get<std::size_t>();
        l.w = lj.at("w").get<Vec>();
        l.b = lj.at("b").get<Vec>();
        if (l.w.size() != l.in * l.out || l.b.size() != l.out) {
            throw std::invalid_argument("MlpField: inconsistent layer shapes");
        }
        f.layers_.push_back(std::move(l));
    }
    if (f.layers_.empty()) throw std::invalid_argument("MlpField: no layers");
    return f;
}

}  // namespace diamond
