#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "diamond/vec.hpp"

namespace diamond {

// Isotropic Gaussian mixture standing in for the data distribution. A
// component with std 0 is a point mass; fields built on such a spec are
// singular at t=0 (flow) and reject that query.
struct MixtureSpec {
    Vec weights;                // sum to 1
    std::vector<Vec> means;     // K vectors of dimension D
    Vec stds;                   // K non-negative scalars; 0 marks a point mass

    std::size_t components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : means[0].size(); }
    bool has_point_mass() const;
    void validate() const;

    std::string to_json() const;
    static MixtureSpec from_json(const std::string& text);
};

// Evaluatable vector field over latents: velocity v(x,t) for the flow family,
// noise prediction eps(x,sigma) for the diffusion family. `s` is the
// time-like scalar (t or sigma). vjp returns cot^T * (d field / d x), used by
// the exact gradient mode.
class Field {
public:
    virtual ~Field() = default;
    virtual std::size_t dim() const = 0;
    virtual Vec eval(const Vec& x, double s) const = 0;
    virtual Vec vjp(const Vec& x, double s, const Vec& cot) const = 0;
};

// E[x1 - x0 | x_t = x] under x_t = (1-t)x0 + t*x1, x0 ~ mixture, x1 ~ N(0,I)
Vec mixture_velocity(const Vec& x, double t, const MixtureSpec& spec);

// (x - E[x0 | x0 + sigma*n = x]) / sigma
Vec mixture_denoiser(const Vec& x, double sigma, const MixtureSpec& spec);

class MixtureVelocityField final : public Field {
public:
    explicit MixtureVelocityField(MixtureSpec spec);
    std::size_t dim() const override { return spec_.dim(); }
    Vec eval(const Vec& x, double t) const override { return mixture_velocity(x, t, spec_); }
    Vec vjp(const Vec& x, double t, const Vec& cot) const override;
    const MixtureSpec& spec() const { return spec_; }

private:
    MixtureSpec spec_;
};

class MixtureNoiseField final : public Field {
public:
    explicit MixtureNoiseField(MixtureSpec spec);
    std::size_t dim() const override { return spec_.dim(); }
    Vec eval(const Vec& x, double sigma) const override { return mixture_denoiser(x, sigma, spec_); }
    Vec vjp(const Vec& x, double sigma, const Vec& cot) const override;
    const MixtureSpec& spec() const { return spec_; }

private:
    MixtureSpec spec_;
};

struct DecoderSpec {
    enum class Kind { identity, linear };
    Kind kind = Kind::identity;
    std::size_t h = 0;
    std::size_t w = 0;
    Vec matrix;  // (h*w) x D, row-major; linear kind only

    void validate(std::size_t d) const;

    std::string to_json() const;
    static DecoderSpec from_json(const std::string& text);
};

Grid decode(const Vec& x0_hat, const DecoderSpec& spec);

// A^T * cot, the decoder's transpose action for the gradient chain
Vec decode_transpose(const Grid& cot, const DecoderSpec& spec, std::size_t latent_dim);

// Small tanh MLP on (x, t), trained to regress the conditional flow-matching
// target x1 - x0. Smooth activations keep the exact gradient mode defined.
class MlpField final : public Field {
public:
    struct Layer {
        std::size_t in = 0, out = 0;
        Vec w;  // out x in, row-major
        Vec b;
    };

    MlpField() = default;
    MlpField(std::size_t input_dim, const std::vector<std::size_t>& widths, std::uint64_t seed);

    std::size_t dim() const override { return input_dim_; }
    Vec eval(const Vec& x, double t) const override;
    Vec vjp(const Vec& x, double t, const Vec& cot) const override;

    std::string to_json() const;
    static MlpField from_json(const std::string& text);

    const std::vector<Layer>& layers() const { return layers_; }

private:
    friend struct MlpTrainer;
    std::size_t input_dim_ = 0;
    std::vector<Layer> layers_;
};

struct TrainReport {
    MlpField field;
    Vec step_losses;
    double final_loss = 0.0;
};

TrainReport train_mlp_velocity(const MixtureSpec& spec, const std::vector<std::size_t>& widths,
                               std::size_t steps, double lr, std::uint64_t seed);

}  // namespace diamond
