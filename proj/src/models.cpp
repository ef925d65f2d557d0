#include "hetvar/models.hpp"

#include <cmath>
#include <stdexcept>

namespace hetvar {

namespace {

constexpr double SQRT3 = 1.7320508075688772;
constexpr double PI = 3.14159265358979323846;

void check_dim(const ModelSpec& spec, std::span<const double> x) {
    if (x.size() != spec.dim())
        throw std::invalid_argument("ModelSpec: feature vector has dimension " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(spec.dim()));
}

}  // namespace

std::size_t ModelSpec::dim() const {
    switch (id) {
        case ModelId::M1a025:
        case ModelId::M1a1: return 3;
        case ModelId::M2: return 10;
        case ModelId::M3: return 50;
        case ModelId::M4: return 2;
        case ModelId::M5: return 3;
    }
    throw std::logic_error("ModelSpec: bad id");
}

NoiseKind ModelSpec::noise_kind() const {
    switch (id) {
        case ModelId::M1a025:
        case ModelId::M1a1:
        case ModelId::M2:
        case ModelId::M3: return NoiseKind::Gaussian;
        case ModelId::M4:
        case ModelId::M5: return NoiseKind::UniformSqrt3;
    }
    throw std::logic_error("ModelSpec: bad id");
}

double ModelSpec::scale_a() const {
    if (id == ModelId::M1a025) return 0.25;
    return 1.0;
}

std::size_t ModelSpec::sparsity() const { return id == ModelId::M3 ? 14 : 0; }

double ModelSpec::f_star(std::span<const double> x) const {
    check_dim(*this, x);
    switch (id) {
        case ModelId::M1a025:
        case ModelId::M1a1:
            return 0.1 * std::cos(x[0]) + std::exp(-x[2] * x[2]);
        case ModelId::M2:
            return 0.1 + std::exp(-x[0] * x[0]) +
                   0.2 * std::sin(x[1] + x[2] + x[3] + 0.1 * x[4] * x[4]);
        case ModelId::M3: {
            // beta_i = 1{i <= 14}
            double s = 0.0;
            for (std::size_t i = 0; i < sparsity(); ++i) s += x[i];
            return s;
        }
        case ModelId::M4:
            return x[0] + std::exp(-x[1] * x[1]);
        case ModelId::M5:
            return x[0] + x[1] + 0.5 * std::cos(x[2]);
    }
    throw std::logic_error("ModelSpec: bad id");
}

double ModelSpec::sigma2_star(std::span<const double> x) const {
    check_dim(*this, x);
    switch (id) {
        case ModelId::M1a025:
        case ModelId::M1a1: {
            // Sum of three Gaussian bumps (the displayed formula drops a
            // closing parenthesis; the sum reading matches the model's
            // described histogram and its mean noise level).
            const double b1 = std::exp(-7.0 * (x[0] - 0.2) * (x[0] - 0.2));
            const double b2 = std::exp(-10.0 * (x[1] - 0.5) * (x[1] - 0.5));
            const double b3 = std::exp(-50.0 * (x[2] - 0.9) * (x[2] - 0.9));
            return scale_a() * (0.1 + b1 + b2 + b3);
        }
        case ModelId::M2: {
            const double spike = x[7] + x[8] + x[9] - 0.5;
            const double inner = 0.5 + std::sqrt(x[0] * (1.0 - x[1])) + 0.8 * x[2] * x[3] +
                                 x[4] * x[5] * x[6] * x[6] +
                                 0.9 * std::exp(-500.0 * spike * spike);
            return 0.5 * inner * inner;
        }
        case ModelId::M3: {
            const double inner = 0.3 +
                                 std::sqrt(x[0] * (1.0 - x[0])) * std::sin(2.1 * PI / (x[1] + 0.05)) +
                                 0.5 * x[2] + x[3];
            return 0.5 * inner * inner;
        }
        case ModelId::M4:
            return 0.01 + x[0] * std::exp(-(x[1] - 0.9) * (x[1] - 0.9));
        case ModelId::M5: {
            const double inner = 0.3 +
                                 std::sqrt(x[0] * (1.0 - x[0])) * std::sin(2.1 * PI / (x[1] + 0.05)) +
                                 x[2];
            return inner * inner;
        }
    }
    throw std::logic_error("ModelSpec: bad id");
}

std::string ModelSpec::name() const {
    switch (id) {
        case ModelId::M1a025: return "m1a025";
        case ModelId::M1a1: return "m1a1";
        case ModelId::M2: return "m2";
        case ModelId::M3: return "m3";
        case ModelId::M4: return "m4";
        case ModelId::M5: return "m5";
    }
    throw std::logic_error("ModelSpec: bad id");
}

std::optional<ModelSpec> ModelSpec::from_name(const std::string& name) {
    if (name == "m1a025") return ModelSpec{ModelId::M1a025};
    if (name == "m1a1") return ModelSpec{ModelId::M1a1};
    if (name == "m2") return ModelSpec{ModelId::M2};
    if (name == "m3") return ModelSpec{ModelId::M3};
    if (name == "m4") return ModelSpec{ModelId::M4};
    if (name == "m5") return ModelSpec{ModelId::M5};
    return std::nullopt;
}

const char* ModelSpec::valid_names() { return "m1a025, m1a1, m2, m3, m4, m5"; }

namespace {

Dataset generate_impl(const ModelSpec& spec, std::size_t n, Rng& rng, bool with_noise,
                      bool with_response) {
    if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
    const std::size_t d = spec.dim();
    Dataset data(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = data.row(i);
        for (std::size_t j = 0; j < d; ++j) r[j] = rng.uniform();
        if (!with_response) continue;
        double yi = spec.f_star(r);
        if (with_noise) {
            const double noise = spec.noise_kind() == NoiseKind::Gaussian
                                     ? rng.normal()
                                     : rng.uniform(-SQRT3, SQRT3);
            yi += std::sqrt(spec.sigma2_star(r)) * noise;
        }
        data.y[i] = yi;
    }
    return data;
}

}  // namespace

Dataset generate(const ModelSpec& spec, std::size_t n, Rng& rng) {
    return generate_impl(spec, n, rng, true, true);
}

Dataset generate_noiseless(const ModelSpec& spec, std::size_t n, Rng& rng) {
    return generate_impl(spec, n, rng, false, true);
}

Dataset generate_features(const ModelSpec& spec, std::size_t n, Rng& rng) {
    return generate_impl(spec, n, rng, false, false);
}

}  // namespace hetvar
