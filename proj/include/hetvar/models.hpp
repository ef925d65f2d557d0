#pragma once

#include <optional>
#include <span>
#include <string>

#include "hetvar/dataset.hpp"
#include "hetvar/rng.hpp"

namespace hetvar {

// The five synthetic heteroscedastic models of the simulation study; Model 1
// comes in two noise scales (a = 1/4 and a = 1).
enum class ModelId { M1a025, M1a1, M2, M3, M4, M5 };

enum class NoiseKind { Gaussian, UniformSqrt3 };

struct ModelSpec {
    ModelId id = ModelId::M1a025;

    std::size_t dim() const;
    NoiseKind noise_kind() const;
    double scale_a() const;        // Model 1 only; 1.0 otherwise
    std::size_t sparsity() const;  // Model 3 only (s = 14); 0 otherwise

    // True regression function, exactly as displayed for the model.
    double f_star(std::span<const double> x) const;
    // True conditional variance; nonnegative for every x in [0,1]^d.
    double sigma2_star(std::span<const double> x) const;

    std::string name() const;
    static std::optional<ModelSpec> from_name(const std::string& name);
    static const char* valid_names();  // comma-separated, for CLI errors
};

// Draws n i.i.d. rows: X uniform on [0,1]^d, Y = f*(X) + sigma(X)*noise with
// noise N(0,1) or U[-sqrt(3),sqrt(3)] according to the model.
Dataset generate(const ModelSpec& spec, std::size_t n, Rng& rng);

// Diagnostic hook: same X draw path, zero noise (Y = f*(X) exactly).
Dataset generate_noiseless(const ModelSpec& spec, std::size_t n, Rng& rng);

// Features-only sample (Y left zero); used for ECDF calibration sets.
Dataset generate_features(const ModelSpec& spec, std::size_t n, Rng& rng);

}  // namespace hetvar
