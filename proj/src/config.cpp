#include <nlohmann/json.hpp>
#include <stdexcept>

#include "hetvar/harness.hpp"

namespace hetvar {

ExperimentConfig config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "models") {
                for (const auto& name : value) {
                    const auto spec = ModelSpec::from_name(name.get<std::string>());
                    if (!spec)
                        throw std::invalid_argument("unknown model '" + name.get<std::string>() +
                                                    "'; valid: " + ModelSpec::valid_names());
                    cfg.models.push_back(*spec);
                }
            } else if (key == "n") {
                cfg.n = value.get<std::size_t>();
            } else if (key == "N") {
                cfg.N = value.get<std::size_t>();
            } else if (key == "calib_size") {
                cfg.calib_size = value.get<std::size_t>();
            } else if (key == "T") {
                cfg.T = value.get<std::size_t>();
            } else if (key == "reps") {
                cfg.reps = value.get<std::size_t>();
            } else if (key == "epsilons") {
                cfg.epsilons = value.get<std::vector<double>>();
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else if (key == "methods") {
                cfg.methods.clear();
                for (const auto& name : value) {
                    const auto m = method_from_name(name.get<std::string>());
                    if (!m)
                        throw std::invalid_argument("unknown method '" + name.get<std::string>() +
                                                    "'");
                    cfg.methods.push_back(*m);
                }
            } else if (key == "output_dir") {
                cfg.output_dir = value.get<std::string>();
            } else if (key == "threads") {
                cfg.threads = value.get<std::size_t>();
            } else if (key == "plugin_knn_k") {
                cfg.plugin_knn_k = value.get<std::size_t>();
            } else {
                throw std::invalid_argument("unknown key '" + key + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("config: key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

}  // namespace hetvar
