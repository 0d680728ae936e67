#pragma once

#include <string>
#include <vector>

namespace cfpa {

/// Weights of the training objective.
struct LossConfig {
    double alpha = 2.0;
    double beta = 4.0;
    double phi = 1.0;
    double lambda1 = 0.1;
    double lambda2 = 1.0;

    void validate() const;
    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Every tunable constant of the detector. Keys in the serialized form use the
/// symbol names (R, K, phi, alpha, beta, lambda1, lambda2).
struct ModelConfig {
    int R = 4;                  // output stride of the head maps
    int K = 160;                // decoder top-K
    int tile = 1024;
    int stride = 824;
    double nms_iou = 0.45;
    double match_iou = 0.5;     // evaluation TP threshold
    double score_floor = 0.05;
    std::vector<double> scales{0.5, 1.0, 1.5};
    LossConfig loss;

    // Network widths.
    int backbone_width = 64;    // stage widths are 1x, 2x, 4x, 8x this
    int se_ratio = 16;
    int reduce_width = 64;
    int head_width = 64;

    std::vector<std::string> classes = default_class_names();

    int num_classes() const { return static_cast<int>(classes.size()); }
    int class_index(const std::string& name) const; // -1 when unknown

    void validate() const;

    static std::vector<std::string> default_class_names();

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

ModelConfig load_config(const std::string& path);
void save_config(const ModelConfig& cfg, const std::string& path);

/// Name of the environment variable holding the default config path.
inline constexpr const char* kConfigEnvVar = "CENTERFPA_CONFIG";

} // namespace cfpa
