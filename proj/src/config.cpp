#include "centerfpa/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cfpa {

using nlohmann::json;

void LossConfig::validate() const
{
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("alpha and beta must be >= 0");
    if (!(phi > 0.0 && phi <= 1.0)) throw std::invalid_argument("phi must lie in (0, 1]");
}

std::vector<std::string> ModelConfig::default_class_names()
{
    return {"plane",           "ship",         "storage-tank",       "baseball-diamond",
            "tennis-court",    "basketball-court", "ground-track-field", "harbor",
            "bridge",          "large-vehicle", "small-vehicle",      "helicopter",
            "roundabout",      "soccer-ball-field", "swimming-pool"};
}

int ModelConfig::class_index(const std::string& name) const
{
    auto it = std::find(classes.begin(), classes.end(), name);
    return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

void ModelConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (R < 1) fail("R must be >= 1");
    if (K < 1) fail("K must be >= 1");
    if (tile < 1 || stride < 1 || stride > tile) fail("need 0 < stride <= tile");
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) fail("nms_iou must lie in [0, 1]");
    if (!(match_iou >= 0.0 && match_iou <= 1.0)) fail("match_iou must lie in [0, 1]");
    if (score_floor < 0.0) fail("score_floor must be >= 0");
    if (scales.empty()) fail("scales must not be empty");
    for (double s : scales) {
        if (!(s > 0.0)) fail("every scale must be > 0");
    }
    if (backbone_width < 1 || reduce_width < 1 || head_width < 1) fail("widths must be >= 1");
    if (se_ratio < 1) fail("se_ratio must be >= 1");
    if ((backbone_width * 15) % se_ratio != 0) {
        fail("se_ratio must divide the fused pyramid width " + std::to_string(backbone_width * 15));
    }
    if (classes.empty()) fail("at least one class is required");
    std::set<std::string> seen;
    for (const auto& c : classes) {
        if (c.empty() || c.find_first_of(" \t\r\n") != std::string::npos) {
            fail("class names must be non-empty and contain no whitespace");
        }
        if (!seen.insert(c).second) fail("duplicate class name '" + c + "'");
    }
    loss.validate();
}

std::string config_to_json(const ModelConfig& cfg)
{
    json j;
    j["R"] = cfg.R;
    j["K"] = cfg.K;
    j["tile"] = cfg.tile;
    j["stride"] = cfg.stride;
    j["nms_iou"] = cfg.nms_iou;
    j["match_iou"] = cfg.match_iou;
    j["score_floor"] = cfg.score_floor;
    j["scales"] = cfg.scales;
    j["phi"] = cfg.loss.phi;
    j["alpha"] = cfg.loss.alpha;
    j["beta"] = cfg.loss.beta;
    j["lambda1"] = cfg.loss.lambda1;
    j["lambda2"] = cfg.loss.lambda2;
    j["backbone_width"] = cfg.backbone_width;
    j["se_ratio"] = cfg.se_ratio;
    j["reduce_width"] = cfg.reduce_width;
    j["head_width"] = cfg.head_width;
    j["classes"] = cfg.classes;
    return j.dump(2) + "\n";
}

ModelConfig config_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    ModelConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "R") cfg.R = value.get<int>();
            else if (key == "K") cfg.K = value.get<int>();
            else if (key == "tile") cfg.tile = value.get<int>();
            else if (key == "stride") cfg.stride = value.get<int>();
            else if (key == "nms_iou") cfg.nms_iou = value.get<double>();
            else if (key == "match_iou") cfg.match_iou = value.get<double>();
            else if (key == "score_floor") cfg.score_floor = value.get<double>();
            else if (key == "scales") cfg.scales = value.get<std::vector<double>>();
            else if (key == "phi") cfg.loss.phi = value.get<double>();
            else if (key == "alpha") cfg.loss.alpha = value.get<double>();
            else if (key == "beta") cfg.loss.beta = value.get<double>();
            else if (key == "lambda1") cfg.loss.lambda1 = value.get<double>();
            else if (key == "lambda2") cfg.loss.lambda2 = value.get<double>();
            else if (key == "backbone_width") cfg.backbone_width = value.get<int>();
            else if (key == "se_ratio") cfg.se_ratio = value.get<int>();
            else if (key == "reduce_width") cfg.reduce_width = value.get<int>();
            else if (key == "head_width") cfg.head_width = value.get<int>();
            else if (key == "classes") cfg.classes = value.get<std::vector<std::string>>();
            else throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    } catch (const json::type_error& e) {
        throw std::invalid_argument(std::string("config: wrong value type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ModelConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const ModelConfig& cfg, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file " + path);
    out << config_to_json(cfg);
}

} // namespace cfpa
