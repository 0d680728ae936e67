#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "centerfpa/bbox.hpp"
#include "centerfpa/blocks.hpp"
#include "centerfpa/codec.hpp"
#include "centerfpa/config.hpp"
#include "centerfpa/tensor.hpp"

namespace cfpa {

// Tensor container, all integers little-endian:
//   "CFPAWTS1"                       8-byte magic
//   u32 manifest length, bytes       UTF-8 JSON config
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, rank x u32 extents,
//               IEEE-754 binary32 values in row-major order
struct TensorFile {
    std::string manifest;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
    const Tensor& get(const std::string& name) const; // throws when missing
    void add(std::string name, Tensor t) { tensors.emplace_back(std::move(name), std::move(t)); }

    friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

void write_tensor_file(const TensorFile& file, std::ostream& out);
TensorFile read_tensor_file(std::istream& in);
void save_tensor_file(const TensorFile& file, const std::string& path);
TensorFile load_tensor_file(const std::string& path);

TensorFile model_to_tensor_file(const ModelParams& params, const ModelConfig& cfg);
/// Accepts training-form and fused ACBlocks, block by block. Extents are checked
/// against cfg.
ModelParams model_from_tensor_file(const TensorFile& file, const ModelConfig& cfg);

TensorFile targets_to_tensor_file(const Targets& targets, const ModelConfig& cfg);
Targets targets_from_tensor_file(const TensorFile& file);

// Binary PPM (P6, maxval 255); P5 greyscale is read as three equal channels.
Tensor read_ppm(const std::string& path);
void write_ppm(const Tensor& image, const std::string& path);

/// Copy of the image with one-pixel box outlines.
Tensor render_boxes(const Tensor& image, const std::vector<BBox>& boxes);

/// One class name per line; blank lines and '#' comments ignored.
std::vector<std::string> read_class_list(const std::string& path);

/// "x1 y1 x2 y2 label" per line.
std::vector<BBox> parse_annotations(std::istream& in, const std::vector<std::string>& classes);
std::vector<BBox> read_annotations(const std::string& path, const std::vector<std::string>& classes);
void write_annotations(const std::vector<BBox>& boxes, const std::vector<std::string>& classes,
                       std::ostream& out);

/// "class score x1 y1 x2 y2" per line. Numbers use the shortest
/// round-trip decimal form, so reading back is lossless.
std::vector<BBox> parse_detections(std::istream& in, const std::vector<std::string>& classes);
std::vector<BBox> read_detections(const std::string& path, const std::vector<std::string>& classes);
void write_detections(const std::vector<BBox>& boxes, const std::vector<std::string>& classes,
                      std::ostream& out);
void save_detections(const std::vector<BBox>& boxes, const std::vector<std::string>& classes,
                     const std::string& path);

std::string format_number(double v);

} // namespace cfpa
