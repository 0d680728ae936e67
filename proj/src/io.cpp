#include "centerfpa/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cfpa {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'P', 'A', 'W', 'T', 'S', '1'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v)
{
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in)
{
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("tensor file: unexpected end of data");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_bytes(std::istream& in, std::uint32_t n)
{
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw std::runtime_error("tensor file: unexpected end of data");
    return s;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool skip_line(const std::string& line)
{
    const std::string t = trim(line);
    return t.empty() || t[0] == '#';
}

double parse_double(const std::string& token, int line_no, const char* what)
{
    double v = 0.0;
    const char* first = token.data();
    const char* last = first + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + " line " + std::to_string(line_no) +
                                    ": cannot parse number '" + token + "'");
    }
    return v;
}

int lookup_class(const std::vector<std::string>& classes, const std::string& name, int line_no, const char* what)
{
    auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) {
        throw std::invalid_argument(std::string(what) + " line " + std::to_string(line_no) +
                                    ": unknown class '" + name + "'");
    }
    return static_cast<int>(it - classes.begin());
}

const std::string& class_name(const std::vector<std::string>& classes, int id)
{
    if (id < 0 || id >= static_cast<int>(classes.size())) {
        throw std::invalid_argument("class id " + std::to_string(id) + " has no name");
    }
    return classes[id];
}

// --- model parameter naming ---

void put_conv(TensorFile& f, const std::string& prefix, const ConvParams& p)
{
    f.add(prefix + ".weight", p.kernel);
    f.add(prefix + ".bias", p.bias);
}

void put_slot(TensorFile& f, const std::string& prefix, const ACBlockSlot& slot)
{
    if (const auto* t = std::get_if<ACBlockParams>(&slot)) {
        f.add(prefix + ".k3x3", t->k3x3);
        f.add(prefix + ".k1x3", t->k1x3);
        f.add(prefix + ".k3x1", t->k3x1);
        f.add(prefix + ".b3x3", t->b3x3);
        f.add(prefix + ".b1x3", t->b1x3);
        f.add(prefix + ".b3x1", t->b3x1);
    } else {
        put_conv(f, prefix, std::get<ConvParams>(slot));
    }
}

const Tensor& expect(const TensorFile& f, const std::string& name, const Shape& shape)
{
    const Tensor& t = f.get(name);
    if (t.shape() != shape) {
        throw std::invalid_argument("weights: tensor '" + name + "' has shape " + shape_string(t.shape()) +
                                    " but the config requires " + shape_string(shape));
    }
    return t;
}

ConvParams get_conv(const TensorFile& f, const std::string& prefix, int out, int in, int kh, int kw)
{
    return {expect(f, prefix + ".weight", {out, in, kh, kw}), expect(f, prefix + ".bias", {out})};
}

ACBlockSlot get_slot(const TensorFile& f, const std::string& prefix, int out, int in)
{
    if (f.find(prefix + ".k3x3")) {
        ACBlockParams p;
        p.k3x3 = expect(f, prefix + ".k3x3", {out, in, 3, 3});
        p.k1x3 = expect(f, prefix + ".k1x3", {out, in, 1, 3});
        p.k3x1 = expect(f, prefix + ".k3x1", {out, in, 3, 1});
        p.b3x3 = expect(f, prefix + ".b3x3", {out});
        p.b1x3 = expect(f, prefix + ".b1x3", {out});
        p.b3x1 = expect(f, prefix + ".b3x1", {out});
        return p;
    }
    return get_conv(f, prefix, out, in, 3, 3);
}

std::string block_prefix(int stage, int block)
{
    return "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
}

const char* const kHeadNames[3] = {"heatmap", "wh", "offset"};

} // namespace

const Tensor* TensorFile::find(const std::string& name) const
{
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

const Tensor& TensorFile::get(const std::string& name) const
{
    const Tensor* t = find(name);
    if (!t) throw std::invalid_argument("tensor file: missing tensor '" + name + "'");
    return *t;
}

void write_tensor_file(const TensorFile& file, std::ostream& out)
{
    out.write(kMagic, sizeof kMagic);
    put_u32(out, static_cast<std::uint32_t>(file.manifest.size()));
    out.write(file.manifest.data(), static_cast<std::streamsize>(file.manifest.size()));
    put_u32(out, static_cast<std::uint32_t>(file.tensors.size()));
    for (const auto& [name, t] : file.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
        for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw std::runtime_error("tensor file: write failed");
}

TensorFile read_tensor_file(std::istream& in)
{
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("tensor file: bad magic");
    }
    TensorFile f;
    f.manifest = get_bytes(in, get_u32(in));
    const std::uint32_t count = get_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_bytes(in, get_u32(in));
        const std::uint32_t rank = get_u32(in);
        if (rank == 0 || rank > kMaxRank) throw std::runtime_error("tensor file: bad rank for '" + name + "'");
        Shape shape(rank);
        std::uint64_t n = 1;
        for (auto& e : shape) {
            const std::uint32_t v = get_u32(in);
            if (v == 0 || v > (1u << 30)) throw std::runtime_error("tensor file: bad extent for '" + name + "'");
            e = static_cast<int>(v);
            n *= v;
            if (n > (1ull << 32)) throw std::runtime_error("tensor file: tensor '" + name + "' too large");
        }
        std::vector<float> values(n);
        for (float& v : values) v = std::bit_cast<float>(get_u32(in));
        f.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return f;
}

void save_tensor_file(const TensorFile& file, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_tensor_file(file, out);
}

TensorFile load_tensor_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_tensor_file(in);
}

TensorFile model_to_tensor_file(const ModelParams& p, const ModelConfig& cfg)
{
    TensorFile f;
    f.manifest = config_to_json(cfg);
    put_conv(f, "stem", p.stem);
    for (int s = 0; s < 4; ++s) {
        for (int b = 0; b < 2; ++b) {
            const ResidualParams& r = p.stages[s][b];
            const std::string prefix = block_prefix(s, b);
            put_slot(f, prefix + ".ac1", r.ac1);
            put_slot(f, prefix + ".ac2", r.ac2);
            if (r.projection) put_conv(f, prefix + ".proj", *r.projection);
        }
    }
    f.add("se.reduce.weight", p.se.reduce_weight);
    f.add("se.reduce.bias", p.se.reduce_bias);
    f.add("se.expand.weight", p.se.expand_weight);
    f.add("se.expand.bias", p.se.expand_bias);
    put_conv(f, "reduce", p.reduce);
    const HeadParams* heads[3] = {&p.heatmap, &p.wh, &p.offset};
    for (int i = 0; i < 3; ++i) {
        put_conv(f, std::string("head.") + kHeadNames[i] + ".conv", heads[i]->conv);
        put_conv(f, std::string("head.") + kHeadNames[i] + ".out", heads[i]->out);
    }
    return f;
}

ModelParams model_from_tensor_file(const TensorFile& f, const ModelConfig& cfg)
{
    cfg.validate();
    ModelParams p;
    const int base = cfg.backbone_width;
    p.stem = get_conv(f, "stem", base, 3, 3, 3);
    int in = base;
    for (int s = 0; s < 4; ++s) {
        const int width = base << s;
        for (int b = 0; b < 2; ++b) {
            ResidualParams& r = p.stages[s][b];
            const std::string prefix = block_prefix(s, b);
            r.stride = (b == 0 && s > 0) ? 2 : 1;
            r.ac1 = get_slot(f, prefix + ".ac1", width, in);
            r.ac2 = get_slot(f, prefix + ".ac2", width, width);
            if (r.stride != 1 || in != width) r.projection = get_conv(f, prefix + ".proj", width, in, 1, 1);
            in = width;
        }
    }
    const int pyramid = base * 15, hidden = pyramid / cfg.se_ratio;
    p.se.reduce_weight = expect(f, "se.reduce.weight", {hidden, pyramid});
    p.se.reduce_bias = expect(f, "se.reduce.bias", {hidden});
    p.se.expand_weight = expect(f, "se.expand.weight", {pyramid, hidden});
    p.se.expand_bias = expect(f, "se.expand.bias", {pyramid});
    p.reduce = get_conv(f, "reduce", cfg.reduce_width, pyramid, 1, 1);
    const int outs[3] = {cfg.num_classes(), 2, 2};
    HeadParams* heads[3] = {&p.heatmap, &p.wh, &p.offset};
    for (int i = 0; i < 3; ++i) {
        const std::string prefix = std::string("head.") + kHeadNames[i];
        heads[i]->conv = get_conv(f, prefix + ".conv", cfg.head_width, cfg.reduce_width, 3, 3);
        heads[i]->out = get_conv(f, prefix + ".out", outs[i], cfg.head_width, 1, 1);
    }
    return p;
}

TensorFile targets_to_tensor_file(const Targets& t, const ModelConfig& cfg)
{
    TensorFile f;
    f.manifest = config_to_json(cfg);
    f.add("heatmap", t.heatmap);
    f.add("wh", t.wh);
    f.add("offset", t.offset);
    f.add("pos_mask", t.pos_mask);
    f.add("num_objects", Tensor({1}, {static_cast<float>(t.num_objects)}));
    f.add("collisions", Tensor({1}, {static_cast<float>(t.collisions)}));
    return f;
}

Targets targets_from_tensor_file(const TensorFile& f)
{
    Targets t;
    t.heatmap = f.get("heatmap");
    t.wh = f.get("wh");
    t.offset = f.get("offset");
    t.pos_mask = f.get("pos_mask");
    t.num_objects = static_cast<int>(f.get("num_objects")[0]);
    t.collisions = static_cast<int>(f.get("collisions")[0]);
    return t;
}

Tensor read_ppm(const std::string& path)
{
    const std::string bytes = slurp(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') ++pos;
        return bytes.substr(start, pos - start);
    };
    const std::string magic = next_token();
    if (magic != "P6" && magic != "P5") throw std::runtime_error(path + ": not a binary PPM/PGM file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed header");
    }
    if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error(path + ": only 8-bit images are supported");
    ++pos; // single whitespace after maxval
    const int channels = magic == "P6" ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (bytes.size() < pos + need) throw std::runtime_error(path + ": truncated pixel data");

    Tensor img({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const std::size_t idx = pos + (static_cast<std::size_t>(y) * w + x) * channels + (channels == 3 ? c : 0);
                img.at(c, y, x) = static_cast<unsigned char>(bytes[idx]) / 255.0f;
            }
        }
    }
    return img;
}

void write_ppm(const Tensor& image, const std::string& path)
{
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw std::invalid_argument("write_ppm: expected a [3, H, W] image, got " + shape_string(image.shape()));
    }
    const int h = image.dim(1), w = image.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P6\n" << w << ' ' << h << "\n255\n";
    std::vector<char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
                row[static_cast<std::size_t>(x) * 3 + c] = static_cast<char>(static_cast<int>(std::lround(v * 255.0f)));
            }
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

Tensor render_boxes(const Tensor& image, const std::vector<BBox>& boxes)
{
    Tensor out = image;
    const int h = image.dim(1), w = image.dim(2);
    for (const BBox& b : boxes) {
        const int x0 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, w - 1);
        const int x1 = std::clamp(static_cast<int>(std::ceil(b.x2)) - 1, 0, w - 1);
        const int y0 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, h - 1);
        const int y1 = std::clamp(static_cast<int>(std::ceil(b.y2)) - 1, 0, h - 1);
        const std::array<float, 3> color{1.0f, b.score >= 0.5 ? 1.0f : 0.4f, 0.0f};
        auto plot = [&](int x, int y) {
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = color[c];
        };
        for (int x = x0; x <= x1; ++x) {
            plot(x, y0);
            plot(x, y1);
        }
        for (int y = y0; y <= y1; ++y) {
            plot(x0, y);
            plot(x1, y);
        }
    }
    return out;
}

std::vector<std::string> read_class_list(const std::string& path)
{
    std::istringstream in(slurp(path));
    std::vector<std::string> names;
    for (std::string line; std::getline(in, line);) {
        if (skip_line(line)) continue;
        names.push_back(trim(line));
    }
    if (names.empty()) throw std::invalid_argument(path + ": class list is empty");
    return names;
}

std::vector<BBox> parse_annotations(std::istream& in, const std::vector<std::string>& classes)
{
    std::vector<BBox> boxes;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (skip_line(line)) continue;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.size() != 5) {
            throw std::invalid_argument("annotations line " + std::to_string(line_no) +
                                        ": expected 'x1 y1 x2 y2 label', got " + std::to_string(tok.size()) +
                                        " fields");
        }
        BBox b;
        b.x1 = parse_double(tok[0], line_no, "annotations");
        b.y1 = parse_double(tok[1], line_no, "annotations");
        b.x2 = parse_double(tok[2], line_no, "annotations");
        b.y2 = parse_double(tok[3], line_no, "annotations");
        b.class_id = lookup_class(classes, tok[4], line_no, "annotations");
        b.score = 1.0;
        if (!b.valid()) {
            throw std::invalid_argument("annotations line " + std::to_string(line_no) + ": degenerate box");
        }
        boxes.push_back(b);
    }
    return boxes;
}

std::vector<BBox> read_annotations(const std::string& path, const std::vector<std::string>& classes)
{
    std::istringstream in(slurp(path));
    try {
        return parse_annotations(in, classes);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_annotations(const std::vector<BBox>& boxes, const std::vector<std::string>& classes, std::ostream& out)
{
    for (const BBox& b : boxes) {
        out << format_number(b.x1) << ' ' << format_number(b.y1) << ' ' << format_number(b.x2) << ' '
            << format_number(b.y2) << ' ' << class_name(classes, b.class_id) << '\n';
    }
}

std::vector<BBox> parse_detections(std::istream& in, const std::vector<std::string>& classes)
{
    std::vector<BBox> boxes;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (skip_line(line)) continue;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.size() != 6) {
            throw std::invalid_argument("detections line " + std::to_string(line_no) +
                                        ": expected 'class score x1 y1 x2 y2', got " + std::to_string(tok.size()) +
                                        " fields");
        }
        BBox b;
        b.class_id = lookup_class(classes, tok[0], line_no, "detections");
        b.score = parse_double(tok[1], line_no, "detections");
        b.x1 = parse_double(tok[2], line_no, "detections");
        b.y1 = parse_double(tok[3], line_no, "detections");
        b.x2 = parse_double(tok[4], line_no, "detections");
        b.y2 = parse_double(tok[5], line_no, "detections");
        boxes.push_back(b);
    }
    return boxes;
}

std::vector<BBox> read_detections(const std::string& path, const std::vector<std::string>& classes)
{
    std::istringstream in(slurp(path));
    try {
        return parse_detections(in, classes);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_detections(const std::vector<BBox>& boxes, const std::vector<std::string>& classes, std::ostream& out)
{
    for (const BBox& b : boxes) {
        out << class_name(classes, b.class_id) << ' ' << format_number(b.score) << ' ' << format_number(b.x1) << ' '
            << format_number(b.y1) << ' ' << format_number(b.x2) << ' ' << format_number(b.y2) << '\n';
    }
}

void save_detections(const std::vector<BBox>& boxes, const std::vector<std::string>& classes,
                     const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_detections(boxes, classes, out);
}

std::string format_number(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, ptr);
}

} // namespace cfpa
