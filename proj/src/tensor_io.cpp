#include "invdiff/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace invdiff {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'D', 'I', 'F', 'F', '1'};

std::string header_json(const TensorMeta& meta) {
    nlohmann::json h;
    h["dtype"] = "f32le";
    h["order"] = "kmn";
    h["shape"] = meta.shape;
    if (!meta.sigma_edges.empty()) h["sigma_edges"] = meta.sigma_edges;
    if (meta.pixel_pitch) h["pixel_pitch"] = *meta.pixel_pitch;
    return h.dump();
}

std::int64_t element_count(const TensorMeta& meta) {
    std::int64_t n = 1;
    for (auto d : meta.shape) {
        if (d < 1) throw std::invalid_argument("tensor header: nonpositive dimension");
        n *= d;
    }
    return n;
}

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32_le(out, bits);
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

void tensor_write(const std::string& path, const TensorMeta& meta,
                  const std::vector<double>& payload) {
    if (meta.shape.size() < 2 || meta.shape.size() > 3)
        throw std::invalid_argument("tensor header: shape must have 2 or 3 dimensions");
    if (element_count(meta) != static_cast<std::int64_t>(payload.size()))
        throw std::invalid_argument("tensor write: shape/payload element count mismatch");

    std::string buf;
    const std::string header = header_json(meta);
    buf.reserve(12 + header.size() + 4 * payload.size());
    buf.append(kMagic, 8);
    put_u32_le(buf, static_cast<std::uint32_t>(header.size()));
    buf.append(header);
    for (double x : payload) put_f32_le(buf, static_cast<float>(x));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("tensor write: cannot open " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("tensor write: I/O failure on " + path);
}

std::pair<TensorMeta, std::vector<double>> tensor_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("tensor read: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw std::runtime_error("tensor read: bad magic in " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const std::uint32_t header_len = get_u32_le(p + 8);
    if (buf.size() < 12 + static_cast<std::size_t>(header_len))
        throw std::runtime_error("tensor read: truncated header in " + path);

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(buf.substr(12, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("tensor read: invalid header JSON: " + std::string(e.what()));
    }
    if (h.value("dtype", "") != "f32le")
        throw std::runtime_error("tensor read: unknown dtype in " + path);

    TensorMeta meta;
    meta.shape = h.at("shape").get<std::vector<std::int64_t>>();
    if (h.contains("sigma_edges"))
        meta.sigma_edges = h["sigma_edges"].get<std::vector<double>>();
    if (h.contains("pixel_pitch")) meta.pixel_pitch = h["pixel_pitch"].get<double>();

    const std::int64_t n = element_count(meta);
    const std::size_t payload_off = 12 + header_len;
    if (buf.size() - payload_off != static_cast<std::size_t>(4 * n))
        throw std::runtime_error("tensor read: payload length mismatch in " + path);

    std::vector<double> payload(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32_le(p + payload_off + 4 * i);
        float v;
        std::memcpy(&v, &bits, 4);
        payload[static_cast<std::size_t>(i)] = static_cast<double>(v);
    }
    return {std::move(meta), std::move(payload)};
}

void write_image(const std::string& path, const ImageGrid& img) {
    TensorMeta meta;
    meta.shape = {img.rows(), img.cols()};
    meta.pixel_pitch = img.pixel_pitch;
    tensor_write(path, meta, img.data.vec());
}

ImageGrid read_image(const std::string& path) {
    auto [meta, payload] = tensor_read(path);
    if (meta.shape.size() != 2)
        throw std::runtime_error("tensor read: expected a 2D tensor in " + path);
    ImageGrid img;
    img.data = Tensor2(static_cast<int>(meta.shape[0]), static_cast<int>(meta.shape[1]));
    img.data.vec() = std::move(payload);
    img.pixel_pitch = meta.pixel_pitch.value_or(1.0);
    return img;
}

void write_stack(const std::string& path, const PsdrStack& stack) {
    TensorMeta meta;
    meta.shape = {stack.bins(), stack.rows(), stack.cols()};
    meta.sigma_edges = stack.sigma.edges;
    tensor_write(path, meta, stack.coeffs.vec());
}

PsdrStack read_stack(const std::string& path) {
    auto [meta, payload] = tensor_read(path);
    if (meta.shape.size() != 3)
        throw std::runtime_error("tensor read: expected a 3D tensor in " + path);
    PsdrStack s;
    s.coeffs = Tensor3(static_cast<int>(meta.shape[0]), static_cast<int>(meta.shape[1]),
                       static_cast<int>(meta.shape[2]));
    s.coeffs.vec() = std::move(payload);
    if (!meta.sigma_edges.empty()) {
        s.sigma.edges = meta.sigma_edges;
        if (s.sigma.bins() != s.coeffs.planes())
            throw std::runtime_error("tensor read: sigma_edges inconsistent with shape");
    } else {
        // No edges recorded: fall back to unit-width bins.
        s.sigma.edges.resize(static_cast<std::size_t>(s.coeffs.planes()) + 1);
        for (std::size_t i = 0; i < s.sigma.edges.size(); ++i)
            s.sigma.edges[i] = static_cast<double>(i);
    }
    return s;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw std::runtime_error("I/O failure on " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace invdiff
